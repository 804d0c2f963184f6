#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpi/dataset.hpp"
#include "gpi/nuisance.hpp"

namespace gpi {

enum class EstimandKind { Att, Apo, Contrast };

/// Exact normal 97.5% quantile used for all intervals.
inline constexpr double kZ975 = 1.959964;

struct EffectEstimate {
  EstimandKind kind = EstimandKind::Att;
  int level_a = -1;  // apo level / contrast first level
  int level_b = -1;  // contrast second level
  double point = 0.0;
  double se_cluster = 0.0;
  std::array<double, 2> ci95{0.0, 0.0};
  std::vector<double> scores;  // per-observation centered efficient scores
  std::vector<int> cluster;
  std::size_t n_clusters = 0;
  double truncation_level = 0.0;
  /// Token tying the estimate to (dataset, folds); contrasts require a match.
  std::uint64_t provenance = 0;

  std::string estimand_label() const;
};

/// Entries clamped to [alpha, 1-alpha], rows renormalized to sum to one.
/// alpha = 0 is the identity.
Matrix truncate_propensity(const Matrix& pi_hat, double alpha);

/// ATT for binary treatment via the efficient-score equation, with P(T=1)
/// replaced by the sample treated fraction and cluster-robust SEs.
EffectEstimate estimate_att(const CausalDataset& ds,
                            const NuisanceEstimates& est, double alpha);

/// AIPW average potential outcome at treatment level t.
EffectEstimate estimate_apo(const CausalDataset& ds,
                            const NuisanceEstimates& est, int level,
                            double alpha);

/// Difference of two APO estimates on the same dataset/folds; scores
/// subtract and the SE is recomputed on the combined scores.
EffectEstimate contrast(const EffectEstimate& a, const EffectEstimate& b);

/// sqrt(sum_g (sum_{i in g} centered_score_i)^2) / n.
double clustered_se(std::span<const double> scores,
                    std::span<const int> cluster);

std::uint64_t estimate_provenance(const CausalDataset& ds,
                                  const NuisanceEstimates& est);

}  // namespace gpi
