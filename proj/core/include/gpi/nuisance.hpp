#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpi/dataset.hpp"
#include "gpi/nn.hpp"

namespace gpi {

/// Architecture of the joint deconfounder + per-treatment-head model:
/// deconfounder R -> [hidden...] -> q, one scalar head per treatment level
/// on [f(R), Z].
struct JointArchitecture {
  std::vector<std::size_t> deconfounder_hidden = {256, 128};
  std::size_t deconfounder_out_dim = 64;  // q
  std::size_t head_hidden = 100;
  double dropout = 0.1;

  MlpSpec deconfounder_spec(std::size_t d_r) const;
  MlpSpec head_spec(std::size_t z_dim) const;
};

/// Deconfounder network plus L outcome heads. Heads share the input
/// [f(R), standardized Z]; each sample's gradient reaches only its own head.
struct JointNuisanceModel {
  Network deconfounder;
  std::vector<Network> heads;
  Standardizer z_std;
  std::size_t q = 0;

  Matrix deconfound(const Matrix& reps) const;  // eval-mode f(R)
  /// n x L matrix of head predictions for the given rows.
  Matrix predict_mu(const Matrix& reps, const Matrix& z) const;
};

/// Joint fit of deconfounder and heads by minimizing the mean squared error
/// of the observed-treatment head, with early stopping on a 20% tail
/// validation split of the (seed-shuffled) training rows.
JointNuisanceModel fit_joint(const CausalDataset& ds,
                             std::span<const int> rows,
                             const JointArchitecture& arch,
                             const TrainConfig& cfg,
                             TrainHistory* history = nullptr);

/// Spectrally normalized multinomial propensity net on [f(R), Z].
struct PropensityConfig {
  std::vector<std::size_t> hidden = {128, 64};
  double learning_rate = 1e-5;
  double dropout = 0.0;
  /// Inputs are standardized and then multiplied by this factor. Each layer
  /// keeps spectral norm <= 1 either way; the scale sets how steep the
  /// fitted score may be per standard deviation of the inputs.
  double input_scale = 1.0;
};

struct PropensityModel {
  Network net;
  Standardizer in_std;
  int n_levels = 0;

  /// n x L matrix of class probabilities (softmax; rows sum to 1).
  Matrix predict(const Matrix& deconfounded, const Matrix& z) const;
};

/// Multinomial cross-entropy fit of T on [f_hat(R), Z]; the deconfounder is
/// frozen. Spectral normalization runs every optimizer step.
PropensityModel fit_propensity(const CausalDataset& ds,
                               std::span<const int> rows,
                               const JointNuisanceModel& f_provider,
                               const PropensityConfig& prop_cfg,
                               const TrainConfig& cfg,
                               TrainHistory* history = nullptr);

/// Random-search space over the joint architecture/optimizer, defaulting to
/// the protocol values.
struct SearchSpace {
  double lr_lo = 1e-7;
  double lr_hi = 1e-4;
  double dropout_lo = 0.05;
  double dropout_hi = 0.3;
  std::vector<std::size_t> head_widths = {50, 100, 200};
  std::vector<std::vector<std::size_t>> deconfounder_widths = {
      {256, 128}, {512, 256}, {1024, 512}};
  std::size_t trials = 20;

  void validate() const;
};

struct CrossFitOptions {
  SearchSpace space;
  std::size_t deconfounder_out_dim = 64;
  PropensityConfig propensity;
  /// Base optimizer protocol; learning_rate and the architecture dropout are
  /// overwritten per random-search trial.
  TrainConfig train;
  int threads = 1;
  /// Optional JSON-lines sink for the tuning trace (one line per trial).
  std::function<void(const std::string&)> trace;
};

/// Cross-fitted nuisance values: every row is predicted by models that never
/// saw its cluster.
struct NuisanceEstimates {
  Matrix mu_hat;  // n x L
  Matrix pi_hat;  // n x L, rows sum to 1
  Matrix f_hat;   // n x q
  std::vector<int> fold_of;
};

/// For each fold: random-search tuning on the inner I1 split, joint fit on
/// I1, propensity fit on I2, then out-of-fold prediction.
NuisanceEstimates cross_fit(const CausalDataset& ds,
                            const FoldAssignment& folds,
                            const CrossFitOptions& options,
                            std::uint64_t seed);

}  // namespace gpi
