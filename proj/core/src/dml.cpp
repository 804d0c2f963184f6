#include "gpi/dml.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gpi/error.hpp"

namespace gpi {

std::string EffectEstimate::estimand_label() const {
  switch (kind) {
    case EstimandKind::Att:
      return "att";
    case EstimandKind::Apo:
      return "apo(" + std::to_string(level_a) + ")";
    case EstimandKind::Contrast:
      return "contrast(" + std::to_string(level_a) + "," +
             std::to_string(level_b) + ")";
  }
  return "unknown";
}

Matrix truncate_propensity(const Matrix& pi_hat, double alpha) {
  require(alpha >= 0.0 && alpha < 0.5, ErrorKind::Config,
          "dml.truncate_propensity", "alpha must lie in [0, 0.5)");
  if (alpha == 0.0) return pi_hat;
  Matrix out = pi_hat;
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* row = out.row_ptr(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < out.cols; ++j) {
      row[j] = std::clamp(row[j], alpha, 1.0 - alpha);
      sum += row[j];
    }
    for (std::size_t j = 0; j < out.cols; ++j) row[j] /= sum;
  }
  return out;
}

double clustered_se(std::span<const double> scores,
                    std::span<const int> cluster) {
  require(scores.size() == cluster.size(), ErrorKind::Dimension,
          "dml.clustered_se", "scores and cluster lengths differ");
  const std::size_t n = scores.size();
  if (n == 0) return 0.0;
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(n);

  int n_clusters = 0;
  for (int c : cluster) n_clusters = std::max(n_clusters, c + 1);
  std::vector<double> group_sum(static_cast<std::size_t>(n_clusters), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    group_sum[static_cast<std::size_t>(cluster[i])] += scores[i] - mean;
  }
  double sq = 0.0;
  for (double g : group_sum) sq += g * g;
  return std::sqrt(sq) / static_cast<double>(n);
}

std::uint64_t estimate_provenance(const CausalDataset& ds,
                                  const NuisanceEstimates& est) {
  // FNV-1a over the structural identifiers of the run.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(ds.n());
  mix(static_cast<std::uint64_t>(ds.n_levels()));
  for (int f : est.fold_of) mix(static_cast<std::uint64_t>(f) + 1);
  for (int c : ds.cluster) mix(static_cast<std::uint64_t>(c) + 1);
  for (double y : ds.y) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(y));
    std::memcpy(&bits, &y, sizeof(bits));
    mix(bits);
  }
  return h;
}

namespace {

void finalize(EffectEstimate& e) {
  e.se_cluster = clustered_se(e.scores, e.cluster);
  e.ci95 = {e.point - kZ975 * e.se_cluster, e.point + kZ975 * e.se_cluster};
  int n_clusters = 0;
  for (int c : e.cluster) n_clusters = std::max(n_clusters, c + 1);
  e.n_clusters = static_cast<std::size_t>(n_clusters);
}

}  // namespace

EffectEstimate estimate_att(const CausalDataset& ds,
                            const NuisanceEstimates& est, double alpha) {
  require(ds.n_levels() == 2, ErrorKind::Validation, "dml.estimate_att",
          "ATT requires a binary treatment");
  require(est.mu_hat.rows == ds.n() && est.pi_hat.rows == ds.n(),
          ErrorKind::Dimension, "dml.estimate_att",
          "nuisance estimates do not match dataset");

  const std::size_t n = ds.n();
  const Matrix pi = truncate_propensity(est.pi_hat, alpha);

  double treated = 0.0;
  for (int t : ds.t) treated += t;
  require(treated > 0.0, ErrorKind::EstimandUndefined, "dml.estimate_att",
          "no treated units");
  const double p_treat = treated / static_cast<double>(n);

  double numerator = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = ds.y[i] - est.mu_hat(i, 0);
    const double pi1 = pi(i, 1);
    if (ds.t[i] == 1) {
      numerator += resid;
    } else {
      numerator -= pi1 * resid / (1.0 - pi1);
    }
  }
  const double tau = numerator / treated;

  EffectEstimate e;
  e.kind = EstimandKind::Att;
  e.point = tau;
  e.truncation_level = alpha;
  e.cluster = ds.cluster;
  e.provenance = estimate_provenance(ds, est);
  e.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = ds.y[i] - est.mu_hat(i, 0);
    const double pi1 = pi(i, 1);
    double psi;
    if (ds.t[i] == 1) {
      psi = (resid - tau) / p_treat;
    } else {
      psi = -pi1 * resid / ((1.0 - pi1) * p_treat);
    }
    e.scores[i] = psi;
  }
  finalize(e);
  return e;
}

EffectEstimate estimate_apo(const CausalDataset& ds,
                            const NuisanceEstimates& est, int level,
                            double alpha) {
  require(level >= 0 && level < ds.n_levels(), ErrorKind::Validation,
          "dml.estimate_apo",
          "treatment level " + std::to_string(level) + " not present");
  const std::size_t n = ds.n();
  const Matrix pi = truncate_propensity(est.pi_hat, alpha);
  const auto lvl = static_cast<std::size_t>(level);

  std::vector<double> summand(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = est.mu_hat(i, lvl);
    double v = mu;
    if (ds.t[i] == level) {
      v += (ds.y[i] - mu) / pi(i, lvl);
    }
    summand[i] = v;
    total += v;
  }
  const double xi = total / static_cast<double>(n);

  EffectEstimate e;
  e.kind = EstimandKind::Apo;
  e.level_a = level;
  e.point = xi;
  e.truncation_level = alpha;
  e.cluster = ds.cluster;
  e.provenance = estimate_provenance(ds, est);
  e.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) e.scores[i] = summand[i] - xi;
  finalize(e);
  return e;
}

EffectEstimate contrast(const EffectEstimate& a, const EffectEstimate& b) {
  require(a.kind == EstimandKind::Apo && b.kind == EstimandKind::Apo,
          ErrorKind::Validation, "dml.contrast",
          "contrast expects two APO estimates");
  require(a.provenance == b.provenance, ErrorKind::Validation, "dml.contrast",
          "estimates come from different datasets or folds");
  require(a.scores.size() == b.scores.size(), ErrorKind::Dimension,
          "dml.contrast", "score lengths differ");

  EffectEstimate e;
  e.kind = EstimandKind::Contrast;
  e.level_a = a.level_a;
  e.level_b = b.level_a;
  e.point = a.point - b.point;
  e.truncation_level = a.truncation_level;
  e.cluster = a.cluster;
  e.provenance = a.provenance;
  e.scores.resize(a.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    e.scores[i] = a.scores[i] - b.scores[i];
  }
  finalize(e);
  return e;
}

}  // namespace gpi
