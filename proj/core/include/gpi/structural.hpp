#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gpi/matrix.hpp"
#include "gpi/nn.hpp"

namespace gpi {

inline constexpr int kRhetoricalElements = 14;
inline constexpr int kPolicyTopics = 12;

/// Argument-level table: representation row, rhetorical element, side and
/// topic per argument.
struct PairwiseArgs {
  Matrix reps;                // J x d_r
  std::vector<int> element;   // 0..13
  std::vector<int> side;      // 0/1
  std::vector<int> topic;     // 0..11

  std::size_t size() const { return element.size(); }
};

struct Comparison {
  int respondent = 0;
  int j = 0;
  int j_prime = 0;
  int y = 0;  // 0: j more persuasive, 1: equal, 2: j' more persuasive
};

struct PairwiseDataset {
  PairwiseArgs args;
  std::vector<Comparison> comparisons;

  void validate() const;
};

/// Deconfounder + strength head mu(t, f(R)) with symmetric ordinal
/// thresholds -exp(eta), +exp(eta). The symmetric parameterization keeps the
/// likelihood invariant under swapping an argument pair and reversing its
/// label, and keeps the thresholds ordered without constraints.
struct StructuralModel {
  Network deconfounder;
  Network strength_head;  // input [one-hot element (14) | f(R)] -> scalar
  double eta = 0.0;
  double demean_offset = 0.0;

  double delta0() const;
  double delta1() const;

  /// Eval-mode strengths mu(T_j, f(R_j)) for all arguments, not demeaned.
  std::vector<double> raw_strengths(const PairwiseArgs& args) const;
  /// Demeaned strengths (raw - demean_offset).
  std::vector<double> strengths(const PairwiseArgs& args) const;
};

/// Negative log-likelihood of one ordinal comparison under the cumulative
/// logit model with thresholds (delta0 <= delta1) and strength difference
/// mu_diff = mu_j - mu_j'.
double ordinal_pair_nll(double delta0, double delta1, double mu_diff, int y);

struct StructuralGradients {
  Gradients deconfounder;
  Gradients strength_head;
  double d_eta = 0.0;
};

/// Mean ordinal loss over a batch of comparisons plus exact gradients for
/// the deconfounder, the strength head and the threshold parameter.
std::pair<double, StructuralGradients> ordinal_pair_loss(
    StructuralModel& model, const PairwiseDataset& data,
    std::span<const std::size_t> comparison_indices);

struct StructuralSpec {
  std::vector<std::size_t> deconfounder_hidden = {256, 128};
  std::size_t deconfounder_out_dim = 64;
  std::size_t head_hidden = 50;
  double dropout = 0.1;
};

/// Fits the semiparametric pairwise model with mini-batch Adam, gradient
/// clipping and early stopping, then sets demean_offset so the mean fitted
/// strength over arguments is exactly zero.
StructuralModel fit_structural(const PairwiseDataset& data,
                               const StructuralSpec& spec,
                               const TrainConfig& cfg,
                               TrainHistory* history = nullptr);

/// (1/J) sum_j mu(t, f(R_j)) - demean_offset, eval mode.
double estimate_beta(const StructuralModel& model, const PairwiseDataset& data,
                     int element);

struct PersuasivenessEstimate {
  std::vector<double> beta;                  // kRhetoricalElements
  std::vector<std::array<double, 2>> ci95;   // empirical 2.5/97.5 percentiles
  std::size_t mc_samples = 0;
};

/// Monte Carlo dropout: `samples` stochastic forward passes at fixed
/// weights; each draw is demeaned with its own offset. Points are the
/// per-element draw means.
PersuasivenessEstimate mc_dropout_ci(const StructuralModel& model,
                                     const PairwiseDataset& data,
                                     std::size_t samples, std::uint64_t seed);

}  // namespace gpi
