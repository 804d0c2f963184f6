#include "gpi/structural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpi/error.hpp"

namespace gpi {

void PairwiseDataset::validate() const {
  const std::size_t j_count = args.size();
  require(j_count > 0, ErrorKind::Validation, "structural", "no arguments");
  require(args.reps.rows == j_count && args.side.size() == j_count &&
              args.topic.size() == j_count,
          ErrorKind::Dimension, "structural",
          "argument table lengths differ");
  require(all_finite(args.reps), ErrorKind::Validation, "structural",
          "non-finite representation values");
  for (std::size_t j = 0; j < j_count; ++j) {
    require(args.element[j] >= 0 && args.element[j] < kRhetoricalElements,
            ErrorKind::Validation, "structural",
            "rhetorical element out of range at argument " +
                std::to_string(j));
    require(args.side[j] == 0 || args.side[j] == 1, ErrorKind::Validation,
            "structural", "side must be 0/1 at argument " + std::to_string(j));
    require(args.topic[j] >= 0 && args.topic[j] < kPolicyTopics,
            ErrorKind::Validation, "structural",
            "topic out of range at argument " + std::to_string(j));
  }
  for (std::size_t c = 0; c < comparisons.size(); ++c) {
    const Comparison& cmp = comparisons[c];
    require(cmp.j >= 0 && cmp.j_prime >= 0 &&
                static_cast<std::size_t>(cmp.j) < j_count &&
                static_cast<std::size_t>(cmp.j_prime) < j_count,
            ErrorKind::Validation, "structural",
            "comparison " + std::to_string(c) + " references a bad argument");
    require(cmp.y >= 0 && cmp.y <= 2, ErrorKind::Validation, "structural",
            "comparison outcome must be 0, 1 or 2");
    require(args.topic[static_cast<std::size_t>(cmp.j)] ==
                args.topic[static_cast<std::size_t>(cmp.j_prime)],
            ErrorKind::Validation, "structural",
            "comparison " + std::to_string(c) + " mixes topics");
    require(args.side[static_cast<std::size_t>(cmp.j)] !=
                args.side[static_cast<std::size_t>(cmp.j_prime)],
            ErrorKind::Validation, "structural",
            "comparison " + std::to_string(c) + " pairs same-side arguments");
  }
}

double StructuralModel::delta0() const { return -std::exp(eta); }
double StructuralModel::delta1() const { return std::exp(eta); }

namespace {

/// [one-hot element | f] head input for the given per-row elements.
Matrix head_input(std::span<const int> elements, const Matrix& f) {
  Matrix h(f.rows, kRhetoricalElements + f.cols, 0.0);
  for (std::size_t i = 0; i < f.rows; ++i) {
    h(i, static_cast<std::size_t>(elements[i])) = 1.0;
    double* dst = h.row_ptr(i) + kRhetoricalElements;
    const double* src = f.row_ptr(i);
    for (std::size_t j = 0; j < f.cols; ++j) dst[j] = src[j];
  }
  return h;
}

/// dLoss/dmu and dLoss/ddelta_k for one comparison.
struct OrdinalDerivs {
  double loss = 0.0;
  double d_mu = 0.0;
  double d_delta[2] = {0.0, 0.0};
};

OrdinalDerivs ordinal_derivs(double delta0, double delta1, double mu_diff,
                             int y) {
  OrdinalDerivs out;
  const double deltas[2] = {delta0, delta1};
  for (int k = 0; k < 2; ++k) {
    const double a = deltas[k] + mu_diff;
    if (y <= k) {
      out.loss -= log_sigmoid(a);
    } else {
      out.loss -= log_sigmoid(-a);
    }
    const double g = sigmoid(a) - (y <= k ? 1.0 : 0.0);
    out.d_mu += g;
    out.d_delta[k] = g;
  }
  return out;
}

}  // namespace

double ordinal_pair_nll(double delta0, double delta1, double mu_diff, int y) {
  require(delta0 <= delta1, ErrorKind::Validation, "structural",
          "thresholds must be ordered");
  require(y >= 0 && y <= 2, ErrorKind::Validation, "structural",
          "outcome must be 0, 1 or 2");
  return ordinal_derivs(delta0, delta1, mu_diff, y).loss;
}

std::vector<double> StructuralModel::raw_strengths(
    const PairwiseArgs& args) const {
  const Matrix f = forward_eval(deconfounder, args.reps);
  const Matrix out = forward_eval(strength_head, head_input(args.element, f));
  return {out.data.begin(), out.data.end()};
}

std::vector<double> StructuralModel::strengths(const PairwiseArgs& args) const {
  std::vector<double> mu = raw_strengths(args);
  for (double& v : mu) v -= demean_offset;
  return mu;
}

namespace {

struct PairBatch {
  Matrix reps;                // 2B x d_r (j rows then j' rows)
  std::vector<int> elements;  // 2B
  std::vector<int> outcomes;  // B
};

PairBatch gather_pair_batch(const PairwiseDataset& data,
                            std::span<const std::size_t> indices) {
  const std::size_t b = indices.size();
  PairBatch batch;
  std::vector<int> rows(2 * b);
  batch.elements.resize(2 * b);
  batch.outcomes.resize(b);
  for (std::size_t c = 0; c < b; ++c) {
    const Comparison& cmp = data.comparisons[indices[c]];
    rows[c] = cmp.j;
    rows[b + c] = cmp.j_prime;
    batch.elements[c] = data.args.element[static_cast<std::size_t>(cmp.j)];
    batch.elements[b + c] =
        data.args.element[static_cast<std::size_t>(cmp.j_prime)];
    batch.outcomes[c] = cmp.y;
  }
  batch.reps = data.args.reps.gather_rows(rows);
  return batch;
}

double eval_pair_loss(const StructuralModel& model, const PairwiseDataset& data,
                      std::span<const std::size_t> indices) {
  const PairBatch batch = gather_pair_batch(data, indices);
  const std::size_t b = indices.size();
  const Matrix f = forward_eval(model.deconfounder, batch.reps);
  const Matrix out =
      forward_eval(model.strength_head, head_input(batch.elements, f));
  double total = 0.0;
  for (std::size_t c = 0; c < b; ++c) {
    const double mu_diff = out.data[c] - out.data[b + c];
    total += ordinal_derivs(model.delta0(), model.delta1(), mu_diff,
                            batch.outcomes[c])
                 .loss;
  }
  return total / static_cast<double>(b);
}

}  // namespace

std::pair<double, StructuralGradients> ordinal_pair_loss(
    StructuralModel& model, const PairwiseDataset& data,
    std::span<const std::size_t> comparison_indices) {
  require(!comparison_indices.empty(), ErrorKind::Validation,
          "structural.ordinal_pair_loss", "empty batch");
  const std::size_t b = comparison_indices.size();
  const PairBatch batch = gather_pair_batch(data, comparison_indices);

  ForwardTrace deconf_trace;
  const Matrix f = forward(model.deconfounder, batch.reps, ForwardMode::Train,
                           &deconf_trace);
  ForwardTrace head_trace;
  const Matrix out = forward(model.strength_head,
                             head_input(batch.elements, f), ForwardMode::Train,
                             &head_trace);

  const double delta0 = model.delta0();
  const double delta1 = model.delta1();
  double total = 0.0;
  double d_delta0 = 0.0, d_delta1 = 0.0;
  Matrix dout(out.rows, 1, 0.0);
  const double inv = 1.0 / static_cast<double>(b);
  for (std::size_t c = 0; c < b; ++c) {
    const double mu_diff = out.data[c] - out.data[b + c];
    const OrdinalDerivs d =
        ordinal_derivs(delta0, delta1, mu_diff, batch.outcomes[c]);
    total += d.loss;
    dout.data[c] += d.d_mu * inv;
    dout.data[b + c] -= d.d_mu * inv;
    d_delta0 += d.d_delta[0] * inv;
    d_delta1 += d.d_delta[1] * inv;
  }

  StructuralGradients grads;
  grads.strength_head = Gradients::zeros_like(model.strength_head);
  grads.deconfounder = Gradients::zeros_like(model.deconfounder);
  const Matrix dh =
      backward(model.strength_head, head_trace, dout, grads.strength_head);
  Matrix df(dh.rows, f.cols);
  for (std::size_t i = 0; i < dh.rows; ++i) {
    const double* src = dh.row_ptr(i) + kRhetoricalElements;
    double* dst = df.row_ptr(i);
    for (std::size_t j = 0; j < f.cols; ++j) dst[j] = src[j];
  }
  backward(model.deconfounder, deconf_trace, df, grads.deconfounder);
  // delta0 = -exp(eta), delta1 = +exp(eta)
  grads.d_eta = (d_delta1 - d_delta0) * std::exp(model.eta);
  return {total * inv, std::move(grads)};
}

StructuralModel fit_structural(const PairwiseDataset& data,
                               const StructuralSpec& spec,
                               const TrainConfig& cfg, TrainHistory* history) {
  data.validate();
  {
    std::vector<bool> present(kRhetoricalElements, false);
    for (int e : data.args.element) present[static_cast<std::size_t>(e)] = true;
    for (int e = 0; e < kRhetoricalElements; ++e) {
      require(present[static_cast<std::size_t>(e)], ErrorKind::Coverage,
              "structural.fit",
              "rhetorical element " + std::to_string(e) +
                  " appears in no argument");
    }
  }
  require(data.comparisons.size() >= 5, ErrorKind::Validation,
          "structural.fit", "too few comparisons to fit");

  MlpSpec deconf_spec;
  deconf_spec.layer_widths.push_back(data.args.reps.cols);
  for (std::size_t w : spec.deconfounder_hidden) {
    deconf_spec.layer_widths.push_back(w);
  }
  deconf_spec.layer_widths.push_back(spec.deconfounder_out_dim);
  deconf_spec.dropout_rate = spec.dropout;

  MlpSpec head_spec;
  head_spec.layer_widths = {kRhetoricalElements + spec.deconfounder_out_dim,
                            spec.head_hidden, 1};
  head_spec.dropout_rate = spec.dropout;

  StructuralModel current;
  current.deconfounder =
      Network::init(deconf_spec, mix_seed(cfg.seed, 0xdecfu));
  current.strength_head = Network::init(head_spec, mix_seed(cfg.seed, 0x5feau));
  current.eta = std::log(0.5);
  StructuralModel best = current;

  AdamState deconf_adam = AdamState::zeros_like(current.deconfounder);
  AdamState head_adam = AdamState::zeros_like(current.strength_head);
  double eta_m = 0.0, eta_v = 0.0;
  const AdamParams adam_params;

  // 20% tail of the seed-shuffled comparisons is the validation slice.
  std::vector<std::size_t> order(data.comparisons.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(cfg.seed, 0x7376u));
  split_rng.shuffle(order);
  const std::size_t n_val = std::max<std::size_t>(1, order.size() / 5);
  std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val),
                                   order.end());
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.end() - static_cast<std::ptrdiff_t>(n_val));

  Rng shuffle_rng(mix_seed(cfg.seed, 0x7368u));
  std::size_t step = 0;

  auto run_epoch = [&](std::size_t) {
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& batch :
         make_batches(train_idx.size(), cfg.batch_size, shuffle_rng)) {
      std::vector<std::size_t> comp_ids(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        comp_ids[i] = train_idx[batch[i]];
      }
      auto [loss, grads] = ordinal_pair_loss(current, data, comp_ids);

      // Global clip over both networks and the threshold parameter.
      double sq = grads.d_eta * grads.d_eta;
      sq += gradient_norm(grads.deconfounder) * gradient_norm(grads.deconfounder);
      sq += gradient_norm(grads.strength_head) * gradient_norm(grads.strength_head);
      const double norm = std::sqrt(sq);
      if (norm > cfg.clip_norm) {
        const double factor = cfg.clip_norm / norm;
        grads.deconfounder.scale(factor);
        grads.strength_head.scale(factor);
        grads.d_eta *= factor;
      }

      ++step;
      adam_step(current.deconfounder, grads.deconfounder, deconf_adam, cfg,
                step, adam_params);
      adam_step(current.strength_head, grads.strength_head, head_adam, cfg,
                step, adam_params);
      // Thresholds are not regularized; only the networks see weight decay.
      eta_m = adam_params.beta1 * eta_m + (1.0 - adam_params.beta1) * grads.d_eta;
      eta_v = adam_params.beta2 * eta_v +
              (1.0 - adam_params.beta2) * grads.d_eta * grads.d_eta;
      const double bc1 = 1.0 - std::pow(adam_params.beta1,
                                        static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(adam_params.beta2,
                                        static_cast<double>(step));
      current.eta -= cfg.learning_rate * (eta_m / bc1) /
                     (std::sqrt(eta_v / bc2) + adam_params.epsilon);

      total += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    return total / static_cast<double>(seen);
  };
  auto eval_val = [&] { return eval_pair_loss(current, data, val_idx); };

  TrainHistory hist = run_early_stopping(
      cfg, "structural.fit", run_epoch, eval_val, [&] { best = current; },
      [&] { current = best; });

  // Identification by demeaning: the mean fitted strength over arguments is
  // exactly zero after subtracting the offset.
  const std::vector<double> mu = current.raw_strengths(data.args);
  current.demean_offset =
      std::accumulate(mu.begin(), mu.end(), 0.0) /
      static_cast<double>(mu.size());
  if (history) *history = std::move(hist);
  return current;
}

double estimate_beta(const StructuralModel& model, const PairwiseDataset& data,
                     int element) {
  require(element >= 0 && element < kRhetoricalElements, ErrorKind::Validation,
          "structural.estimate_beta", "element out of range");
  const Matrix f = forward_eval(model.deconfounder, data.args.reps);
  std::vector<int> forced(f.rows, element);
  const Matrix out =
      forward_eval(model.strength_head, head_input(forced, f));
  const double mean =
      std::accumulate(out.data.begin(), out.data.end(), 0.0) /
      static_cast<double>(out.rows);
  return mean - model.demean_offset;
}

namespace {

double percentile_type7(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  const double upper = lo + 1 < n ? sorted[lo + 1] : sorted[lo];
  return sorted[lo] + frac * (upper - sorted[lo]);
}

}  // namespace

PersuasivenessEstimate mc_dropout_ci(const StructuralModel& model,
                                     const PairwiseDataset& data,
                                     std::size_t samples, std::uint64_t seed) {
  require(samples >= 1, ErrorKind::Config, "structural.mc_dropout",
          "samples must be >= 1");
  const std::size_t j_count = data.args.size();

  Matrix draws(samples, kRhetoricalElements);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng(mix_seed(seed, 0x6d63u, s));
    // One deconfounder realization per draw, shared across elements.
    const Matrix f = forward(model.deconfounder, data.args.reps,
                             ForwardMode::McDropout, rng);
    const Matrix observed = forward(
        model.strength_head, head_input(data.args.element, f),
        ForwardMode::McDropout, rng);
    const double offset =
        std::accumulate(observed.data.begin(), observed.data.end(), 0.0) /
        static_cast<double>(j_count);
    for (int t = 0; t < kRhetoricalElements; ++t) {
      std::vector<int> forced(j_count, t);
      const Matrix out = forward(model.strength_head, head_input(forced, f),
                                 ForwardMode::McDropout, rng);
      const double mean =
          std::accumulate(out.data.begin(), out.data.end(), 0.0) /
          static_cast<double>(j_count);
      draws(s, static_cast<std::size_t>(t)) = mean - offset;
    }
  }

  PersuasivenessEstimate est;
  est.mc_samples = samples;
  est.beta.resize(kRhetoricalElements);
  est.ci95.resize(kRhetoricalElements);
  for (int t = 0; t < kRhetoricalElements; ++t) {
    std::vector<double> column(samples);
    for (std::size_t s = 0; s < samples; ++s) {
      column[s] = draws(s, static_cast<std::size_t>(t));
    }
    est.beta[static_cast<std::size_t>(t)] =
        std::accumulate(column.begin(), column.end(), 0.0) /
        static_cast<double>(samples);
    std::sort(column.begin(), column.end());
    est.ci95[static_cast<std::size_t>(t)] = {
        percentile_type7(column, 0.025), percentile_type7(column, 0.975)};
  }
  return est;
}

}  // namespace gpi
