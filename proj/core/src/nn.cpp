#include "gpi/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "gpi/error.hpp"

namespace gpi {

void MlpSpec::validate() const {
  require(layer_widths.size() >= 2, ErrorKind::Config, "nn",
          "MlpSpec needs at least input and output widths");
  for (std::size_t w : layer_widths) {
    require(w > 0, ErrorKind::Config, "nn", "layer widths must be positive");
  }
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::Config, "nn",
          "dropout_rate must lie in [0, 1)");
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, ErrorKind::Config, "nn",
          "learning_rate must be positive");
  require(weight_decay >= 0.0, ErrorKind::Config, "nn",
          "weight_decay must be nonnegative");
  require(batch_size >= 1, ErrorKind::Config, "nn", "batch_size must be >= 1");
  require(patience <= max_epochs, ErrorKind::Config, "nn",
          "patience must not exceed max_epochs");
  require(clip_norm > 0.0, ErrorKind::Config, "nn",
          "clip_norm must be positive");
}

Network Network::init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec = spec;
  net.dropout_rng = Rng(mix_seed(seed, 0x6472u));  // dropout stream
  Rng init_rng(mix_seed(seed, 0x696eu));
  const std::size_t layers = spec.n_layers();
  net.weights.reserve(layers);
  net.biases.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = spec.layer_widths[l];
    const std::size_t fan_out = spec.layer_widths[l + 1];
    Matrix w(fan_in, fan_out);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : w.data) v = init_rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  if (spec.spectral_normalized) {
    net.power_u.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      auto& u = net.power_u[l];
      u.resize(net.weights[l].rows);
      for (double& v : u) v = init_rng.normal();
      const double norm = l2_norm(u);
      for (double& v : u) v /= norm;
      // Burn-in so the persisted vector starts converged.
      spectral_normalize(net.weights[l], u, 30);
    }
  }
  return net;
}

std::size_t Network::n_parameters() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    total += weights[l].data.size() + biases[l].size();
  }
  return total;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  g.weights.reserve(net.weights.size());
  g.biases.reserve(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(net.weights[l].rows, net.weights[l].cols, 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

void Gradients::scale(double factor) {
  for (auto& w : weights) {
    for (double& v : w.data) v *= factor;
  }
  for (auto& b : biases) {
    for (double& v : b) v *= factor;
  }
}

namespace {

Matrix forward_impl(const Network& net, const Matrix& x, ForwardMode mode,
                    Rng* rng, ForwardTrace* trace) {
  require(x.cols == net.spec.input_width(), ErrorKind::Dimension, "nn",
          "forward: input width " + std::to_string(x.cols) +
              " does not match spec input " +
              std::to_string(net.spec.input_width()));
  require(all_finite(x), ErrorKind::Validation, "nn",
          "forward: non-finite input");

  const std::size_t layers = net.spec.n_layers();
  const double p = net.spec.dropout_rate;
  const bool drop = p > 0.0 && mode != ForwardMode::Eval;
  if (trace) {
    trace->inputs.clear();
    trace->preacts.clear();
    trace->masks.clear();
  }

  Matrix current = x;
  for (std::size_t l = 0; l < layers; ++l) {
    if (trace) trace->inputs.push_back(current);
    Matrix z = matmul(current, net.weights[l]);
    add_row_inplace(z, net.biases[l]);
    if (trace) trace->preacts.push_back(z);
    if (l + 1 < layers) {
      // Hidden layer: ReLU then inverted dropout.
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
      if (drop) {
        const double keep = 1.0 - p;
        Matrix mask(z.rows, z.cols);
        for (std::size_t i = 0; i < mask.data.size(); ++i) {
          mask.data[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          z.data[i] *= mask.data[i];
        }
        if (trace) trace->masks.push_back(std::move(mask));
      } else if (trace) {
        trace->masks.emplace_back();
      }
    }
    current = std::move(z);
  }
  if (trace) trace->output = current;
  return current;
}

}  // namespace

Matrix forward(const Network& net, const Matrix& x, ForwardMode mode, Rng& rng,
               ForwardTrace* trace) {
  return forward_impl(net, x, mode, &rng, trace);
}

Matrix forward(Network& net, const Matrix& x, ForwardMode mode,
               ForwardTrace* trace) {
  return forward_impl(net, x, mode, &net.dropout_rng, trace);
}

Matrix forward_eval(const Network& net, const Matrix& x) {
  return forward_impl(net, x, ForwardMode::Eval, nullptr, nullptr);
}

Matrix backward(const Network& net, const ForwardTrace& trace,
                const Matrix& grad_output, Gradients& grads) {
  const std::size_t layers = net.spec.n_layers();
  require(trace.inputs.size() == layers, ErrorKind::Dimension, "nn",
          "backward: trace does not match network depth");
  Matrix dz = grad_output;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      // dz arriving here is d(activation out); undo dropout and ReLU.
      const Matrix& mask = trace.masks[l];
      const Matrix& pre = trace.preacts[l];
      if (!mask.empty()) {
        for (std::size_t i = 0; i < dz.data.size(); ++i) {
          dz.data[i] *= mask.data[i];
        }
      }
      for (std::size_t i = 0; i < dz.data.size(); ++i) {
        if (pre.data[i] <= 0.0) dz.data[i] = 0.0;
      }
    }
    // dW = X^T dz, db = colsum(dz), dX = dz W^T
    Matrix dw = matmul_tn(trace.inputs[l], dz);
    for (std::size_t i = 0; i < dw.data.size(); ++i) {
      grads.weights[l].data[i] += dw.data[i];
    }
    for (std::size_t i = 0; i < dz.rows; ++i) {
      const double* row = dz.row_ptr(i);
      for (std::size_t j = 0; j < dz.cols; ++j) grads.biases[l][j] += row[j];
    }
    // The layer-0 product is what callers chaining networks consume.
    dz = matmul_nt(dz, net.weights[l]);
  }
  return dz;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_sigmoid(double x) { return -softplus(-x); }

namespace {

/// dLoss/dScore and loss contribution for one ordinal observation with the
/// all-threshold likelihood; y in {0,1,2}.
std::pair<double, double> ordinal_term(double score, int y,
                                       const OrdinalThresholds& th) {
  double loss = 0.0;
  double dscore = 0.0;
  const double deltas[2] = {th.delta0, th.delta1};
  for (int k = 0; k < 2; ++k) {
    const double a = deltas[k] + score;
    if (y <= k) {
      loss -= log_sigmoid(a);
    } else {
      loss -= log_sigmoid(-a);
    }
    dscore += sigmoid(a) - (y <= k ? 1.0 : 0.0);
  }
  return {loss, dscore};
}

}  // namespace

std::pair<double, Gradients> loss_and_grad(Network& net, const Matrix& batch,
                                           std::span<const double> targets,
                                           LossKind loss,
                                           const OrdinalThresholds& th) {
  require(targets.size() == batch.rows, ErrorKind::Dimension, "nn",
          "loss_and_grad: target length does not match batch rows");
  require(net.spec.output_width() == 1, ErrorKind::Dimension, "nn",
          "loss_and_grad: built-in losses expect a scalar output");

  ForwardTrace trace;
  Matrix out = forward(net, batch, ForwardMode::Train, &trace);
  const double n = static_cast<double>(batch.rows);

  double total = 0.0;
  Matrix dout(out.rows, out.cols, 0.0);
  switch (loss) {
    case LossKind::SquaredError:
      for (std::size_t i = 0; i < out.rows; ++i) {
        const double diff = out.data[i] - targets[i];
        total += diff * diff;
        dout.data[i] = 2.0 * diff / n;
      }
      break;
    case LossKind::OrdinalAllThreshold:
      for (std::size_t i = 0; i < out.rows; ++i) {
        const int y = static_cast<int>(targets[i]);
        require(y >= 0 && y <= 2, ErrorKind::Validation, "nn",
                "ordinal loss: target outside {0,1,2}");
        auto [l, d] = ordinal_term(out.data[i], y, th);
        total += l;
        dout.data[i] = d / n;
      }
      break;
    default:
      fail(ErrorKind::Config, "nn", "unknown loss kind");
  }

  Gradients grads = Gradients::zeros_like(net);
  backward(net, trace, dout, grads);
  return {total / n, std::move(grads)};
}

double evaluate_loss(const Network& net, const Matrix& x,
                     std::span<const double> y, LossKind loss,
                     const OrdinalThresholds& th) {
  Matrix out = forward_eval(net, x);
  double total = 0.0;
  switch (loss) {
    case LossKind::SquaredError:
      for (std::size_t i = 0; i < out.rows; ++i) {
        const double diff = out.data[i] - y[i];
        total += diff * diff;
      }
      break;
    case LossKind::OrdinalAllThreshold:
      for (std::size_t i = 0; i < out.rows; ++i) {
        total += ordinal_term(out.data[i], static_cast<int>(y[i]), th).first;
      }
      break;
    default:
      fail(ErrorKind::Config, "nn", "unknown loss kind");
  }
  return total / static_cast<double>(out.rows);
}

double gradient_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& w : grads.weights) {
    for (double v : w.data) sq += v * v;
  }
  for (const auto& b : grads.biases) {
    for (double v : b) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_gradients(Gradients& grads, double max_norm) {
  Gradients* one[] = {&grads};
  return clip_gradients(std::span<Gradients* const>(one, 1), max_norm);
}

double clip_gradients(std::span<Gradients* const> grads, double max_norm) {
  require(max_norm > 0.0, ErrorKind::Config, "nn", "max_norm must be positive");
  double sq = 0.0;
  for (Gradients* g : grads) {
    for (const auto& w : g->weights) {
      for (double v : w.data) sq += v * v;
    }
    for (const auto& b : g->biases) {
      for (double v : b) sq += v * v;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Gradients* g : grads) g->scale(factor);
  }
  return norm;
}

AdamState AdamState::zeros_like(const Network& net) {
  AdamState s;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    s.m_w.emplace_back(net.weights[l].rows, net.weights[l].cols, 0.0);
    s.v_w.emplace_back(net.weights[l].rows, net.weights[l].cols, 0.0);
    s.m_b.emplace_back(net.biases[l].size(), 0.0);
    s.v_b.emplace_back(net.biases[l].size(), 0.0);
  }
  return s;
}

namespace {

void adam_update(std::span<double> w, std::span<const double> g,
                 std::span<double> m, std::span<double> v,
                 const TrainConfig& cfg, const AdamParams& p, double bc1,
                 double bc2) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (cfg.weight_decay > 0.0) {
      w[i] -= cfg.learning_rate * cfg.weight_decay * w[i];
    }
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + p.epsilon);
  }
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg, std::size_t t, const AdamParams& p) {
  require(t >= 1, ErrorKind::Config, "nn", "adam_step: t must be >= 1");
  const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam_update(net.weights[l].data, grads.weights[l].data,
                state.m_w[l].data, state.v_w[l].data, cfg, p, bc1, bc2);
    adam_update(net.biases[l], grads.biases[l], state.m_b[l], state.v_b[l],
                cfg, p, bc1, bc2);
  }
  if (net.spec.spectral_normalized) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      // Warm-started power iteration, run until the estimate stabilizes
      // before projecting: a single iteration can undershoot the true norm
      // right after a parameter move, which would leave sigma > 1.
      double prev = -1.0;
      double sigma = 0.0;
      for (int iter = 0; iter < 60; ++iter) {
        sigma = power_step(net.weights[l], net.power_u[l]);
        if (sigma == 0.0 || std::abs(sigma - prev) <= 1e-12) break;
        prev = sigma;
      }
      if (sigma > 1.0) {
        for (double& x : net.weights[l].data) x /= sigma;
      }
    }
  }
}

namespace {

/// One power-iteration update (v ~ W^T u, u ~ W v); returns u^T W v.
/// Leaves u untouched and returns 0 for an all-zero matrix.
double power_step_impl(const Matrix& weight, std::vector<double>& u) {
  std::vector<double> v = matvec_t(weight, u);
  const double vn = l2_norm(v);
  if (vn == 0.0) return 0.0;
  for (double& x : v) x /= vn;
  std::vector<double> wu = matvec(weight, v);
  const double un = l2_norm(wu);
  if (un == 0.0) return 0.0;
  for (std::size_t i = 0; i < wu.size(); ++i) u[i] = wu[i] / un;
  return dot(u, matvec(weight, v));
}

}  // namespace

double power_step(const Matrix& weight, std::vector<double>& u) {
  return power_step_impl(weight, u);
}

double spectral_normalize(Matrix& weight, std::vector<double>& u,
                          std::size_t iters) {
  require(iters >= 1, ErrorKind::Config, "nn",
          "spectral_normalize: iters must be >= 1");
  require(u.size() == weight.rows, ErrorKind::Dimension, "nn",
          "spectral_normalize: u length must equal weight rows");
  double sigma = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    sigma = power_step_impl(weight, u);
    if (sigma == 0.0) return 0.0;  // zero matrix: sigma 0, W unchanged
  }
  if (sigma > 1.0) {
    for (double& x : weight.data) x /= sigma;
  }
  return sigma;
}

double spectral_norm_estimate(const Matrix& weight, std::size_t iters) {
  std::vector<double> u(weight.rows, 0.0);
  Rng rng(0x5eedULL);
  for (double& x : u) x = rng.normal();
  const double n = l2_norm(u);
  for (double& x : u) x /= n;
  double sigma = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    sigma = power_step_impl(weight, u);
    if (sigma == 0.0) return 0.0;
  }
  return sigma;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

TrainHistory run_early_stopping(
    const TrainConfig& cfg, const std::string& stage,
    const std::function<double(std::size_t)>& run_epoch,
    const std::function<double()>& eval_val,
    const std::function<void()>& snapshot,
    const std::function<void()>& restore) {
  cfg.validate();
  TrainHistory history;
  std::size_t bad_epochs = 0;
  bool have_snapshot = false;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double train_loss = run_epoch(epoch);
    require(std::isfinite(train_loss), ErrorKind::TrainingDiverged, stage,
            "training loss became non-finite at epoch " +
                std::to_string(epoch));
    const double val_loss = eval_val();
    require(std::isfinite(val_loss), ErrorKind::TrainingDiverged, stage,
            "validation loss became non-finite at epoch " +
                std::to_string(epoch));
    history.epochs.push_back({epoch, train_loss, val_loss});
    if (val_loss < history.best_val) {
      history.best_val = val_loss;
      history.best_epoch = epoch;
      snapshot();
      have_snapshot = true;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= cfg.patience) break;
    }
  }
  if (have_snapshot) restore();
  return history;
}

std::pair<Network, TrainHistory> train_early_stopping(
    const Network& net, const Matrix& train_x, std::span<const double> train_y,
    const Matrix& val_x, std::span<const double> val_y, const TrainConfig& cfg,
    LossKind loss, const OrdinalThresholds& th) {
  require(train_x.rows > 0, ErrorKind::Validation, "nn",
          "train_early_stopping: empty training slice");
  require(val_x.rows > 0, ErrorKind::Validation, "nn",
          "train_early_stopping: empty validation slice");

  Network current = net;
  current.dropout_rng = Rng(mix_seed(cfg.seed, 0x7472u));
  Network best = current;
  AdamState adam = AdamState::zeros_like(current);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x7368u));
  std::size_t step = 0;

  auto run_epoch = [&](std::size_t) {
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : make_batches(train_x.rows, cfg.batch_size,
                                          shuffle_rng)) {
      Matrix bx = train_x.gather_rows(std::span<const std::size_t>(batch));
      std::vector<double> by(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) by[i] = train_y[batch[i]];
      auto [l, grads] = loss_and_grad(current, bx, by, loss, th);
      clip_gradients(grads, cfg.clip_norm);
      adam_step(current, grads, adam, cfg, ++step);
      total += l * static_cast<double>(batch.size());
      seen += batch.size();
    }
    return total / static_cast<double>(seen);
  };
  auto eval_val = [&] { return evaluate_loss(current, val_x, val_y, loss, th); };

  TrainHistory history = run_early_stopping(
      cfg, "nn.train", run_epoch, eval_val, [&] { best = current; },
      [&] { current = best; });
  return {std::move(current), std::move(history)};
}

}  // namespace gpi
