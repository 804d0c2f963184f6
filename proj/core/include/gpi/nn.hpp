#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gpi/matrix.hpp"
#include "gpi/rng.hpp"

namespace gpi {

enum class Activation { Relu };

struct MlpSpec {
  std::vector<std::size_t> layer_widths;  // input, hidden..., output
  Activation activation = Activation::Relu;
  double dropout_rate = 0.0;
  bool spectral_normalized = false;

  void validate() const;
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  std::size_t n_layers() const { return layer_widths.size() - 1; }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-8;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 10000;
  std::size_t patience = 5;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class ForwardMode { Train, Eval, McDropout };

enum class LossKind { SquaredError, OrdinalAllThreshold };

/// Fixed thresholds for the all-threshold ordinal loss on a scalar-output
/// network; they are loss constants here, not trainable parameters.
struct OrdinalThresholds {
  double delta0 = 0.0;
  double delta1 = 1.0;
};

/// Fully-connected feed-forward network. Hidden layers are ReLU followed by
/// inverted dropout; the output layer is linear. Weight matrices are stored
/// (fan_in x fan_out) so a batch maps as X * W + b.
struct Network {
  MlpSpec spec;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  // One persisted power-iteration vector per layer (length = fan_in), used
  // only when spec.spectral_normalized.
  std::vector<std::vector<double>> power_u;
  Rng dropout_rng{0};

  /// He-uniform initialization; spectral-normalized nets are projected to
  /// unit spectral norm immediately so the constraint holds from step 0.
  static Network init(const MlpSpec& spec, std::uint64_t seed);

  std::size_t n_parameters() const;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const Network& net);
  void scale(double factor);
};

/// Per-layer records from a train-mode forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<Matrix> inputs;   // input to each layer
  std::vector<Matrix> preacts;  // X*W + b per layer
  std::vector<Matrix> masks;    // dropout masks (already scaled), hidden only
  Matrix output;
};

/// Forward pass using an explicit RNG stream; safe for concurrent readers.
Matrix forward(const Network& net, const Matrix& x, ForwardMode mode, Rng& rng,
               ForwardTrace* trace = nullptr);
/// Forward pass drawing dropout noise from net.dropout_rng.
Matrix forward(Network& net, const Matrix& x, ForwardMode mode,
               ForwardTrace* trace = nullptr);
/// Eval-mode forward; never touches any RNG.
Matrix forward_eval(const Network& net, const Matrix& x);

/// Reverse-mode pass. `grad_output` is dLoss/dOutput for the traced batch.
/// Accumulates parameter gradients into `grads` and returns dLoss/dInput,
/// which lets callers chain networks.
Matrix backward(const Network& net, const ForwardTrace& trace,
                const Matrix& grad_output, Gradients& grads);

/// Mean loss over the batch plus exact gradients for every net parameter.
std::pair<double, Gradients> loss_and_grad(
    Network& net, const Matrix& batch, std::span<const double> targets,
    LossKind loss, const OrdinalThresholds& thresholds = {});

double gradient_norm(const Gradients& grads);
/// Global L2 clipping across one or more gradient sets (joint models clip
/// over all their parts at once). Returns the pre-clip norm.
double clip_gradients(Gradients& grads, double max_norm);
double clip_gradients(std::span<Gradients* const> grads, double max_norm);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;

  static AdamState zeros_like(const Network& net);
};

/// One Adam update with bias correction. Weight decay is decoupled
/// (w -= lr*wd*w before the Adam delta). Spectral-normalized nets are
/// re-projected after the update. `t` is the 1-based step count.
void adam_step(Network& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg, std::size_t t,
               const AdamParams& params = {});

/// One power-iteration update of u against W; returns the current
/// u^T W v estimate of the largest singular value.
double power_step(const Matrix& weight, std::vector<double>& u);

/// Power iteration on W (u has length W.rows): v ~ W^T u, u ~ W v,
/// sigma = u^T W v. W is divided by max(1, sigma) in place; `u` is updated.
/// Returns the sigma estimate (0 for an all-zero matrix, W untouched).
double spectral_normalize(Matrix& weight, std::vector<double>& u,
                          std::size_t iters);

/// Largest singular value by high-iteration power method, for checks.
double spectral_norm_estimate(const Matrix& weight, std::size_t iters = 200);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val = std::numeric_limits<double>::infinity();
};

/// Generic early-stopping epoch loop shared by every trainer in the project.
/// run_epoch(epoch) performs the parameter updates and returns the mean
/// training loss; eval_val() scores the validation slice; snapshot/restore
/// manage best-epoch parameters. Stops once `patience` consecutive epochs
/// fail to improve best_val; restores the best snapshot before returning.
TrainHistory run_early_stopping(
    const TrainConfig& cfg, const std::string& stage,
    const std::function<double(std::size_t)>& run_epoch,
    const std::function<double()>& eval_val,
    const std::function<void()>& snapshot,
    const std::function<void()>& restore);

/// Mini-batch Adam on a single network against (x, y) slices with seeded
/// shuffling; returns the best-validation-epoch network and the history.
std::pair<Network, TrainHistory> train_early_stopping(
    const Network& net, const Matrix& train_x, std::span<const double> train_y,
    const Matrix& val_x, std::span<const double> val_y, const TrainConfig& cfg,
    LossKind loss, const OrdinalThresholds& thresholds = {});

/// Mean loss without gradients (eval mode).
double evaluate_loss(const Network& net, const Matrix& x,
                     std::span<const double> y, LossKind loss,
                     const OrdinalThresholds& thresholds = {});

// Numerically stable pieces shared with other modules.
double sigmoid(double x);
double softplus(double x);       // log(1 + exp(x))
double log_sigmoid(double x);    // -softplus(-x)

/// Deterministic batched row order for one epoch: indices [0, n) shuffled
/// by `rng`, then chunked into consecutive batches of size `batch_size`.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   Rng& rng);

}  // namespace gpi
