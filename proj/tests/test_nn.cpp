#include "gpi/nn.hpp"

#include <cmath>

#include "doctest.h"
#include "gpi/error.hpp"
#include "gradcheck_util.hpp"

using namespace gpi;

namespace {

Network tiny_net(std::vector<std::size_t> widths, std::uint64_t seed,
                 double dropout = 0.0, bool spectral = false) {
  MlpSpec spec;
  spec.layer_widths = std::move(widths);
  spec.dropout_rate = dropout;
  spec.spectral_normalized = spectral;
  return Network::init(spec, seed);
}

Matrix single_row(std::initializer_list<double> values) {
  Matrix m(1, values.size());
  std::size_t j = 0;
  for (double v : values) m(0, j++) = v;
  return m;
}

}  // namespace

TEST_CASE("zero network maps any input to zero") {
  Network net = tiny_net({3, 4, 2}, 7);
  for (auto& w : net.weights) {
    for (double& v : w.data) v = 0.0;
  }
  Matrix x(5, 3);
  Rng rng(3);
  for (double& v : x.data) v = rng.normal();
  const Matrix out = forward_eval(net, x);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("dropout disabled: train and eval forwards agree") {
  Network net = tiny_net({4, 8, 1}, 11, 0.0);
  Matrix x(6, 4);
  Rng rng(5);
  for (double& v : x.data) v = rng.normal();
  const Matrix train_out = forward(net, x, ForwardMode::Train);
  const Matrix eval_out = forward_eval(net, x);
  for (std::size_t i = 0; i < train_out.data.size(); ++i) {
    CHECK(train_out.data[i] == eval_out.data[i]);
  }
}

TEST_CASE("hand-evaluated two-layer composition") {
  Network net = tiny_net({1, 1, 1}, 0);
  net.weights[0](0, 0) = 2.0;
  net.biases[0][0] = -1.0;
  net.weights[1](0, 0) = 3.0;
  net.biases[1][0] = 0.0;
  CHECK(forward_eval(net, single_row({1.0})).data[0] == doctest::Approx(3.0));
  CHECK(forward_eval(net, single_row({0.0})).data[0] == doctest::Approx(0.0));
}

TEST_CASE("forward rejects shape mismatch and non-finite input") {
  Network net = tiny_net({3, 4, 1}, 1);
  Matrix bad_shape(2, 2, 0.0);
  CHECK_THROWS_AS(forward_eval(net, bad_shape), Error);
  Matrix bad_value(1, 3, 0.0);
  bad_value(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward_eval(net, bad_value), Error);
}

TEST_CASE("squared error: perfect fit gives zero loss and output grads") {
  Network net = tiny_net({2, 3, 1}, 13);
  Matrix x(4, 2);
  Rng rng(17);
  for (double& v : x.data) v = rng.normal();
  const Matrix preds = forward_eval(net, x);
  std::vector<double> y(preds.data.begin(), preds.data.end());
  auto [loss, grads] = loss_and_grad(net, x, y, LossKind::SquaredError);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : grads.weights.back().data) {
    CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("squared error single sample value") {
  // prediction 2, target 0 -> loss 4
  Network net = tiny_net({1, 1, 1}, 0);
  net.weights[0](0, 0) = 1.0;
  net.biases[0][0] = 1.0;  // relu(x + 1)
  net.weights[1](0, 0) = 1.0;
  net.biases[1][0] = 0.0;
  const double loss =
      loss_and_grad(net, single_row({1.0}), std::vector<double>{0.0},
                    LossKind::SquaredError)
          .first;
  CHECK(loss == doctest::Approx(4.0));
}

TEST_CASE("gradients match central finite differences for both losses") {
  Rng meta(2024);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t hidden1 = 2 + meta.index(14);
    const std::size_t hidden2 = 2 + meta.index(14);
    const std::size_t inputs = 1 + meta.index(6);
    std::vector<std::size_t> widths = rep % 2 == 0
        ? std::vector<std::size_t>{inputs, hidden1, 1}
        : std::vector<std::size_t>{inputs, hidden1, hidden2, 1};
    Network net = tiny_net(widths, 1000 + static_cast<std::uint64_t>(rep));

    Matrix x(5, inputs);
    for (double& v : x.data) v = meta.normal();
    std::vector<double> y_sq(5), y_ord(5);
    for (auto& v : y_sq) v = meta.normal();
    for (auto& v : y_ord) v = static_cast<double>(meta.index(3));

    CHECK(gradcheck(net, x, y_sq, LossKind::SquaredError) < 1e-4);
    OrdinalThresholds th{-0.4, 0.7};
    CHECK(gradcheck(net, x, y_ord, LossKind::OrdinalAllThreshold, th) < 1e-4);
  }
}

TEST_CASE("adam: zero gradients with zero decay is a fixed point") {
  Network net = tiny_net({2, 3, 1}, 5);
  const Network before = net;
  Gradients grads = Gradients::zeros_like(net);
  AdamState state = AdamState::zeros_like(net);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  adam_step(net, grads, state, cfg, 1);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.weights[l].data.size(); ++i) {
      CHECK(net.weights[l].data[i] == before.weights[l].data[i]);
    }
  }
}

TEST_CASE("adam: bias-corrected first step moves by ~ -lr * sign(g)") {
  Network net = tiny_net({1, 1}, 5);  // single linear layer
  net.weights[0](0, 0) = 0.0;
  Gradients grads = Gradients::zeros_like(net);
  grads.weights[0](0, 0) = 1.0;
  AdamState state = AdamState::zeros_like(net);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  adam_step(net, grads, state, cfg, 1);
  CHECK(net.weights[0](0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("adam: decay-only step") {
  Network net = tiny_net({1, 1}, 5);
  net.weights[0](0, 0) = 1.0;
  Gradients grads = Gradients::zeros_like(net);
  AdamState state = AdamState::zeros_like(net);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 1e-8;
  adam_step(net, grads, state, cfg, 1);
  CHECK(net.weights[0](0, 0) == 1.0 - 0.05 * 1e-8);
}

TEST_CASE("gradient clipping") {
  Network net = tiny_net({2, 1}, 5);
  Gradients grads = Gradients::zeros_like(net);

  SUBCASE("under threshold is untouched") {
    grads.weights[0](0, 0) = 0.3;
    grads.weights[0](1, 0) = 0.4;  // norm 0.5
    clip_gradients(grads, 1.0);
    CHECK(grads.weights[0](0, 0) == 0.3);
    CHECK(grads.weights[0](1, 0) == 0.4);
  }
  SUBCASE("norm-5 vector scales to the unit ball") {
    grads.weights[0](0, 0) = 3.0;
    grads.weights[0](1, 0) = 4.0;
    const double pre = clip_gradients(grads, 1.0);
    CHECK(pre == doctest::Approx(5.0));
    CHECK(grads.weights[0](0, 0) == doctest::Approx(0.6));
    CHECK(grads.weights[0](1, 0) == doctest::Approx(0.8));
    CHECK(gradient_norm(grads) <= 1.0 + 1e-12);
  }
  SUBCASE("all-zero stays zero") {
    clip_gradients(grads, 1.0);
    for (double v : grads.weights[0].data) CHECK(v == 0.0);
  }
}

TEST_CASE("spectral normalization") {
  SUBCASE("identity matrix is already unit-norm") {
    Matrix w(2, 2, 0.0);
    w(0, 0) = w(1, 1) = 1.0;
    std::vector<double> u = {1.0, 0.0};
    const double sigma = spectral_normalize(w, u, 10);
    CHECK(sigma == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(w(0, 0) == doctest::Approx(1.0));
    CHECK(w(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("diag(4,1) divides down to diag(1,0.25)") {
    Matrix w(2, 2, 0.0);
    w(0, 0) = 4.0;
    w(1, 1) = 1.0;
    std::vector<double> u = {0.6, 0.8};
    const double sigma = spectral_normalize(w, u, 50);
    CHECK(sigma == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(w(1, 1) == doctest::Approx(0.25).epsilon(1e-6));
  }
  SUBCASE("already contractive matrices are untouched") {
    Matrix w(2, 2, 0.0);
    w(0, 0) = 0.5;
    w(1, 1) = 0.2;
    std::vector<double> u = {1.0, 0.0};
    spectral_normalize(w, u, 50);
    CHECK(w(0, 0) == doctest::Approx(0.5));
    CHECK(w(1, 1) == doctest::Approx(0.2));
  }
  SUBCASE("zero matrix reports sigma 0 and stays put") {
    Matrix w(3, 2, 0.0);
    std::vector<double> u = {1.0, 0.0, 0.0};
    CHECK(spectral_normalize(w, u, 5) == 0.0);
    for (double v : w.data) CHECK(v == 0.0);
  }
}

TEST_CASE("spectral bound holds after adam steps (true singular value)") {
  MlpSpec spec;
  spec.layer_widths = {6, 8, 4, 2};
  spec.spectral_normalized = true;
  Network net = Network::init(spec, 99);
  AdamState state = AdamState::zeros_like(net);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;  // aggressive steps to stress the projection
  cfg.weight_decay = 0.0;
  Rng rng(123);
  for (std::size_t t = 1; t <= 60; ++t) {
    Gradients grads = Gradients::zeros_like(net);
    for (auto& w : grads.weights) {
      for (double& v : w.data) v = rng.normal();
    }
    clip_gradients(grads, 1.0);
    adam_step(net, grads, state, cfg, t);
    for (const auto& w : net.weights) {
      CHECK(spectral_norm_estimate(w, 200) <= 1.0 + 1e-3);
    }
  }
}

TEST_CASE("inverted dropout: train-mode expectation matches eval activations") {
  Network net = tiny_net({3, 16, 1}, 21, 0.4);
  Matrix x(1, 3);
  x(0, 0) = 0.7;
  x(0, 1) = -0.2;
  x(0, 2) = 1.1;
  const double eval_out = forward_eval(net, x).data[0];

  Rng rng(777);
  const int n_masks = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < n_masks; ++s) {
    const double v = forward(net, x, ForwardMode::McDropout, rng).data[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n_masks;
  const double var = sum_sq / n_masks - mean * mean;
  const double se = std::sqrt(var / n_masks);
  CHECK(std::abs(mean - eval_out) <= 3.0 * se + 1e-12);
}

TEST_CASE("early stopping on strictly worsening validation loss") {
  // Linear 1->1 model: training pushes w upward, validation wants w at 0,
  // so the validation loss strictly increases from epoch 1.
  Network net = tiny_net({1, 1}, 3);
  net.weights[0](0, 0) = 1.0;
  net.biases[0][0] = 0.0;
  Matrix train_x(1, 1);
  train_x(0, 0) = 1.0;
  std::vector<double> train_y = {10.0};
  Matrix val_x(1, 1);
  val_x(0, 0) = 1.0;
  std::vector<double> val_y = {0.0};
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  cfg.batch_size = 1;
  cfg.max_epochs = 50;
  cfg.patience = 1;
  cfg.seed = 9;
  auto [fitted, history] = train_early_stopping(
      net, train_x, train_y, val_x, val_y, cfg, LossKind::SquaredError);
  CHECK(history.epochs.size() == 2);
  CHECK(history.best_epoch == 1);
  const double val_at_returned =
      evaluate_loss(fitted, val_x, val_y, LossKind::SquaredError);
  CHECK(val_at_returned == doctest::Approx(history.epochs[0].val_loss));
}

TEST_CASE("max_epochs = 0 returns the initial network and empty history") {
  Network net = tiny_net({2, 4, 1}, 31);
  Matrix x(3, 2, 0.5);
  std::vector<double> y = {0.0, 1.0, 2.0};
  TrainConfig cfg;
  cfg.max_epochs = 0;
  cfg.patience = 0;
  auto [fitted, history] = train_early_stopping(net, x, y, x, y, cfg,
                                                LossKind::SquaredError);
  CHECK(history.epochs.empty());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.weights[l].data.size(); ++i) {
      CHECK(fitted.weights[l].data[i] == net.weights[l].data[i]);
    }
  }
}

TEST_CASE("training is bit-identical across repeated runs with one seed") {
  Rng rng(55);
  Matrix x(40, 3);
  for (double& v : x.data) v = rng.normal();
  std::vector<double> y(40);
  for (auto& v : y) v = rng.normal();
  Matrix vx(10, 3);
  for (double& v : vx.data) v = rng.normal();
  std::vector<double> vy(10);
  for (auto& v : vy) v = rng.normal();

  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 8;
  cfg.max_epochs = 20;
  cfg.patience = 5;
  cfg.seed = 42;

  Network net = tiny_net({3, 8, 1}, 17, 0.2);
  auto [m1, h1] =
      train_early_stopping(net, x, y, vx, vy, cfg, LossKind::SquaredError);
  auto [m2, h2] =
      train_early_stopping(net, x, y, vx, vy, cfg, LossKind::SquaredError);
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
    CHECK(h1.epochs[e].train_loss == h2.epochs[e].train_loss);
    CHECK(h1.epochs[e].val_loss == h2.epochs[e].val_loss);
  }
  for (std::size_t l = 0; l < m1.weights.size(); ++l) {
    for (std::size_t i = 0; i < m1.weights[l].data.size(); ++i) {
      CHECK(m1.weights[l].data[i] == m2.weights[l].data[i]);
    }
  }
}

TEST_CASE("diverging training raises a training-diverged error") {
  Network net = tiny_net({1, 1}, 3);
  net.weights[0](0, 0) = 1e200;
  Matrix x(2, 1);
  x(0, 0) = 1e200;
  x(1, 0) = 1e200;
  std::vector<double> y = {0.0, 0.0};
  TrainConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  try {
    train_early_stopping(net, x, y, x, y, cfg, LossKind::SquaredError);
    FAIL("expected training-diverged error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TrainingDiverged);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}
