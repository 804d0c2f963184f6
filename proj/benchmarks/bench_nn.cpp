#include <benchmark/benchmark.h>

#include "gpi/nn.hpp"

using namespace gpi;

namespace {

Network make_net(std::size_t d_in, std::size_t hidden, bool spectral) {
  MlpSpec spec;
  spec.layer_widths = {d_in, hidden, hidden / 2, 1};
  spec.spectral_normalized = spectral;
  return Network::init(spec, 7);
}

Matrix make_batch(std::size_t rows, std::size_t cols) {
  Matrix x(rows, cols);
  Rng rng(3);
  for (double& v : x.data) v = rng.normal();
  return x;
}

}  // namespace

static void ForwardEval(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Network net = make_net(64, 128, false);
  const Matrix x = make_batch(rows, 64);
  for (auto _ : state) {
    Matrix out = forward_eval(net, x);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(ForwardEval)->Arg(64)->Arg(256)->Arg(1024);

static void LossAndGrad(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Network net = make_net(64, 128, false);
  const Matrix x = make_batch(rows, 64);
  std::vector<double> y(rows, 0.5);
  for (auto _ : state) {
    auto [loss, grads] = loss_and_grad(net, x, y, LossKind::SquaredError);
    benchmark::DoNotOptimize(loss);
    benchmark::DoNotOptimize(grads.weights.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(LossAndGrad)->Arg(64)->Arg(256);

static void AdamStepSpectral(benchmark::State& state) {
  Network net = make_net(64, 128, true);
  AdamState adam = AdamState::zeros_like(net);
  Gradients grads = Gradients::zeros_like(net);
  Rng rng(11);
  for (auto& w : grads.weights) {
    for (double& v : w.data) v = rng.normal() * 0.01;
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  std::size_t t = 0;
  for (auto _ : state) {
    adam_step(net, grads, adam, cfg, ++t);
    benchmark::DoNotOptimize(net.weights.data());
  }
}
BENCHMARK(AdamStepSpectral);

BENCHMARK_MAIN();
