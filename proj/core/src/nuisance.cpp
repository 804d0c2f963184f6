#include "gpi/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

#include "gpi/error.hpp"

namespace gpi {

MlpSpec JointArchitecture::deconfounder_spec(std::size_t d_r) const {
  MlpSpec spec;
  spec.layer_widths.push_back(d_r);
  for (std::size_t w : deconfounder_hidden) spec.layer_widths.push_back(w);
  spec.layer_widths.push_back(deconfounder_out_dim);
  spec.dropout_rate = dropout;
  return spec;
}

MlpSpec JointArchitecture::head_spec(std::size_t z_dim) const {
  MlpSpec spec;
  spec.layer_widths = {deconfounder_out_dim + z_dim, head_hidden, 1};
  spec.dropout_rate = dropout;
  return spec;
}

Matrix JointNuisanceModel::deconfound(const Matrix& reps) const {
  return forward_eval(deconfounder, reps);
}

Matrix JointNuisanceModel::predict_mu(const Matrix& reps,
                                      const Matrix& z) const {
  const Matrix f = deconfound(reps);
  const Matrix h = hconcat(f, z_std.apply(z));
  Matrix mu(reps.rows, heads.size());
  for (std::size_t t = 0; t < heads.size(); ++t) {
    const Matrix out = forward_eval(heads[t], h);
    for (std::size_t i = 0; i < out.rows; ++i) mu(i, t) = out.data[i];
  }
  return mu;
}

namespace {

/// Seed-shuffled 80/20 split: the 20% tail becomes the validation slice.
std::pair<std::vector<int>, std::vector<int>> split_train_val(
    std::span<const int> rows, std::uint64_t seed) {
  std::vector<int> shuffled(rows.begin(), rows.end());
  Rng rng(mix_seed(seed, 0x7376u));
  rng.shuffle(shuffled);
  const std::size_t n_val = std::max<std::size_t>(1, shuffled.size() / 5);
  require(shuffled.size() > n_val, ErrorKind::Validation, "nuisance",
          "too few rows for a train/validation split");
  std::vector<int> val(shuffled.end() - static_cast<std::ptrdiff_t>(n_val),
                       shuffled.end());
  shuffled.resize(shuffled.size() - n_val);
  return {std::move(shuffled), std::move(val)};
}

struct JointParts {
  Network deconfounder;
  std::vector<Network> heads;
};

double joint_val_loss(const JointParts& parts, const Matrix& reps,
                      const Matrix& z_std, std::span<const double> y,
                      std::span<const int> t) {
  const Matrix f = forward_eval(parts.deconfounder, reps);
  const Matrix h = hconcat(f, z_std);
  double total = 0.0;
  // Evaluate each head once on the full slice; cheaper than per-row routing.
  std::vector<Matrix> outs;
  outs.reserve(parts.heads.size());
  for (const Network& head : parts.heads) {
    outs.push_back(forward_eval(head, h));
  }
  for (std::size_t i = 0; i < reps.rows; ++i) {
    const double diff = outs[static_cast<std::size_t>(t[i])].data[i] - y[i];
    total += diff * diff;
  }
  return total / static_cast<double>(reps.rows);
}

void softmax_rows(Matrix& logits) {
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double* row = logits.row_ptr(i);
    double mx = row[0];
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < logits.cols; ++j) row[j] /= sum;
  }
}

}  // namespace

JointNuisanceModel fit_joint(const CausalDataset& ds,
                             std::span<const int> rows,
                             const JointArchitecture& arch,
                             const TrainConfig& cfg, TrainHistory* history) {
  const int levels = ds.n_levels();
  {
    std::vector<bool> present(static_cast<std::size_t>(levels), false);
    for (int r : rows) present[static_cast<std::size_t>(ds.t[r])] = true;
    for (int t = 0; t < levels; ++t) {
      require(present[static_cast<std::size_t>(t)], ErrorKind::Partition,
              "nuisance.fit_joint",
              "treatment level " + std::to_string(t) +
                  " missing from training slice");
    }
  }
  require(arch.deconfounder_out_dim < ds.reps.dim(), ErrorKind::Config,
          "nuisance.fit_joint",
          "deconfounder output dimension must be smaller than d_r");

  JointNuisanceModel model;
  model.q = arch.deconfounder_out_dim;
  model.z_std = Standardizer::fit(ds.z, rows);
  model.deconfounder = Network::init(arch.deconfounder_spec(ds.reps.dim()),
                                     mix_seed(cfg.seed, 0xdecfu));
  model.heads.reserve(static_cast<std::size_t>(levels));
  for (int t = 0; t < levels; ++t) {
    model.heads.push_back(
        Network::init(arch.head_spec(ds.z.cols),
                      mix_seed(cfg.seed, 0xead0u + static_cast<unsigned>(t))));
  }

  auto [train_rows, val_rows] = split_train_val(rows, cfg.seed);
  const Matrix train_reps = ds.reps.values.gather_rows(train_rows);
  const Matrix train_z = model.z_std.apply(ds.z.gather_rows(train_rows));
  const Matrix val_reps = ds.reps.values.gather_rows(val_rows);
  const Matrix val_z = model.z_std.apply(ds.z.gather_rows(val_rows));
  std::vector<double> train_y(train_rows.size()), val_y(val_rows.size());
  std::vector<int> train_t(train_rows.size()), val_t(val_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    train_y[i] = ds.y[static_cast<std::size_t>(train_rows[i])];
    train_t[i] = ds.t[static_cast<std::size_t>(train_rows[i])];
  }
  for (std::size_t i = 0; i < val_rows.size(); ++i) {
    val_y[i] = ds.y[static_cast<std::size_t>(val_rows[i])];
    val_t[i] = ds.t[static_cast<std::size_t>(val_rows[i])];
  }

  JointParts current{model.deconfounder, model.heads};
  JointParts best = current;
  AdamState deconf_adam = AdamState::zeros_like(current.deconfounder);
  std::vector<AdamState> head_adam;
  for (const Network& head : current.heads) {
    head_adam.push_back(AdamState::zeros_like(head));
  }
  Rng shuffle_rng(mix_seed(cfg.seed, 0x7368u));
  std::size_t step = 0;

  auto run_epoch = [&](std::size_t) {
    double total = 0.0;
    for (const auto& batch :
         make_batches(train_rows.size(), cfg.batch_size, shuffle_rng)) {
      const std::size_t bsize = batch.size();
      const Matrix breps =
          train_reps.gather_rows(std::span<const std::size_t>(batch));
      const Matrix bz =
          train_z.gather_rows(std::span<const std::size_t>(batch));

      ForwardTrace deconf_trace;
      const Matrix f = forward(current.deconfounder, breps,
                               ForwardMode::Train, &deconf_trace);
      const Matrix h = hconcat(f, bz);

      std::vector<std::vector<std::size_t>> by_level(
          static_cast<std::size_t>(levels));
      for (std::size_t i = 0; i < bsize; ++i) {
        by_level[static_cast<std::size_t>(
                     train_t[batch[i]])].push_back(i);
      }

      Gradients deconf_grads = Gradients::zeros_like(current.deconfounder);
      std::vector<Gradients> head_grads;
      head_grads.reserve(current.heads.size());
      for (const Network& head : current.heads) {
        head_grads.push_back(Gradients::zeros_like(head));
      }
      Matrix df(bsize, model.q, 0.0);
      const double scale = 2.0 / static_cast<double>(bsize);

      for (int t = 0; t < levels; ++t) {
        const auto& members = by_level[static_cast<std::size_t>(t)];
        if (members.empty()) continue;
        const Matrix hs = h.gather_rows(std::span<const std::size_t>(members));
        ForwardTrace head_trace;
        const Matrix out =
            forward(current.heads[static_cast<std::size_t>(t)], hs,
                    ForwardMode::Train, &head_trace);
        Matrix dout(out.rows, 1, 0.0);
        for (std::size_t i = 0; i < members.size(); ++i) {
          const double diff =
              out.data[i] - train_y[batch[members[i]]];
          total += diff * diff;
          dout.data[i] = scale * diff;
        }
        const Matrix dh =
            backward(current.heads[static_cast<std::size_t>(t)], head_trace,
                     dout, head_grads[static_cast<std::size_t>(t)]);
        for (std::size_t i = 0; i < members.size(); ++i) {
          const double* src = dh.row_ptr(i);
          double* dst = df.row_ptr(members[i]);
          for (std::size_t jq = 0; jq < model.q; ++jq) dst[jq] += src[jq];
        }
      }
      backward(current.deconfounder, deconf_trace, df, deconf_grads);

      std::vector<Gradients*> all;
      all.push_back(&deconf_grads);
      for (auto& g : head_grads) all.push_back(&g);
      clip_gradients(std::span<Gradients* const>(all.data(), all.size()),
                     cfg.clip_norm);
      ++step;
      adam_step(current.deconfounder, deconf_grads, deconf_adam, cfg, step);
      for (std::size_t t = 0; t < current.heads.size(); ++t) {
        adam_step(current.heads[t], head_grads[t], head_adam[t], cfg, step);
      }
    }
    return total / static_cast<double>(train_rows.size());
  };
  auto eval_val = [&] {
    return joint_val_loss(current, val_reps, val_z, val_y, val_t);
  };

  TrainHistory hist = run_early_stopping(
      cfg, "nuisance.fit_joint", run_epoch, eval_val,
      [&] { best = current; }, [&] { current = best; });
  model.deconfounder = std::move(current.deconfounder);
  model.heads = std::move(current.heads);
  if (history) *history = std::move(hist);
  return model;
}

Matrix PropensityModel::predict(const Matrix& deconfounded,
                                const Matrix& z) const {
  Matrix input = hconcat(deconfounded, z);
  in_std.apply_inplace(input);
  Matrix logits = forward_eval(net, input);
  softmax_rows(logits);
  return logits;
}

PropensityModel fit_propensity(const CausalDataset& ds,
                               std::span<const int> rows,
                               const JointNuisanceModel& f_provider,
                               const PropensityConfig& prop_cfg,
                               const TrainConfig& cfg,
                               TrainHistory* history) {
  const int levels = ds.n_levels();
  {
    std::vector<bool> present(static_cast<std::size_t>(levels), false);
    int distinct = 0;
    for (int r : rows) {
      const auto level = static_cast<std::size_t>(ds.t[r]);
      if (!present[level]) {
        present[level] = true;
        ++distinct;
      }
    }
    require(distinct >= 2, ErrorKind::DegenerateTreatment,
            "nuisance.fit_propensity",
            "training slice holds a single treatment class");
  }

  PropensityModel model;
  model.n_levels = levels;

  // Frozen deconfounder: f_hat is computed once, eval mode.
  const Matrix reps = ds.reps.values.gather_rows(rows);
  const Matrix f_hat = f_provider.deconfound(reps);
  Matrix input = hconcat(f_hat, ds.z.gather_rows(rows));
  std::vector<int> all_local(rows.size());
  std::iota(all_local.begin(), all_local.end(), 0);
  model.in_std = Standardizer::fit(input, all_local);
  require(prop_cfg.input_scale > 0.0, ErrorKind::Config,
          "nuisance.fit_propensity", "input_scale must be positive");
  for (double& sd : model.in_std.sd) sd /= prop_cfg.input_scale;
  model.in_std.apply_inplace(input);

  MlpSpec spec;
  spec.layer_widths.push_back(input.cols);
  for (std::size_t w : prop_cfg.hidden) spec.layer_widths.push_back(w);
  spec.layer_widths.push_back(static_cast<std::size_t>(levels));
  spec.dropout_rate = prop_cfg.dropout;
  spec.spectral_normalized = true;

  TrainConfig pc = cfg;
  pc.learning_rate = prop_cfg.learning_rate;
  Network current = Network::init(spec, mix_seed(pc.seed, 0x70f0u));
  current.dropout_rng = Rng(mix_seed(pc.seed, 0x7472u));
  Network best = current;
  AdamState adam = AdamState::zeros_like(current);

  std::vector<int> local(rows.size());
  std::iota(local.begin(), local.end(), 0);
  auto [train_rows, val_rows] = split_train_val(local, pc.seed);
  const Matrix train_x = input.gather_rows(train_rows);
  const Matrix val_x = input.gather_rows(val_rows);
  std::vector<int> train_t(train_rows.size()), val_t(val_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    train_t[i] = ds.t[static_cast<std::size_t>(
        rows[static_cast<std::size_t>(train_rows[i])])];
  }
  for (std::size_t i = 0; i < val_rows.size(); ++i) {
    val_t[i] = ds.t[static_cast<std::size_t>(
        rows[static_cast<std::size_t>(val_rows[i])])];
  }

  Rng shuffle_rng(mix_seed(pc.seed, 0x7368u));
  std::size_t step = 0;

  auto cross_entropy = [&](const Network& net, const Matrix& x,
                           std::span<const int> targets) {
    Matrix probs = forward_eval(net, x);
    softmax_rows(probs);
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double p =
          std::max(probs(i, static_cast<std::size_t>(targets[i])), 1e-300);
      total -= std::log(p);
    }
    return total / static_cast<double>(x.rows);
  };

  auto run_epoch = [&](std::size_t) {
    double total = 0.0;
    for (const auto& batch :
         make_batches(train_x.rows, pc.batch_size, shuffle_rng)) {
      const Matrix bx =
          train_x.gather_rows(std::span<const std::size_t>(batch));
      ForwardTrace trace;
      Matrix probs = forward(current, bx, ForwardMode::Train, &trace);
      softmax_rows(probs);
      Matrix dlogits = probs;
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const int target = train_t[batch[i]];
        total -= std::log(
            std::max(probs(i, static_cast<std::size_t>(target)), 1e-300));
        dlogits(i, static_cast<std::size_t>(target)) -= 1.0;
      }
      for (double& v : dlogits.data) v *= inv;
      Gradients grads = Gradients::zeros_like(current);
      backward(current, trace, dlogits, grads);
      clip_gradients(grads, pc.clip_norm);
      adam_step(current, grads, adam, pc, ++step);
    }
    return total / static_cast<double>(train_x.rows);
  };
  auto eval_val = [&] { return cross_entropy(current, val_x, val_t); };

  TrainHistory hist = run_early_stopping(
      pc, "nuisance.fit_propensity", run_epoch, eval_val,
      [&] { best = current; }, [&] { current = best; });
  model.net = std::move(current);
  if (history) *history = std::move(hist);
  return model;
}

void SearchSpace::validate() const {
  require(lr_lo > 0.0 && lr_hi >= lr_lo, ErrorKind::Config,
          "nuisance.search", "bad learning-rate range");
  require(dropout_lo >= 0.0 && dropout_hi < 1.0 && dropout_hi >= dropout_lo,
          ErrorKind::Config, "nuisance.search", "bad dropout range");
  require(!head_widths.empty() && !deconfounder_widths.empty(),
          ErrorKind::Config, "nuisance.search", "empty architecture sets");
  require(trials >= 1, ErrorKind::Config, "nuisance.search",
          "trials must be >= 1");
}

namespace {

struct FoldResult {
  std::vector<int> fold_rows;
  Matrix mu;  // fold rows x L
  Matrix pi;
  Matrix f;
  std::vector<std::string> trace_lines;
};

FoldResult fit_one_fold(const CausalDataset& ds, const FoldAssignment& folds,
                        const CrossFitOptions& options, std::uint64_t seed,
                        std::size_t fold) {
  FoldResult result;
  std::vector<int> i1_rows, i2_rows;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (folds.fold_of[i] == static_cast<int>(fold)) {
      result.fold_rows.push_back(static_cast<int>(i));
    } else if (folds.inner[fold][i] == 0) {
      i1_rows.push_back(static_cast<int>(i));
    } else {
      i2_rows.push_back(static_cast<int>(i));
    }
  }

  // Random-search tuning on I1, selected by inner-validation loss.
  const SearchSpace& space = options.space;
  Rng draw_rng(mix_seed(seed, 0x7475u, fold));
  JointNuisanceModel best_model;
  double best_val = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (std::size_t trial = 0; trial < space.trials; ++trial) {
    JointArchitecture arch;
    arch.deconfounder_hidden =
        space.deconfounder_widths[draw_rng.index(
            space.deconfounder_widths.size())];
    arch.deconfounder_out_dim = options.deconfounder_out_dim;
    arch.head_hidden = space.head_widths[draw_rng.index(
        space.head_widths.size())];
    arch.dropout = draw_rng.uniform(space.dropout_lo, space.dropout_hi);
    TrainConfig cfg = options.train;
    cfg.learning_rate =
        std::exp(draw_rng.uniform(std::log(space.lr_lo), std::log(space.lr_hi)));
    cfg.seed = mix_seed(seed, 0xf17au + fold, trial);

    TrainHistory history;
    JointNuisanceModel trial_model =
        fit_joint(ds, i1_rows, arch, cfg, &history);

    std::ostringstream line;
    line << "{\"fold\":" << fold << ",\"trial\":" << trial
         << ",\"learning_rate\":" << cfg.learning_rate
         << ",\"dropout\":" << arch.dropout
         << ",\"head_width\":" << arch.head_hidden << ",\"deconfounder\":[";
    for (std::size_t i = 0; i < arch.deconfounder_hidden.size(); ++i) {
      if (i) line << ',';
      line << arch.deconfounder_hidden[i];
    }
    line << "],\"epochs\":" << history.epochs.size()
         << ",\"val_loss\":" << history.best_val << "}";
    result.trace_lines.push_back(line.str());

    if (!have_best || history.best_val < best_val) {
      best_val = history.best_val;
      best_model = std::move(trial_model);
      have_best = true;
    }
  }

  TrainConfig prop_train = options.train;
  prop_train.seed = mix_seed(seed, 0x9409u, fold);
  PropensityModel propensity = fit_propensity(
      ds, i2_rows, best_model, options.propensity, prop_train);

  const Matrix fold_reps = ds.reps.values.gather_rows(result.fold_rows);
  const Matrix fold_z = ds.z.gather_rows(result.fold_rows);
  result.f = best_model.deconfound(fold_reps);
  result.mu = best_model.predict_mu(fold_reps, fold_z);
  result.pi = propensity.predict(result.f, fold_z);
  return result;
}

}  // namespace

NuisanceEstimates cross_fit(const CausalDataset& ds,
                            const FoldAssignment& folds,
                            const CrossFitOptions& options,
                            std::uint64_t seed) {
  options.space.validate();
  require(folds.fold_of.size() == ds.n(), ErrorKind::Dimension,
          "nuisance.cross_fit", "fold assignment does not match dataset");
  const int levels = ds.n_levels();

  std::vector<FoldResult> results(folds.k);
  if (options.threads > 1) {
    std::vector<std::future<FoldResult>> futures;
    futures.reserve(folds.k);
    for (std::size_t f = 0; f < folds.k; ++f) {
      futures.push_back(std::async(std::launch::async, [&, f] {
        return fit_one_fold(ds, folds, options, seed, f);
      }));
    }
    for (std::size_t f = 0; f < folds.k; ++f) results[f] = futures[f].get();
  } else {
    for (std::size_t f = 0; f < folds.k; ++f) {
      results[f] = fit_one_fold(ds, folds, options, seed, f);
    }
  }

  NuisanceEstimates est;
  est.mu_hat = Matrix(ds.n(), static_cast<std::size_t>(levels));
  est.pi_hat = Matrix(ds.n(), static_cast<std::size_t>(levels));
  est.f_hat = Matrix(ds.n(), options.deconfounder_out_dim);
  est.fold_of = folds.fold_of;
  for (std::size_t f = 0; f < folds.k; ++f) {
    const FoldResult& r = results[f];
    if (options.trace) {
      for (const std::string& line : r.trace_lines) options.trace(line);
    }
    for (std::size_t i = 0; i < r.fold_rows.size(); ++i) {
      const auto row = static_cast<std::size_t>(r.fold_rows[i]);
      for (int t = 0; t < levels; ++t) {
        est.mu_hat(row, static_cast<std::size_t>(t)) =
            r.mu(i, static_cast<std::size_t>(t));
        est.pi_hat(row, static_cast<std::size_t>(t)) =
            r.pi(i, static_cast<std::size_t>(t));
      }
      for (std::size_t jq = 0; jq < options.deconfounder_out_dim; ++jq) {
        est.f_hat(row, jq) = r.f(i, jq);
      }
    }
  }
  require(all_finite(est.mu_hat) && all_finite(est.pi_hat),
          ErrorKind::Validation, "nuisance.cross_fit",
          "non-finite nuisance predictions");
  return est;
}

}  // namespace gpi
