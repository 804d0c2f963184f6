#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "gpi/error.hpp"
#include "json.hpp"

namespace {

using gpi::cli::Json;

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  gpi::require(in.good(), gpi::ErrorKind::Io, "cli",
               "cannot open config file " + path);
  Json cfg;
  try {
    in >> cfg;
  } catch (const std::exception& e) {
    gpi::fail(gpi::ErrorKind::Config, "cli",
              std::string("malformed config JSON: ") + e.what());
  }
  gpi::require(cfg.is_object(), gpi::ErrorKind::Config, "cli",
               "config file must hold a JSON object");
  return cfg;
}

/// defaults <- config file <- explicitly passed flags.
struct ConfigBuilder {
  Json resolved;
  CLI::App* cmd = nullptr;
  std::string config_path;

  void wire(CLI::App* sub) {
    cmd = sub;
    sub->add_option("--config", config_path, "JSON config file");
  }

  template <class T>
  T* bind(const std::string& flag, const std::string& key, T& storage,
          const std::string& help) {
    (void)key;
    cmd->add_option(flag, storage, help);
    return &storage;
  }

  void apply_file() {
    if (config_path.empty()) return;
    const Json file_cfg = load_config_file(config_path);
    for (const auto& [key, value] : file_cfg.items()) {
      gpi::require(resolved.contains(key), gpi::ErrorKind::Config, "cli",
                   "unknown config key '" + key + "'");
      resolved[key] = value;
    }
  }

  template <class T>
  void override_if_set(const std::string& flag, const std::string& key,
                       const T& value) {
    if (cmd->count(flag) > 0) resolved[key] = value;
  }
};

Json simulate_defaults() {
  Json cfg;
  cfg["dgp"] = "A";
  cfg["n"] = 4000;
  cfg["d_r"] = 16;
  cfg["d_u"] = 2;
  cfg["noise_sd"] = 1.0;
  cfg["j_args"] = 64;
  cfg["seed"] = 1;
  cfg["out"] = "";
  cfg["effect"] = 1.0;
  cfg["confounding"] = 1.5;
  cfg["z_weight"] = 0.0;
  cfg["t_noise_sd"] = 1.0;
  return cfg;
}

Json estimate_defaults() {
  Json cfg;
  cfg["reps"] = "";
  cfg["data"] = "";
  cfg["out"] = "";
  cfg["seed"] = 1;
  cfg["folds"] = 2;
  cfg["trials"] = 20;
  cfg["alpha"] = 0.01;
  cfg["bins"] = 10;
  cfg["deconfounder_out_dim"] = 64;
  cfg["threads"] = 0;
  cfg["batch_size"] = 256;
  cfg["max_epochs"] = 10000;
  cfg["patience"] = 5;
  cfg["weight_decay"] = 1e-8;
  cfg["clip_norm"] = 1.0;
  cfg["lr_range"] = Json::array({1e-7, 1e-4});
  cfg["dropout_range"] = Json::array({0.05, 0.3});
  cfg["head_widths"] = Json::array({50, 100, 200});
  cfg["deconfounder_widths"] =
      Json::array({Json::array({256, 128}), Json::array({512, 256}),
                   Json::array({1024, 512})});
  cfg["propensity_hidden"] = Json::array({128, 64});
  cfg["propensity_learning_rate"] = 1e-5;
  cfg["propensity_dropout"] = 0.0;
  cfg["trace"] = "";
  cfg["scores_out"] = "";
  cfg["balance_columns"] = Json::array();
  return cfg;
}

Json structural_defaults() {
  Json cfg;
  cfg["args"] = "";
  cfg["comparisons"] = "";
  cfg["reps"] = Json::array();
  cfg["out"] = "";
  cfg["seed"] = 1;
  cfg["mc_samples"] = 3000;
  cfg["deconfounder_hidden"] = Json::array({256, 128});
  cfg["deconfounder_out_dim"] = 64;
  cfg["head_hidden"] = 50;
  cfg["dropout"] = 0.2;
  cfg["learning_rate"] = 1e-4;
  cfg["batch_size"] = 256;
  cfg["max_epochs"] = 10000;
  cfg["patience"] = 5;
  cfg["weight_decay"] = 1e-8;
  cfg["clip_norm"] = 1.0;
  return cfg;
}

Json balance_defaults() {
  Json cfg;
  cfg["scores"] = "";
  cfg["data"] = "";
  cfg["out"] = "";
  cfg["columns"] = Json::array();
  return cfg;
}

int dispatch(int (*command)(const Json&), const Json& cfg) {
  try {
    return command(cfg);
  } catch (const gpi::Error& e) {
    Json err{{"stage", e.stage()}, {"message", e.what()},
             {"kind", gpi::to_string(e.kind())}};
    std::cout << err.dump(2) << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    Json err{{"stage", "cli"}, {"message", e.what()}, {"kind", "internal"}};
    std::cout << err.dump(2) << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GenAI-powered inference: deconfounder-based effect "
               "estimation from pre-extracted representations"};
  app.require_subcommand(1);

  // --- simulate ---------------------------------------------------------
  ConfigBuilder sim;
  sim.resolved = simulate_defaults();
  sim.wire(app.add_subcommand(
      "simulate", "Generate a synthetic dataset with brute-force truth"));
  std::string sim_dgp;
  std::uint64_t sim_n = 0, sim_seed = 0, sim_dr = 0, sim_du = 0, sim_j = 0;
  double sim_noise = 0.0;
  std::string sim_out;
  sim.cmd->add_option("--dgp", sim_dgp, "DGP name: A, B or C");
  sim.cmd->add_option("--n", sim_n, "observations (A/B) or comparisons (C)");
  sim.cmd->add_option("--seed", sim_seed, "master seed");
  sim.cmd->add_option("--d-r", sim_dr, "representation dimension");
  sim.cmd->add_option("--d-u", sim_du, "latent confounder dimension");
  sim.cmd->add_option("--j-args", sim_j, "argument count (DGP C)");
  sim.cmd->add_option("--noise-sd", sim_noise, "outcome noise sd");
  sim.cmd->add_option("--out", sim_out, "output directory");

  // --- estimate-att -----------------------------------------------------
  ConfigBuilder att;
  att.resolved = estimate_defaults();
  att.wire(app.add_subcommand(
      "estimate-att", "Cross-fitted ATT for a binary treatment"));
  std::string att_reps, att_data, att_out, att_trace, att_scores;
  std::uint64_t att_seed = 0, att_folds = 0, att_trials = 0, att_q = 0;
  std::uint64_t att_epochs = 0, att_patience = 0;
  double att_alpha = 0.0;
  int att_threads = 0;
  att.cmd->add_option("--reps", att_reps, "GPIR representation file");
  att.cmd->add_option("--data", att_data, "tabular CSV (y,t,cluster,z_*)");
  att.cmd->add_option("--out", att_out, "result JSON path");
  att.cmd->add_option("--seed", att_seed, "master seed");
  att.cmd->add_option("--folds", att_folds, "cross-fitting folds");
  att.cmd->add_option("--trials", att_trials, "random-search trials");
  att.cmd->add_option("--alpha", att_alpha, "propensity truncation level");
  att.cmd->add_option("--deconfounder-out-dim", att_q,
                      "deconfounder output dimension");
  att.cmd->add_option("--threads", att_threads, "fold parallelism");
  att.cmd->add_option("--max-epochs", att_epochs, "epoch cap");
  att.cmd->add_option("--patience", att_patience, "early-stopping patience");
  att.cmd->add_option("--trace", att_trace, "tuning trace JSONL path");
  att.cmd->add_option("--scores-out", att_scores,
                      "write per-observation scores CSV");

  // --- estimate-dose ----------------------------------------------------
  ConfigBuilder dose;
  dose.resolved = estimate_defaults();
  dose.wire(app.add_subcommand(
      "estimate-dose",
      "Average potential outcome per treatment bin (AIPW)"));
  std::string dose_reps, dose_data, dose_out, dose_trace, dose_scores;
  std::uint64_t dose_seed = 0, dose_folds = 0, dose_trials = 0, dose_q = 0;
  std::uint64_t dose_bins = 0, dose_epochs = 0, dose_patience = 0;
  double dose_alpha = 0.0;
  int dose_threads = 0;
  dose.cmd->add_option("--reps", dose_reps, "GPIR representation file");
  dose.cmd->add_option("--data", dose_data,
                       "tabular CSV (y, t or t_raw, cluster, z_*)");
  dose.cmd->add_option("--out", dose_out, "result JSON path");
  dose.cmd->add_option("--seed", dose_seed, "master seed");
  dose.cmd->add_option("--folds", dose_folds, "cross-fitting folds");
  dose.cmd->add_option("--trials", dose_trials, "random-search trials");
  dose.cmd->add_option("--alpha", dose_alpha, "propensity truncation level");
  dose.cmd->add_option("--bins", dose_bins, "quantile bins for t_raw");
  dose.cmd->add_option("--deconfounder-out-dim", dose_q,
                       "deconfounder output dimension");
  dose.cmd->add_option("--threads", dose_threads, "fold parallelism");
  dose.cmd->add_option("--max-epochs", dose_epochs, "epoch cap");
  dose.cmd->add_option("--patience", dose_patience,
                       "early-stopping patience");
  dose.cmd->add_option("--trace", dose_trace, "tuning trace JSONL path");
  dose.cmd->add_option("--scores-out", dose_scores,
                       "write per-observation scores CSV");

  // --- fit-structural ---------------------------------------------------
  ConfigBuilder str;
  str.resolved = structural_defaults();
  str.wire(app.add_subcommand(
      "fit-structural",
      "Semiparametric pairwise persuasiveness model with MC dropout"));
  std::string str_args, str_comp, str_out;
  std::vector<std::string> str_reps;
  std::uint64_t str_seed = 0, str_mc = 0, str_epochs = 0, str_patience = 0;
  str.cmd->add_option("--args", str_args, "argument table CSV");
  str.cmd->add_option("--comparisons", str_comp, "comparisons CSV");
  str.cmd->add_option("--reps", str_reps,
                      "one or more GPIR representation files");
  str.cmd->add_option("--out", str_out, "result JSON path");
  str.cmd->add_option("--seed", str_seed, "master seed");
  str.cmd->add_option("--mc-samples", str_mc, "Monte Carlo dropout draws");
  str.cmd->add_option("--max-epochs", str_epochs, "epoch cap");
  str.cmd->add_option("--patience", str_patience, "early-stopping patience");

  // --- balance ----------------------------------------------------------
  ConfigBuilder bal;
  bal.resolved = balance_defaults();
  bal.wire(app.add_subcommand(
      "balance",
      "Efficient-score / confounder correlation table with robust p-values"));
  std::string bal_scores, bal_data, bal_out;
  std::vector<std::string> bal_columns;
  bal.cmd->add_option("--scores", bal_scores, "scores CSV from an estimate");
  bal.cmd->add_option("--data", bal_data, "tabular CSV with confounders");
  bal.cmd->add_option("--columns", bal_columns, "confounder column names");
  bal.cmd->add_option("--out", bal_out, "optional result JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim.cmd->parsed()) {
      sim.apply_file();
      sim.override_if_set("--dgp", "dgp", sim_dgp);
      sim.override_if_set("--n", "n", sim_n);
      sim.override_if_set("--seed", "seed", sim_seed);
      sim.override_if_set("--d-r", "d_r", sim_dr);
      sim.override_if_set("--d-u", "d_u", sim_du);
      sim.override_if_set("--j-args", "j_args", sim_j);
      sim.override_if_set("--noise-sd", "noise_sd", sim_noise);
      sim.override_if_set("--out", "out", sim_out);
      return dispatch(gpi::cli::run_simulate, sim.resolved);
    }
    if (att.cmd->parsed()) {
      att.apply_file();
      att.override_if_set("--reps", "reps", att_reps);
      att.override_if_set("--data", "data", att_data);
      att.override_if_set("--out", "out", att_out);
      att.override_if_set("--seed", "seed", att_seed);
      att.override_if_set("--folds", "folds", att_folds);
      att.override_if_set("--trials", "trials", att_trials);
      att.override_if_set("--alpha", "alpha", att_alpha);
      att.override_if_set("--deconfounder-out-dim", "deconfounder_out_dim",
                          att_q);
      att.override_if_set("--threads", "threads", att_threads);
      att.override_if_set("--max-epochs", "max_epochs", att_epochs);
      att.override_if_set("--patience", "patience", att_patience);
      att.override_if_set("--trace", "trace", att_trace);
      att.override_if_set("--scores-out", "scores_out", att_scores);
      return dispatch(gpi::cli::run_estimate_att, att.resolved);
    }
    if (dose.cmd->parsed()) {
      dose.apply_file();
      dose.override_if_set("--reps", "reps", dose_reps);
      dose.override_if_set("--data", "data", dose_data);
      dose.override_if_set("--out", "out", dose_out);
      dose.override_if_set("--seed", "seed", dose_seed);
      dose.override_if_set("--folds", "folds", dose_folds);
      dose.override_if_set("--trials", "trials", dose_trials);
      dose.override_if_set("--alpha", "alpha", dose_alpha);
      dose.override_if_set("--bins", "bins", dose_bins);
      dose.override_if_set("--deconfounder-out-dim", "deconfounder_out_dim",
                           dose_q);
      dose.override_if_set("--threads", "threads", dose_threads);
      dose.override_if_set("--max-epochs", "max_epochs", dose_epochs);
      dose.override_if_set("--patience", "patience", dose_patience);
      dose.override_if_set("--trace", "trace", dose_trace);
      dose.override_if_set("--scores-out", "scores_out", dose_scores);
      return dispatch(gpi::cli::run_estimate_dose, dose.resolved);
    }
    if (str.cmd->parsed()) {
      str.apply_file();
      str.override_if_set("--args", "args", str_args);
      str.override_if_set("--comparisons", "comparisons", str_comp);
      str.override_if_set("--reps", "reps", str_reps);
      str.override_if_set("--out", "out", str_out);
      str.override_if_set("--seed", "seed", str_seed);
      str.override_if_set("--mc-samples", "mc_samples", str_mc);
      str.override_if_set("--max-epochs", "max_epochs", str_epochs);
      str.override_if_set("--patience", "patience", str_patience);
      return dispatch(gpi::cli::run_fit_structural, str.resolved);
    }
    if (bal.cmd->parsed()) {
      bal.apply_file();
      bal.override_if_set("--scores", "scores", bal_scores);
      bal.override_if_set("--data", "data", bal_data);
      bal.override_if_set("--columns", "columns", bal_columns);
      bal.override_if_set("--out", "out", bal_out);
      return dispatch(gpi::cli::run_balance, bal.resolved);
    }
  } catch (const gpi::Error& e) {
    Json err{{"stage", e.stage()}, {"message", e.what()},
             {"kind", gpi::to_string(e.kind())}};
    std::cout << err.dump(2) << "\n";
    return e.exit_code();
  }
  return 0;
}
