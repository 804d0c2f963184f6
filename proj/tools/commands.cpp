#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <thread>

#include "gpi/dataset.hpp"
#include "gpi/diagnostics.hpp"
#include "gpi/dml.hpp"
#include "gpi/error.hpp"
#include "gpi/nuisance.hpp"
#include "gpi/simulate.hpp"
#include "gpi/structural.hpp"

namespace gpi::cli {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::Io, "cli",
          "cannot open " + path.string() + " for writing");
  out << text;
  require(out.good(), ErrorKind::Io, "cli", "write failed: " + path.string());
}

void write_json_file(const fs::path& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

Json provenance_block(const Json& cfg) {
  // Output destinations do not affect the computation; strip them so the
  // same run written to two places yields byte-identical results.
  Json canonical = cfg;
  for (const char* key : {"out", "scores_out", "trace"}) {
    if (canonical.contains(key)) canonical.erase(key);
  }
  return Json{{"gpi_version", kVersion},
              {"config_hash", config_hash(canonical)},
              {"config", canonical}};
}

void require_file(const Json& cfg, const char* key) {
  const std::string path = cfg.at(key).get<std::string>();
  require(!path.empty(), ErrorKind::Config, "cli",
          std::string("config key '") + key + "' is required");
  require(fs::exists(path), ErrorKind::Io, "cli",
          std::string(key) + " path does not exist: " + path);
}

Json effect_to_json(const EffectEstimate& e) {
  return Json{{"point", e.point},
              {"se", e.se_cluster},
              {"ci95", {e.ci95[0], e.ci95[1]}},
              {"n", e.scores.size()},
              {"n_clusters", e.n_clusters}};
}

/// Minimal integer-cell CSV reader for the structural tables.
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cli", "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cell);
        cell.clear();
      } else if (ch != '\r') {
        cell.push_back(ch);
      }
    }
    cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  require(!rows.empty(), ErrorKind::Format, "cli",
          "empty csv: " + path.string());
  return rows;
}

int find_column(const std::vector<std::string>& header,
                const std::string& name, const fs::path& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  fail(ErrorKind::Validation, "cli",
       "missing column " + name + " in " + path.string());
}

long parse_long(const std::string& cell, const std::string& context) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(cell, &pos);
    require(pos == cell.size(), ErrorKind::Format, "cli",
            "malformed integer '" + cell + "' in " + context);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "cli",
         "malformed integer '" + cell + "' in " + context);
  }
}

DgpSpec spec_from_config(const Json& cfg) {
  DgpSpec spec;
  spec.name = parse_dgp_name(cfg.at("dgp").get<std::string>());
  spec.n = cfg.at("n").get<std::size_t>();
  spec.d_r = cfg.at("d_r").get<std::size_t>();
  spec.d_u = cfg.at("d_u").get<std::size_t>();
  spec.noise_sd = cfg.at("noise_sd").get<double>();
  spec.seed = cfg.at("seed").get<std::uint64_t>();
  spec.effect = cfg.at("effect").get<double>();
  spec.confounding = cfg.at("confounding").get<double>();
  spec.z_weight = cfg.at("z_weight").get<double>();
  spec.t_noise_sd = cfg.at("t_noise_sd").get<double>();
  spec.j_args = cfg.at("j_args").get<std::size_t>();
  return spec;
}

void write_causal_csv(const fs::path& path, const GeneratedCausal& gen,
                      bool with_t_raw, bool with_confounder) {
  std::string text = "y,t,cluster,z_1,z_2";
  if (with_t_raw) text += ",t_raw";
  if (with_confounder) text += ",confounder_u1";
  text += "\n";
  for (std::size_t i = 0; i < gen.ds.n(); ++i) {
    text += format_double(gen.ds.y[i]);
    text += "," + std::to_string(gen.ds.t[i]);
    text += "," + std::to_string(gen.ds.cluster[i]);
    text += "," + format_double(gen.ds.z(i, 0));
    text += "," + format_double(gen.ds.z(i, 1));
    if (with_t_raw) text += "," + format_double(gen.t_raw[i]);
    if (with_confounder) text += "," + format_double(gen.u(i, 0));
    text += "\n";
  }
  write_text(path, text);
}

CrossFitOptions options_from_config(const Json& cfg, std::uint64_t seed) {
  CrossFitOptions options;
  options.space.trials = cfg.at("trials").get<std::size_t>();
  const auto& lr = cfg.at("lr_range");
  options.space.lr_lo = lr.at(0).get<double>();
  options.space.lr_hi = lr.at(1).get<double>();
  const auto& drop = cfg.at("dropout_range");
  options.space.dropout_lo = drop.at(0).get<double>();
  options.space.dropout_hi = drop.at(1).get<double>();
  options.space.head_widths =
      cfg.at("head_widths").get<std::vector<std::size_t>>();
  options.space.deconfounder_widths =
      cfg.at("deconfounder_widths")
          .get<std::vector<std::vector<std::size_t>>>();
  options.deconfounder_out_dim =
      cfg.at("deconfounder_out_dim").get<std::size_t>();
  options.propensity.hidden =
      cfg.at("propensity_hidden").get<std::vector<std::size_t>>();
  options.propensity.learning_rate =
      cfg.at("propensity_learning_rate").get<double>();
  options.propensity.dropout = cfg.at("propensity_dropout").get<double>();
  options.train.batch_size = cfg.at("batch_size").get<std::size_t>();
  options.train.max_epochs = cfg.at("max_epochs").get<std::size_t>();
  options.train.patience = cfg.at("patience").get<std::size_t>();
  options.train.weight_decay = cfg.at("weight_decay").get<double>();
  options.train.clip_norm = cfg.at("clip_norm").get<double>();
  options.train.seed = seed;
  int threads = cfg.at("threads").get<int>();
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  options.threads = std::max(1, threads);
  return options;
}

struct EstimationRun {
  CausalDataset ds;
  TabularData tab;
  NuisanceEstimates nuisances;
  std::uint64_t seed = 0;
  std::shared_ptr<std::ofstream> trace_file;
};

EstimationRun run_cross_fitting(const Json& cfg, bool dose) {
  require_file(cfg, "reps");
  require_file(cfg, "data");

  EstimationRun run;
  run.seed = cfg.at("seed").get<std::uint64_t>();
  RepMatrix reps = load_reps(cfg.at("reps").get<std::string>());
  run.tab = load_tabular_csv(cfg.at("data").get<std::string>());

  std::vector<int> t;
  if (run.tab.t.has_value()) {
    t = *run.tab.t;
  } else if (dose) {
    require(run.tab.t_raw.has_value(), ErrorKind::Validation, "cli",
            "missing column t (or t_raw)");
    t = discretize_quantile(*run.tab.t_raw,
                            cfg.at("bins").get<std::size_t>());
  } else {
    fail(ErrorKind::Validation, "cli", "missing column t");
  }
  run.ds = assemble_dataset(run.tab, std::move(t), std::move(reps));

  const std::size_t k = cfg.at("folds").get<std::size_t>();
  const FoldAssignment folds = make_folds(run.ds, k, run.seed);

  CrossFitOptions options = options_from_config(cfg, run.seed);
  const std::string trace_path = cfg.at("trace").get<std::string>();
  if (!trace_path.empty()) {
    run.trace_file = std::make_shared<std::ofstream>(trace_path,
                                                     std::ios::trunc);
    require(run.trace_file->good(), ErrorKind::Io, "cli",
            "cannot open trace file " + trace_path);
    auto sink = run.trace_file;
    options.trace = [sink](const std::string& line) { *sink << line << "\n"; };
  }
  run.nuisances = cross_fit(run.ds, folds, options, run.seed);
  return run;
}

Json balance_block(const Json& cfg, const EstimationRun& run,
                   const std::vector<double>& scores) {
  std::vector<std::string> columns;
  if (cfg.at("balance_columns").is_array() &&
      !cfg.at("balance_columns").empty()) {
    columns = cfg.at("balance_columns").get<std::vector<std::string>>();
  } else {
    columns = run.tab.extra_names;
  }
  Json out = Json::array();
  for (const std::string& name : columns) {
    const auto it = std::find(run.tab.extra_names.begin(),
                              run.tab.extra_names.end(), name);
    require(it != run.tab.extra_names.end(), ErrorKind::Validation, "cli",
            "balance column not found: " + name);
    const auto col =
        static_cast<std::size_t>(it - run.tab.extra_names.begin());
    std::vector<double> confounder(run.ds.n());
    for (std::size_t i = 0; i < run.ds.n(); ++i) {
      confounder[i] = run.tab.extra(i, col);
    }
    const BalanceReport report =
        balance_check(scores, confounder, run.ds.cluster);
    out.push_back(Json{{"column", name},
                       {"pearson_r", report.pearson_r},
                       {"p_value", report.p_value}});
  }
  return out;
}

void maybe_write_scores(const Json& cfg, const std::vector<double>& scores) {
  const std::string path = cfg.at("scores_out").get<std::string>();
  if (path.empty()) return;
  std::string text = "score\n";
  for (double s : scores) text += format_double(s) + "\n";
  write_text(path, text);
}

void emit_result(const Json& cfg, const Json& result) {
  const std::string out = cfg.at("out").get<std::string>();
  require(!out.empty(), ErrorKind::Config, "cli",
          "config key 'out' is required");
  write_json_file(out, result);
  std::cout << result.dump(2) << "\n";
}

constexpr const char* kTruncationNote =
    "symmetric clamp to [alpha, 1-alpha] with row renormalization; "
    "stand-in for the truncation method cited in the source analysis";

}  // namespace

std::string config_hash(const Json& cfg) {
  const std::string dump = cfg.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(h));
  return buffer;
}

int run_simulate(const Json& cfg) {
  const std::string out_dir = cfg.at("out").get<std::string>();
  require(!out_dir.empty(), ErrorKind::Config, "cli",
          "config key 'out' is required");
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const DgpSpec spec = spec_from_config(cfg);

  Json truth{{"dgp", dgp_label(spec.name)},
             {"seed", spec.seed},
             {"n", spec.n},
             {"d_r", spec.d_r},
             {"d_u", spec.d_u},
             {"noise_sd", spec.noise_sd},
             {"provenance", provenance_block(cfg)}};

  if (spec.name == DgpName::PairwiseOrdinal) {
    const GeneratedPairwise gen = generate_pairwise(spec);
    RepMatrix reps;
    reps.values = gen.data.args.reps;
    save_reps(reps, dir / "reps.gpir");

    std::string args_text = "j,t,s,p,rep_row\n";
    for (std::size_t j = 0; j < gen.data.args.size(); ++j) {
      args_text += std::to_string(j) + "," +
                   std::to_string(gen.data.args.element[j]) + "," +
                   std::to_string(gen.data.args.side[j]) + "," +
                   std::to_string(gen.data.args.topic[j]) + "," +
                   std::to_string(j) + "\n";
    }
    write_text(dir / "args.csv", args_text);

    std::string comp_text = "respondent,j,j_prime,y\n";
    for (const Comparison& c : gen.data.comparisons) {
      comp_text += std::to_string(c.respondent) + "," + std::to_string(c.j) +
                   "," + std::to_string(c.j_prime) + "," +
                   std::to_string(c.y) + "\n";
    }
    write_text(dir / "comparisons.csv", comp_text);

    truth["beta"] = gen.truth.beta;
    truth["j_args"] = spec.j_args;
  } else {
    const GeneratedCausal gen = generate_causal(spec);
    RepMatrix reps;
    reps.values = gen.ds.reps.values;
    save_reps(reps, dir / "reps.gpir");
    const bool is_dose = spec.name == DgpName::MultilevelApo;
    write_causal_csv(dir / "data.csv", gen, is_dose, !is_dose);
    if (is_dose) {
      truth["apo"] = gen.truth.apo;
      truth["m_table"] = dose_response_table();
    } else {
      truth["att"] = gen.truth.att;
      truth["params"] = Json{{"effect", spec.effect},
                             {"confounding", spec.confounding},
                             {"z_weight", spec.z_weight}};
    }
  }
  write_json_file(dir / "truth.json", truth);
  std::cout << "wrote " << (dir / "truth.json").string() << "\n";
  return 0;
}

int run_estimate_att(const Json& cfg) {
  EstimationRun run = run_cross_fitting(cfg, /*dose=*/false);
  require(run.ds.n_levels() == 2, ErrorKind::Validation, "cli",
          "estimate-att requires a binary t column");
  const double alpha = cfg.at("alpha").get<double>();
  const EffectEstimate e = estimate_att(run.ds, run.nuisances, alpha);

  Json result = effect_to_json(e);
  result["estimand"] = "att";
  result["truncation_level"] = alpha;
  result["truncation_method"] = kTruncationNote;
  result["fold_seed"] = run.seed;
  result["balance"] = balance_block(cfg, run, e.scores);
  result["provenance"] = provenance_block(cfg);
  maybe_write_scores(cfg, e.scores);
  emit_result(cfg, result);
  return 0;
}

int run_estimate_dose(const Json& cfg) {
  EstimationRun run = run_cross_fitting(cfg, /*dose=*/true);
  const double alpha = cfg.at("alpha").get<double>();
  const int levels = run.ds.n_levels();

  std::vector<EffectEstimate> apo;
  apo.reserve(static_cast<std::size_t>(levels));
  for (int t = 0; t < levels; ++t) {
    apo.push_back(estimate_apo(run.ds, run.nuisances, t, alpha));
  }

  Json bins = Json::array();
  for (int t = 0; t < levels; ++t) {
    Json row = effect_to_json(apo[static_cast<std::size_t>(t)]);
    row["level"] = t;
    bins.push_back(row);
  }
  Json contrasts = Json::array();
  for (int t = 1; t < levels; ++t) {
    const EffectEstimate d = contrast(apo[static_cast<std::size_t>(t)],
                                      apo[static_cast<std::size_t>(t - 1)]);
    Json row = effect_to_json(d);
    row["levels"] = {t, t - 1};
    contrasts.push_back(row);
  }

  Json result{{"estimand", "dose_response"},
              {"bins", bins},
              {"contrasts", contrasts},
              {"n", run.ds.n()},
              {"n_clusters", run.ds.n_clusters()},
              {"truncation_level", alpha},
              {"truncation_method", kTruncationNote},
              {"fold_seed", run.seed},
              {"provenance", provenance_block(cfg)}};
  // Scores of the first bin's APO are the conventional export here; each
  // bin's scores are recoverable by rerunning with that level.
  maybe_write_scores(cfg, apo.front().scores);
  emit_result(cfg, result);
  return 0;
}

int run_fit_structural(const Json& cfg) {
  require_file(cfg, "args");
  require_file(cfg, "comparisons");
  const auto rep_paths = cfg.at("reps").get<std::vector<std::string>>();
  require(!rep_paths.empty(), ErrorKind::Config, "cli",
          "config key 'reps' needs at least one GPIR file");
  for (const std::string& p : rep_paths) {
    require(fs::exists(p), ErrorKind::Io, "cli",
            "reps path does not exist: " + p);
  }

  // Argument table.
  const fs::path args_path = cfg.at("args").get<std::string>();
  const auto args_rows = read_csv(args_path);
  const auto& args_header = args_rows.front();
  const int col_t = find_column(args_header, "t", args_path);
  const int col_s = find_column(args_header, "s", args_path);
  const int col_p = find_column(args_header, "p", args_path);
  const int col_rep = find_column(args_header, "rep_row", args_path);
  const std::size_t j_count = args_rows.size() - 1;
  std::vector<int> element(j_count), side(j_count), topic(j_count),
      rep_row(j_count);
  for (std::size_t r = 0; r < j_count; ++r) {
    const auto& cells = args_rows[r + 1];
    element[r] = static_cast<int>(
        parse_long(cells[static_cast<std::size_t>(col_t)], "args.t"));
    side[r] = static_cast<int>(
        parse_long(cells[static_cast<std::size_t>(col_s)], "args.s"));
    topic[r] = static_cast<int>(
        parse_long(cells[static_cast<std::size_t>(col_p)], "args.p"));
    rep_row[r] = static_cast<int>(parse_long(
        cells[static_cast<std::size_t>(col_rep)], "args.rep_row"));
  }

  // Comparisons.
  const fs::path comp_path = cfg.at("comparisons").get<std::string>();
  const auto comp_rows = read_csv(comp_path);
  const auto& comp_header = comp_rows.front();
  const int col_resp = find_column(comp_header, "respondent", comp_path);
  const int col_j = find_column(comp_header, "j", comp_path);
  const int col_jp = find_column(comp_header, "j_prime", comp_path);
  const int col_y = find_column(comp_header, "y", comp_path);
  std::vector<Comparison> comparisons(comp_rows.size() - 1);
  for (std::size_t r = 0; r + 1 < comp_rows.size(); ++r) {
    const auto& cells = comp_rows[r + 1];
    comparisons[r].respondent = static_cast<int>(parse_long(
        cells[static_cast<std::size_t>(col_resp)], "comparisons.respondent"));
    comparisons[r].j = static_cast<int>(
        parse_long(cells[static_cast<std::size_t>(col_j)], "comparisons.j"));
    comparisons[r].j_prime = static_cast<int>(parse_long(
        cells[static_cast<std::size_t>(col_jp)], "comparisons.j_prime"));
    comparisons[r].y = static_cast<int>(
        parse_long(cells[static_cast<std::size_t>(col_y)], "comparisons.y"));
  }

  StructuralSpec spec;
  spec.deconfounder_hidden =
      cfg.at("deconfounder_hidden").get<std::vector<std::size_t>>();
  spec.deconfounder_out_dim = cfg.at("deconfounder_out_dim").get<std::size_t>();
  spec.head_hidden = cfg.at("head_hidden").get<std::size_t>();
  spec.dropout = cfg.at("dropout").get<double>();

  TrainConfig train;
  train.learning_rate = cfg.at("learning_rate").get<double>();
  train.batch_size = cfg.at("batch_size").get<std::size_t>();
  train.max_epochs = cfg.at("max_epochs").get<std::size_t>();
  train.patience = cfg.at("patience").get<std::size_t>();
  train.weight_decay = cfg.at("weight_decay").get<double>();
  train.clip_norm = cfg.at("clip_norm").get<double>();

  const std::size_t mc_samples = cfg.at("mc_samples").get<std::size_t>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

  Json warnings = Json::array();
  if (mc_samples == 1) {
    warnings.push_back(
        "mc_samples=1 yields degenerate (zero-width) intervals");
    std::cerr << "warning: mc_samples=1 yields degenerate intervals\n";
  }

  Json files = Json::array();
  std::vector<std::vector<double>> betas;
  for (std::size_t file_idx = 0; file_idx < rep_paths.size(); ++file_idx) {
    const RepMatrix reps = load_reps(rep_paths[file_idx]);
    PairwiseDataset data;
    data.args.element = element;
    data.args.side = side;
    data.args.topic = topic;
    for (int r : rep_row) {
      require(r >= 0 && static_cast<std::size_t>(r) < reps.n(),
              ErrorKind::Validation, "cli",
              "rep_row " + std::to_string(r) + " outside " +
                  rep_paths[file_idx]);
    }
    data.args.reps = reps.values.gather_rows(rep_row);
    data.comparisons = comparisons;
    data.validate();

    // Every file runs the identical seeded pipeline, so duplicate
    // representation files produce identical estimates.
    TrainConfig cfg_file = train;
    cfg_file.seed = mix_seed(seed, 0xf17eu);
    const StructuralModel model = fit_structural(data, spec, cfg_file);
    const PersuasivenessEstimate est =
        mc_dropout_ci(model, data, mc_samples, mix_seed(seed, 0x6d63u));

    Json ci = Json::array();
    for (const auto& interval : est.ci95) {
      ci.push_back({interval[0], interval[1]});
    }
    files.push_back(Json{{"reps", rep_paths[file_idx]},
                         {"beta", est.beta},
                         {"ci95", ci},
                         {"mc_samples", est.mc_samples}});
    betas.push_back(est.beta);
  }

  Json correlations = Json::array();
  for (std::size_t a = 0; a < betas.size(); ++a) {
    for (std::size_t b = a + 1; b < betas.size(); ++b) {
      double ma = 0.0, mb = 0.0;
      for (int t = 0; t < kRhetoricalElements; ++t) {
        ma += betas[a][static_cast<std::size_t>(t)];
        mb += betas[b][static_cast<std::size_t>(t)];
      }
      ma /= kRhetoricalElements;
      mb /= kRhetoricalElements;
      double saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int t = 0; t < kRhetoricalElements; ++t) {
        const double da = betas[a][static_cast<std::size_t>(t)] - ma;
        const double db = betas[b][static_cast<std::size_t>(t)] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
      }
      correlations.push_back(Json{{"a", a},
                                  {"b", b},
                                  {"pearson_r", sab / std::sqrt(saa * sbb)}});
    }
  }

  Json result{{"estimand", "persuasiveness"},
              {"files", files},
              {"pairwise_correlations", correlations},
              {"warnings", warnings},
              {"provenance", provenance_block(cfg)}};
  emit_result(cfg, result);
  return 0;
}

int run_balance(const Json& cfg) {
  require_file(cfg, "scores");
  require_file(cfg, "data");

  const fs::path scores_path = cfg.at("scores").get<std::string>();
  const auto score_rows = read_csv(scores_path);
  require(score_rows.front().size() == 1 && score_rows.front()[0] == "score",
          ErrorKind::Format, "cli",
          "scores file must have a single 'score' column");
  std::vector<double> scores(score_rows.size() - 1);
  for (std::size_t r = 0; r + 1 < score_rows.size(); ++r) {
    scores[r] = std::stod(score_rows[r + 1][0]);
  }

  const TabularData tab =
      load_tabular_csv(cfg.at("data").get<std::string>());
  require(tab.n() == scores.size(), ErrorKind::Dimension, "cli",
          "scores and data row counts differ");
  std::vector<int> cluster(tab.n());
  {
    std::map<std::int64_t, int> ids;
    for (std::size_t i = 0; i < tab.n(); ++i) {
      auto [it, inserted] =
          ids.try_emplace(tab.cluster_raw[i], static_cast<int>(ids.size()));
      cluster[i] = it->second;
    }
  }

  std::vector<std::string> columns;
  if (cfg.at("columns").is_array() && !cfg.at("columns").empty()) {
    columns = cfg.at("columns").get<std::vector<std::string>>();
  } else {
    columns = tab.extra_names;
  }
  require(!columns.empty(), ErrorKind::Validation, "cli",
          "no candidate confounder columns found");

  Json rows = Json::array();
  std::printf("%-28s %10s %10s\n", "confounder", "r", "(p)");
  for (const std::string& name : columns) {
    const auto it =
        std::find(tab.extra_names.begin(), tab.extra_names.end(), name);
    require(it != tab.extra_names.end(), ErrorKind::Validation, "cli",
            "balance column not found: " + name);
    const auto col = static_cast<std::size_t>(it - tab.extra_names.begin());
    std::vector<double> confounder(tab.n());
    for (std::size_t i = 0; i < tab.n(); ++i) {
      confounder[i] = tab.extra(i, col);
    }
    const BalanceReport report = balance_check(scores, confounder, cluster);
    std::printf("%-28s %10.4f   (%.3f)\n", name.c_str(), report.pearson_r,
                report.p_value);
    rows.push_back(Json{{"column", name},
                        {"pearson_r", report.pearson_r},
                        {"p_value", report.p_value},
                        {"n", report.n},
                        {"n_clusters", report.n_clusters}});
  }

  const std::string out = cfg.at("out").get<std::string>();
  if (!out.empty()) {
    Json result{{"estimand", "balance"},
                {"rows", rows},
                {"provenance", provenance_block(cfg)}};
    write_json_file(out, result);
  }
  return 0;
}

}  // namespace gpi::cli
