#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return std::getenv("GPI_CLI"); }

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

CommandResult run_cli(const std::string& args, const fs::path& capture) {
  const std::string command = std::string(cli_path()) + " " + args + " > " +
                              capture.string() + " 2>/dev/null";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(capture);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.stdout_text = buffer.str();
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "gpi_cli_tests";
  fs::create_directories(dir);
  return dir;
}

/// Cross-fitting config kept small so the end-to-end run stays quick.
void write_small_estimate_config(const fs::path& path) {
  json cfg;
  cfg["trials"] = 1;
  cfg["lr_range"] = {2e-3, 2e-3};
  cfg["dropout_range"] = {0.05, 0.05};
  cfg["head_widths"] = {16};
  cfg["deconfounder_widths"] = {{16, 8}};
  cfg["deconfounder_out_dim"] = 4;
  cfg["propensity_hidden"] = {16, 8};
  cfg["propensity_learning_rate"] = 2e-3;
  cfg["max_epochs"] = 40;
  cfg["patience"] = 5;
  cfg["threads"] = 1;
  std::ofstream out(path);
  out << cfg.dump(2);
}

}  // namespace

TEST_CASE("cli pipeline: simulate, estimate-att, balance") {
  REQUIRE(cli_path() != nullptr);
  const fs::path dir = work_dir();
  const fs::path sim_dir = dir / "sim_a";
  const fs::path capture = dir / "stdout.txt";

  auto sim = run_cli("simulate --dgp A --n 500 --d-r 10 --seed 5 --out " +
                         sim_dir.string(),
                     capture);
  REQUIRE(sim.exit_code == 0);
  REQUIRE(fs::exists(sim_dir / "reps.gpir"));
  REQUIRE(fs::exists(sim_dir / "data.csv"));
  const json truth = json::parse(read_file(sim_dir / "truth.json"));
  CHECK(truth.at("dgp") == "A");
  CHECK(truth.at("att").get<double>() == doctest::Approx(1.0));

  const fs::path cfg_path = dir / "small.json";
  write_small_estimate_config(cfg_path);
  const fs::path out_json = dir / "att.json";
  const fs::path scores_csv = dir / "scores.csv";
  auto est = run_cli("estimate-att --config " + cfg_path.string() +
                         " --reps " + (sim_dir / "reps.gpir").string() +
                         " --data " + (sim_dir / "data.csv").string() +
                         " --seed 11 --out " + out_json.string() +
                         " --scores-out " + scores_csv.string(),
                     capture);
  REQUIRE(est.exit_code == 0);
  const json result = json::parse(read_file(out_json));
  CHECK(result.at("estimand") == "att");
  CHECK(result.at("n") == 500);
  CHECK(result.at("balance").size() == 1);
  CHECK(result.at("balance")[0].at("column") == "confounder_u1");
  CHECK(result.at("provenance").contains("config_hash"));

  auto bal = run_cli("balance --scores " + scores_csv.string() + " --data " +
                         (sim_dir / "data.csv").string(),
                     capture);
  CHECK(bal.exit_code == 0);
  CHECK(bal.stdout_text.find("confounder_u1") != std::string::npos);
}

TEST_CASE("cli validation failures use exit code 2 with error JSON") {
  REQUIRE(cli_path() != nullptr);
  const fs::path dir = work_dir();
  const fs::path capture = dir / "stdout_err.txt";

  const fs::path bad_csv = dir / "no_y.csv";
  {
    std::ofstream out(bad_csv);
    out << "t,cluster,z_1\n1,0,0.5\n0,1,0.25\n";
  }
  const fs::path reps = dir / "tiny.gpir";
  {
    // 2 rows x 1 col GPIR file.
    std::ofstream out(reps, std::ios::binary);
    out.write("GPIR", 4);
    const std::uint32_t version = 1;
    const std::uint64_t n = 2, d = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 8);
    const float values[2] = {0.5f, -0.5f};
    out.write(reinterpret_cast<const char*>(values), 8);
  }
  auto res = run_cli("estimate-att --reps " + reps.string() + " --data " +
                         bad_csv.string() + " --out " +
                         (dir / "never.json").string(),
                     capture);
  CHECK(res.exit_code == 2);
  const json err = json::parse(res.stdout_text);
  CHECK(err.at("message").get<std::string>().find("missing column y") !=
        std::string::npos);
  CHECK(err.contains("stage"));
}

TEST_CASE("cli determinism: same seed twice gives byte-identical files") {
  REQUIRE(cli_path() != nullptr);
  const fs::path dir = work_dir();
  const fs::path capture = dir / "stdout_det.txt";

  for (const std::string run : {"r1", "r2"}) {
    auto sim = run_cli("simulate --dgp B --n 400 --d-r 10 --seed 21 --out " +
                           (dir / ("sim_" + run)).string(),
                       capture);
    REQUIRE(sim.exit_code == 0);
  }
  CHECK(read_file(dir / "sim_r1" / "reps.gpir") ==
        read_file(dir / "sim_r2" / "reps.gpir"));
  CHECK(read_file(dir / "sim_r1" / "data.csv") ==
        read_file(dir / "sim_r2" / "data.csv"));
  CHECK(read_file(dir / "sim_r1" / "truth.json") ==
        read_file(dir / "sim_r2" / "truth.json"));

  const fs::path cfg_path = dir / "small_dose.json";
  write_small_estimate_config(cfg_path);
  for (const std::string run : {"d1", "d2"}) {
    auto est = run_cli("estimate-dose --config " + cfg_path.string() +
                           " --reps " + (dir / "sim_r1/reps.gpir").string() +
                           " --data " + (dir / "sim_r1/data.csv").string() +
                           " --seed 31 --out " +
                           (dir / (run + ".json")).string(),
                       capture);
    REQUIRE(est.exit_code == 0);
  }
  CHECK(read_file(dir / "d1.json") == read_file(dir / "d2.json"));
}

TEST_CASE("cli fit-structural on simulated comparisons") {
  REQUIRE(cli_path() != nullptr);
  const fs::path dir = work_dir();
  const fs::path capture = dir / "stdout_str.txt";
  const fs::path sim_dir = dir / "sim_c";

  auto sim = run_cli(
      "simulate --dgp C --n 2000 --d-r 10 --j-args 32 --seed 41 --out " +
          sim_dir.string(),
      capture);
  REQUIRE(sim.exit_code == 0);
  REQUIRE(fs::exists(sim_dir / "args.csv"));
  REQUIRE(fs::exists(sim_dir / "comparisons.csv"));

  json cfg;
  cfg["deconfounder_hidden"] = {16, 8};
  cfg["deconfounder_out_dim"] = 4;
  cfg["head_hidden"] = 16;
  cfg["dropout"] = 0.1;
  cfg["learning_rate"] = 3e-3;
  cfg["max_epochs"] = 30;
  cfg["patience"] = 5;
  cfg["mc_samples"] = 25;
  const fs::path cfg_path = dir / "structural.json";
  {
    std::ofstream out(cfg_path);
    out << cfg.dump(2);
  }

  // Two identical representation files: cross-file correlation must be 1.
  fs::copy_file(sim_dir / "reps.gpir", sim_dir / "reps_copy.gpir",
                fs::copy_options::overwrite_existing);
  const fs::path out_json = dir / "structural_out.json";
  auto fit = run_cli("fit-structural --config " + cfg_path.string() +
                         " --args " + (sim_dir / "args.csv").string() +
                         " --comparisons " +
                         (sim_dir / "comparisons.csv").string() + " --reps " +
                         (sim_dir / "reps.gpir").string() + " --reps " +
                         (sim_dir / "reps_copy.gpir").string() +
                         " --seed 43 --out " + out_json.string(),
                     capture);
  REQUIRE(fit.exit_code == 0);
  const json result = json::parse(read_file(out_json));
  REQUIRE(result.at("files").size() == 2);
  CHECK(result.at("files")[0].at("beta").size() == 14);
  REQUIRE(result.at("pairwise_correlations").size() == 1);
  CHECK(result.at("pairwise_correlations")[0].at("pearson_r").get<double>() ==
        doctest::Approx(1.0).epsilon(1e-9));
}
