#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gpi/matrix.hpp"

namespace gpi {

/// Internal-representation matrix. Stored on disk as 32-bit floats
/// ("GPIR" format), widened to 64-bit in memory.
struct RepMatrix {
  Matrix values;

  std::size_t n() const { return values.rows; }
  std::size_t dim() const { return values.cols; }
};

/// GPIR file: magic "GPIR", u32 version=1, u64 n, u64 d, then n*d
/// little-endian float32, row-major.
RepMatrix load_reps(const std::filesystem::path& path);
void save_reps(const RepMatrix& reps, const std::filesystem::path& path);

/// Covariate table with explicit per-cell missingness.
struct MissingTable {
  Matrix values;                 // missing cells hold 0
  std::vector<std::uint8_t> missing;  // row-major, 1 = missing
  std::vector<std::string> names;

  bool is_missing(std::size_t i, std::size_t j) const {
    return missing[i * values.cols + j] != 0;
  }
};

/// [z filled with 0 where missing | per-column missing indicator |
///  filled column x indicator]; always exactly 3x the input columns.
Matrix expand_missing(const MissingTable& z_raw);

/// Quantile bins via type-7 interpolated sample quantiles; left-closed with
/// ties at an edge assigned to the lower bin. Labels are 0..bins-1.
std::vector<int> discretize_quantile(std::span<const double> x,
                                     std::size_t bins);

struct CausalDataset {
  std::vector<double> y;
  std::vector<int> t;        // dense levels 0..L-1, every level present
  Matrix z;                  // post missing-expansion
  std::vector<int> cluster;  // dense ids 0..C-1
  RepMatrix reps;

  std::size_t n() const { return y.size(); }
  int n_levels() const;
  int n_clusters() const;

  /// Validates lengths, level density/presence, finiteness.
  void validate() const;
};

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<int> fold_of;  // length n
  // inner[f][i]: 0 = I1, 1 = I2 for rows outside fold f; -1 inside fold f.
  std::vector<std::vector<std::int8_t>> inner;
};

/// Cluster-pure K folds: clusters are shuffled by seed and dealt to the
/// currently smallest fold, which bounds fold-size spread by the largest
/// cluster. Each fold complement gets a cluster-pure I1/I2 bipartition.
FoldAssignment make_folds(const CausalDataset& ds, std::size_t k,
                          std::uint64_t seed);

/// Raw tabular load: header CSV with required columns y, cluster and either
/// t or t_raw; z_* columns are covariates; empty cells are missing. Any
/// other columns are kept by name for diagnostics.
struct TabularData {
  std::vector<double> y;
  std::optional<std::vector<int>> t;
  std::optional<std::vector<double>> t_raw;
  std::vector<std::int64_t> cluster_raw;
  MissingTable z;
  std::vector<std::string> extra_names;
  Matrix extra;  // fully observed auxiliary columns (e.g. confounders)

  std::size_t n() const { return y.size(); }
};

TabularData load_tabular_csv(const std::filesystem::path& path);

/// Dense-codes clusters by first appearance, expands missing covariates,
/// and aligns representations. `t` must already be dense in 0..L-1.
CausalDataset assemble_dataset(const TabularData& tab, std::vector<int> t,
                               RepMatrix reps);

}  // namespace gpi
