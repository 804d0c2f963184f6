#include "gpi/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "gpi/error.hpp"
#include "gpi/rng.hpp"

namespace gpi {

namespace {

constexpr char kMagic[4] = {'G', 'P', 'I', 'R'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(
        (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
bool read_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  std::uint64_t acc = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    acc = (acc << 8) | bytes[i];
  }
  value = static_cast<T>(acc);
  return true;
}

std::uint32_t float_bits(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  return bits;
}

float bits_float(std::uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

}  // namespace

RepMatrix load_reps(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "dataset.load_reps",
          "cannot open " + path.string());

  char magic[4];
  require(static_cast<bool>(in.read(magic, 4)), ErrorKind::Format,
          "dataset.load_reps", "file too short for GPIR header");
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Format,
          "dataset.load_reps", "bad magic; not a GPIR file");

  std::uint32_t version = 0;
  require(read_le(in, version), ErrorKind::Format, "dataset.load_reps",
          "truncated GPIR header");
  require(version == kVersion, ErrorKind::Format, "dataset.load_reps",
          "unsupported GPIR version " + std::to_string(version));

  std::uint64_t n = 0, d = 0;
  require(read_le(in, n) && read_le(in, d), ErrorKind::Format,
          "dataset.load_reps", "truncated GPIR header");
  require(d >= 1, ErrorKind::Format, "dataset.load_reps",
          "GPIR dimension must be >= 1");

  const std::uint64_t count = n * d;
  std::vector<float> payload(count);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  const std::uint64_t got = static_cast<std::uint64_t>(in.gcount());
  require(got == count * sizeof(float), ErrorKind::Io, "dataset.load_reps",
          "truncated payload: expected " + std::to_string(count * 4) +
              " bytes, got " + std::to_string(got));

  RepMatrix reps;
  reps.values = Matrix(n, d);
  for (std::uint64_t i = 0; i < count; ++i) {
    // Payload is little-endian on disk regardless of host order.
    std::uint32_t bits;
    std::memcpy(&bits, payload.data() + i, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap32(bits);
    }
    const float f = bits_float(bits);
    if (!std::isfinite(f)) {
      fail(ErrorKind::Validation, "dataset.load_reps",
           "non-finite value at row " + std::to_string(i / d));
    }
    reps.values.data[i] = static_cast<double>(f);
  }
  return reps;
}

void save_reps(const RepMatrix& reps, const std::filesystem::path& path) {
  require(all_finite(reps.values), ErrorKind::Validation, "dataset.save_reps",
          "refusing to write non-finite representations");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::Io, "dataset.save_reps",
          "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  write_le(out, kVersion);
  write_le(out, static_cast<std::uint64_t>(reps.n()));
  write_le(out, static_cast<std::uint64_t>(reps.dim()));
  for (double v : reps.values.data) {
    std::uint32_t bits = float_bits(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap32(bits);
    }
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  require(out.good(), ErrorKind::Io, "dataset.save_reps",
          "write failed for " + path.string());
}

Matrix expand_missing(const MissingTable& z_raw) {
  const std::size_t n = z_raw.values.rows;
  const std::size_t d = z_raw.values.cols;
  Matrix out(n, 3 * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = z_raw.values.row_ptr(i);
    double* dst = out.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) {
      const bool miss = z_raw.is_missing(i, j);
      const double filled = miss ? 0.0 : src[j];
      const double indicator = miss ? 1.0 : 0.0;
      dst[j] = filled;
      dst[d + j] = indicator;
      dst[2 * d + j] = filled * indicator;
    }
  }
  return out;
}

std::vector<int> discretize_quantile(std::span<const double> x,
                                     std::size_t bins) {
  require(bins >= 2, ErrorKind::Config, "dataset.discretize",
          "bins must be >= 2");
  require(x.size() >= bins, ErrorKind::Validation, "dataset.discretize",
          "need at least `bins` observations");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  require(sorted.front() < sorted.back(), ErrorKind::DegenerateTreatment,
          "dataset.discretize", "constant treatment vector");

  // Type-7 interior quantile edges at p = j/bins.
  const std::size_t n = sorted.size();
  std::vector<double> edges(bins - 1);
  for (std::size_t j = 1; j < bins; ++j) {
    const double h =
        static_cast<double>(n - 1) * static_cast<double>(j) /
        static_cast<double>(bins);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    const double upper = lo + 1 < n ? sorted[lo + 1] : sorted[lo];
    edges[j - 1] = sorted[lo] + frac * (upper - sorted[lo]);
  }

  std::vector<int> labels(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Count edges strictly below x_i: a value equal to an edge stays in the
    // lower bin.
    const auto it = std::lower_bound(edges.begin(), edges.end(), x[i]);
    labels[i] = static_cast<int>(it - edges.begin());
  }
  return labels;
}

int CausalDataset::n_levels() const {
  int max_level = -1;
  for (int v : t) max_level = std::max(max_level, v);
  return max_level + 1;
}

int CausalDataset::n_clusters() const {
  int max_id = -1;
  for (int v : cluster) max_id = std::max(max_id, v);
  return max_id + 1;
}

void CausalDataset::validate() const {
  const std::size_t count = y.size();
  require(count > 0, ErrorKind::Validation, "dataset", "empty dataset");
  require(t.size() == count && cluster.size() == count &&
              z.rows == count && reps.n() == count,
          ErrorKind::Dimension, "dataset",
          "y, t, z, cluster and reps must have equal lengths");
  require(all_finite(y) && all_finite(z.data) && all_finite(reps.values),
          ErrorKind::Validation, "dataset", "non-finite values in dataset");

  const int levels = n_levels();
  require(levels >= 1, ErrorKind::Validation, "dataset",
          "treatment levels must be nonnegative integers");
  std::vector<std::size_t> level_count(static_cast<std::size_t>(levels), 0);
  for (int v : t) {
    require(v >= 0, ErrorKind::Validation, "dataset",
            "negative treatment level");
    ++level_count[static_cast<std::size_t>(v)];
  }
  for (int v = 0; v < levels; ++v) {
    require(level_count[static_cast<std::size_t>(v)] > 0,
            ErrorKind::DegenerateTreatment, "dataset",
            "treatment level " + std::to_string(v) + " has no observations");
  }

  const int clusters = n_clusters();
  std::vector<bool> seen(static_cast<std::size_t>(clusters), false);
  for (int c : cluster) {
    require(c >= 0, ErrorKind::Validation, "dataset", "negative cluster id");
    seen[static_cast<std::size_t>(c)] = true;
  }
  for (int c = 0; c < clusters; ++c) {
    require(seen[static_cast<std::size_t>(c)], ErrorKind::Validation,
            "dataset", "cluster ids are not dense-coded");
  }
}

FoldAssignment make_folds(const CausalDataset& ds, std::size_t k,
                          std::uint64_t seed) {
  require(k >= 2, ErrorKind::Config, "dataset.make_folds", "k must be >= 2");
  const int n_clusters = ds.n_clusters();
  require(static_cast<std::size_t>(n_clusters) >= 2 * k, ErrorKind::Partition,
          "dataset.make_folds",
          "need at least 2k clusters (" + std::to_string(n_clusters) +
              " < " + std::to_string(2 * k) + ")");

  std::vector<std::size_t> cluster_size(static_cast<std::size_t>(n_clusters),
                                        0);
  for (int c : ds.cluster) ++cluster_size[static_cast<std::size_t>(c)];

  std::vector<int> order(static_cast<std::size_t>(n_clusters));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x666fu));
  rng.shuffle(order);

  // Deal each cluster (in shuffled order) to the currently smallest fold so
  // the row-count spread never exceeds the largest cluster. With equal-size
  // clusters this reduces to a round-robin deal.
  std::vector<int> fold_of_cluster(static_cast<std::size_t>(n_clusters), -1);
  std::vector<std::size_t> fold_rows(k, 0);
  for (int c : order) {
    std::size_t target = 0;
    for (std::size_t f = 1; f < k; ++f) {
      if (fold_rows[f] < fold_rows[target]) target = f;
    }
    fold_of_cluster[static_cast<std::size_t>(c)] = static_cast<int>(target);
    fold_rows[target] += cluster_size[static_cast<std::size_t>(c)];
  }

  FoldAssignment folds;
  folds.k = k;
  folds.fold_of.resize(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    folds.fold_of[i] =
        fold_of_cluster[static_cast<std::size_t>(ds.cluster[i])];
  }

  // Cluster-pure I1/I2 bipartition of each fold's complement, again greedy
  // by row count over the shuffled cluster order.
  folds.inner.assign(k, std::vector<std::int8_t>(ds.n(), -1));
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::int8_t> half_of_cluster(
        static_cast<std::size_t>(n_clusters), -1);
    std::size_t half_rows[2] = {0, 0};
    for (int c : order) {
      if (fold_of_cluster[static_cast<std::size_t>(c)] ==
          static_cast<int>(f)) {
        continue;
      }
      const std::int8_t half = half_rows[1] < half_rows[0] ? 1 : 0;
      half_of_cluster[static_cast<std::size_t>(c)] = half;
      half_rows[half] += cluster_size[static_cast<std::size_t>(c)];
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
      folds.inner[f][i] =
          half_of_cluster[static_cast<std::size_t>(ds.cluster[i])];
    }
  }
  return folds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
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
  return cells;
}

double parse_double(const std::string& cell, std::size_t row,
                    const std::string& column) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    require(pos == cell.size(), ErrorKind::Format, "dataset.csv",
            "malformed number '" + cell + "' in column " + column + " row " +
                std::to_string(row));
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "dataset.csv",
         "malformed number '" + cell + "' in column " + column + " row " +
             std::to_string(row));
  }
}

}  // namespace

TabularData load_tabular_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "dataset.csv",
          "cannot open " + path.string());

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format,
          "dataset.csv", "empty file");
  const std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };

  const int y_col = column_index("y");
  require(y_col >= 0, ErrorKind::Validation, "dataset.csv",
          "missing column y");
  const int cluster_col = column_index("cluster");
  require(cluster_col >= 0, ErrorKind::Validation, "dataset.csv",
          "missing column cluster");
  const int t_col = column_index("t");
  const int t_raw_col = column_index("t_raw");
  require(t_col >= 0 || t_raw_col >= 0, ErrorKind::Validation, "dataset.csv",
          "missing column t (or t_raw)");

  std::vector<int> z_cols;
  std::vector<int> extra_cols;
  TabularData tab;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (idx == y_col || idx == cluster_col || idx == t_col ||
        idx == t_raw_col) {
      continue;
    }
    if (header[i].rfind("z_", 0) == 0) {
      z_cols.push_back(idx);
      tab.z.names.push_back(header[i]);
    } else {
      extra_cols.push_back(idx);
      tab.extra_names.push_back(header[i]);
    }
  }

  std::vector<double> z_values;
  std::vector<std::uint8_t> z_missing;
  std::vector<double> extra_values;
  if (t_col >= 0) tab.t.emplace();
  if (t_raw_col >= 0) tab.t_raw.emplace();

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorKind::Format, "dataset.csv",
            "row " + std::to_string(row) + " has " +
                std::to_string(cells.size()) + " cells, expected " +
                std::to_string(header.size()));

    require(!cells[static_cast<std::size_t>(y_col)].empty(),
            ErrorKind::Validation, "dataset.csv",
            "missing y at row " + std::to_string(row));
    tab.y.push_back(parse_double(cells[static_cast<std::size_t>(y_col)], row,
                                 "y"));
    require(!cells[static_cast<std::size_t>(cluster_col)].empty(),
            ErrorKind::Validation, "dataset.csv",
            "missing cluster at row " + std::to_string(row));
    tab.cluster_raw.push_back(static_cast<std::int64_t>(parse_double(
        cells[static_cast<std::size_t>(cluster_col)], row, "cluster")));

    if (t_col >= 0) {
      const std::string& cell = cells[static_cast<std::size_t>(t_col)];
      require(!cell.empty(), ErrorKind::Validation, "dataset.csv",
              "missing t at row " + std::to_string(row));
      const double v = parse_double(cell, row, "t");
      const int level = static_cast<int>(std::llround(v));
      require(std::abs(v - level) < 1e-9 && level >= 0, ErrorKind::Validation,
              "dataset.csv",
              "t must be a nonnegative integer at row " + std::to_string(row));
      tab.t->push_back(level);
    }
    if (t_raw_col >= 0) {
      const std::string& cell = cells[static_cast<std::size_t>(t_raw_col)];
      require(!cell.empty(), ErrorKind::Validation, "dataset.csv",
              "missing t_raw at row " + std::to_string(row));
      tab.t_raw->push_back(parse_double(cell, row, "t_raw"));
    }

    for (int idx : z_cols) {
      const std::string& cell = cells[static_cast<std::size_t>(idx)];
      if (cell.empty()) {
        z_values.push_back(0.0);
        z_missing.push_back(1);
      } else {
        z_values.push_back(parse_double(cell, row, header[idx]));
        z_missing.push_back(0);
      }
    }
    for (std::size_t e = 0; e < extra_cols.size(); ++e) {
      const std::string& cell =
          cells[static_cast<std::size_t>(extra_cols[e])];
      require(!cell.empty(), ErrorKind::Validation, "dataset.csv",
              "missing value in column " + tab.extra_names[e] + " at row " +
                  std::to_string(row));
      extra_values.push_back(parse_double(cell, row, tab.extra_names[e]));
    }
  }
  require(row > 0, ErrorKind::Validation, "dataset.csv", "no data rows");

  tab.z.values = Matrix(row, z_cols.size());
  std::copy(z_values.begin(), z_values.end(), tab.z.values.data.begin());
  tab.z.missing = std::move(z_missing);
  tab.extra = Matrix(row, extra_cols.size());
  std::copy(extra_values.begin(), extra_values.end(), tab.extra.data.begin());
  return tab;
}

CausalDataset assemble_dataset(const TabularData& tab, std::vector<int> t,
                               RepMatrix reps) {
  const std::size_t n = tab.n();
  require(t.size() == n, ErrorKind::Dimension, "dataset.assemble",
          "treatment length does not match table rows");
  require(reps.n() == n, ErrorKind::Dimension, "dataset.assemble",
          "representation rows (" + std::to_string(reps.n()) +
              ") do not match table rows (" + std::to_string(n) + ")");

  CausalDataset ds;
  ds.y = tab.y;
  ds.t = std::move(t);
  ds.reps = std::move(reps);
  ds.z = expand_missing(tab.z);

  // Dense-code clusters in order of first appearance.
  std::map<std::int64_t, int> ids;
  ds.cluster.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] =
        ids.try_emplace(tab.cluster_raw[i], static_cast<int>(ids.size()));
    ds.cluster[i] = it->second;
  }
  ds.validate();
  return ds;
}

}  // namespace gpi
