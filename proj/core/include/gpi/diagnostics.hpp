#pragma once

#include <cstddef>
#include <span>

namespace gpi {

struct BalanceReport {
  double pearson_r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t n_clusters = 0;
};

/// Pearson correlation between efficient scores and a candidate confounder,
/// with a cluster-robust normal test built from the correlation's influence
/// function on standardized inputs.
BalanceReport balance_check(std::span<const double> scores,
                            std::span<const double> confounder,
                            std::span<const int> cluster);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace gpi
