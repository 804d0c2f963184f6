#include "gpi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gpi/dml.hpp"
#include "gpi/error.hpp"

namespace gpi {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

BalanceReport balance_check(std::span<const double> scores,
                            std::span<const double> confounder,
                            std::span<const int> cluster) {
  const std::size_t n = scores.size();
  require(confounder.size() == n && cluster.size() == n, ErrorKind::Dimension,
          "diagnostics.balance_check", "input lengths differ");
  require(n >= 3, ErrorKind::Validation, "diagnostics.balance_check",
          "need at least 3 observations");

  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += scores[i];
    mean_y += confounder[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = scores[i] - mean_x;
    const double dy = confounder[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::Validation,
          "diagnostics.balance_check", "constant input vector");
  const double sd_x = std::sqrt(sxx / static_cast<double>(n));
  const double sd_y = std::sqrt(syy / static_cast<double>(n));
  const double r = sxy / (static_cast<double>(n) * sd_x * sd_y);

  // Influence function of the correlation on standardized coordinates:
  // s_i = u_i v_i - r (u_i^2 + v_i^2) / 2. Aggregated by cluster exactly as
  // in dml::clustered_se, this yields a scale-invariant robust variance that
  // reduces to the classic iid test for singleton clusters.
  std::vector<double> influence(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (scores[i] - mean_x) / sd_x;
    const double v = (confounder[i] - mean_y) / sd_y;
    influence[i] = u * v - 0.5 * r * (u * u + v * v);
  }
  const double se = clustered_se(influence, cluster);

  BalanceReport report;
  report.pearson_r = r;
  report.n = n;
  int n_clusters = 0;
  for (int c : cluster) n_clusters = std::max(n_clusters, c + 1);
  report.n_clusters = static_cast<std::size_t>(n_clusters);
  if (se <= 0.0) {
    report.p_value = r == 0.0 ? 1.0 : 0.0;
  } else {
    const double z = r / se;
    report.p_value = 2.0 * (1.0 - normal_cdf(std::abs(z)));
  }
  return report;
}

}  // namespace gpi
