#include "gpi/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpi/diagnostics.hpp"
#include "gpi/error.hpp"
#include "gpi/nn.hpp"

namespace gpi {

namespace {

constexpr std::size_t kTruthDraws = 1'000'000;
constexpr std::size_t kDoseBins = 10;
constexpr double kPairDelta = 0.6;        // true thresholds -0.6 / +0.6
constexpr double kPairUSlope = 0.9;       // latent strength loading on u0
constexpr double kPairUCurve = 0.45;      // loading on u1^2 - 1
constexpr double kPairShiftScale = 0.8;   // element -> u0 mean shift scale

double inverse_normal_cdf(double p) {
  double lo = -12.0, hi = 12.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

DgpName parse_dgp_name(const std::string& label) {
  if (label == "A" || label == "a") return DgpName::BinaryAtt;
  if (label == "B" || label == "b") return DgpName::MultilevelApo;
  if (label == "C" || label == "c") return DgpName::PairwiseOrdinal;
  fail(ErrorKind::Config, "simulate", "unknown DGP '" + label + "'");
}

std::string dgp_label(DgpName name) {
  switch (name) {
    case DgpName::BinaryAtt: return "A";
    case DgpName::MultilevelApo: return "B";
    case DgpName::PairwiseOrdinal: return "C";
  }
  return "?";
}

void DgpSpec::validate() const {
  require(d_u >= 2 && d_u < d_r, ErrorKind::Config, "simulate",
          "need 2 <= d_u < d_r");
  require(n >= 100, ErrorKind::Config, "simulate", "n must be >= 100");
  require(noise_sd >= 0.0, ErrorKind::Config, "simulate",
          "noise_sd must be nonnegative");
  if (name == DgpName::PairwiseOrdinal) {
    require(j_args >= static_cast<std::size_t>(kRhetoricalElements),
            ErrorKind::Config, "simulate",
            "DGP C needs at least 14 arguments");
  }
  if (name == DgpName::MultilevelApo) {
    require(t_noise_sd > 0.0, ErrorKind::Config, "simulate",
            "DGP B needs positive treatment-score noise");
  }
}

Matrix embedding_matrix(const DgpSpec& spec) {
  const std::size_t d = spec.d_r;
  Rng rng(mix_seed(spec.seed, 0x0051u));
  Matrix q(d, d);
  for (double& v : q.data) v = rng.normal();
  // Modified Gram-Schmidt over columns, run twice for orthogonality down to
  // machine precision, with a diagonal-positive sign convention.
  for (std::size_t j = 0; j < d; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < d; ++i) q(i, j) -= proj * q(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    require(norm > 1e-12, ErrorKind::Validation, "simulate",
            "degenerate random embedding");
    const double sign = q(j, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) q(i, j) *= sign / norm;
  }
  return q;
}

std::vector<double> dose_response_table() {
  return {0.0, 0.4, 0.9, 1.5, 2.0, 2.4, 3.0, 3.6, 4.1, 4.7};
}

std::vector<double> dose_score_edges(const DgpSpec& spec) {
  const double sd = std::sqrt(spec.confounding * spec.confounding +
                              spec.t_noise_sd * spec.t_noise_sd);
  std::vector<double> edges(kDoseBins - 1);
  for (std::size_t t = 1; t < kDoseBins; ++t) {
    edges[t - 1] =
        sd * inverse_normal_cdf(static_cast<double>(t) /
                                static_cast<double>(kDoseBins));
  }
  return edges;
}

double pairwise_element_effect(int element) {
  return 0.25 * (static_cast<double>(element) - 6.5);
}

double pairwise_confounder_shift(int element) {
  const int scrambled = (element * 5) % kRhetoricalElements;
  return kPairShiftScale * (static_cast<double>(scrambled) - 6.5) / 6.5;
}

namespace {

struct CausalLatents {
  Matrix u;                    // n x d_u
  Matrix z_raw;                // n x 2
  std::vector<int> t;
  std::vector<double> y;
  std::vector<double> t_raw;   // B only
  Matrix reps;                 // n x d_r
};

CausalLatents draw_causal(const DgpSpec& spec) {
  const std::size_t n = spec.n;
  const std::size_t d_u = spec.d_u;
  const std::size_t d_noise = spec.d_r - d_u;
  const Matrix q = embedding_matrix(spec);
  const std::vector<double> m = dose_response_table();
  const std::vector<double> edges =
      spec.name == DgpName::MultilevelApo ? dose_score_edges(spec)
                                          : std::vector<double>{};

  CausalLatents out;
  out.u = Matrix(n, d_u);
  out.z_raw = Matrix(n, 2);
  out.t.resize(n);
  out.y.resize(n);
  out.reps = Matrix(n, spec.d_r);
  if (spec.name == DgpName::MultilevelApo) out.t_raw.resize(n);

  Rng rng(mix_seed(spec.seed, 0xda7au));
  std::vector<double> x(spec.d_r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d_u; ++j) {
      out.u(i, j) = rng.normal();
    }
    for (std::size_t j = 0; j < d_noise; ++j) {
      x[d_u + j] = rng.normal();
    }
    out.z_raw(i, 0) = rng.normal();
    out.z_raw(i, 1) = rng.normal();
    const double eps = rng.normal() * spec.noise_sd;

    const double u1 = out.u(i, 0);
    const double u2 = out.u(i, 1);
    if (spec.name == DgpName::BinaryAtt) {
      const double logit =
          spec.confounding * u1 + spec.z_weight * out.z_raw(i, 0);
      out.t[i] = rng.bernoulli(sigmoid(logit)) ? 1 : 0;
      out.y[i] = spec.effect * out.t[i] + u1 + u2 * u2 + out.z_raw(i, 0) + eps;
    } else {
      // Treatment score lives inside R through its noise coordinate, so the
      // treatment is a deterministic feature of the representation.
      const double score = spec.confounding * u1 + spec.t_noise_sd * x[d_u];
      const auto it = std::lower_bound(edges.begin(), edges.end(), score);
      const int level = static_cast<int>(it - edges.begin());
      out.t[i] = level;
      out.t_raw[i] = score;
      out.y[i] = m[static_cast<std::size_t>(level)] + u1 + 0.5 * u2 * u2 + eps;
    }

    for (std::size_t j = 0; j < d_u; ++j) x[j] = out.u(i, j);
    for (std::size_t a = 0; a < spec.d_r; ++a) {
      double acc = 0.0;
      const std::size_t d = spec.d_r;
      for (std::size_t b = 0; b < d; ++b) acc += q(a, b) * x[b];
      out.reps(i, a) = acc;
    }
  }
  return out;
}

OracleRecord causal_truth(const DgpSpec& spec) {
  OracleRecord truth;
  Rng rng(mix_seed(spec.seed, 0x0a1cu));
  if (spec.name == DgpName::BinaryAtt) {
    // ATT by treated-weighted Monte Carlo over fresh draws; the unit-level
    // noise is shared between arms.
    double weighted = 0.0, weight = 0.0;
    for (std::size_t i = 0; i < kTruthDraws; ++i) {
      const double u1 = rng.normal();
      rng.normal();  // u2 (cancels between arms)
      const double z1 = rng.normal();
      const double pi = sigmoid(spec.confounding * u1 + spec.z_weight * z1);
      weighted += pi * spec.effect;
      weight += pi;
    }
    truth.att = weighted / weight;
  } else {
    const std::vector<double> m = dose_response_table();
    truth.apo.assign(kDoseBins, 0.0);
    for (std::size_t i = 0; i < kTruthDraws; ++i) {
      const double u1 = rng.normal();
      const double u2 = rng.normal();
      const double eps = rng.normal() * spec.noise_sd;
      const double base = u1 + 0.5 * u2 * u2 + eps;
      for (std::size_t t = 0; t < kDoseBins; ++t) {
        truth.apo[t] += m[t] + base;
      }
    }
    for (double& v : truth.apo) v /= static_cast<double>(kTruthDraws);
  }
  return truth;
}

}  // namespace

GeneratedCausal generate_causal(const DgpSpec& spec) {
  spec.validate();
  require(spec.name != DgpName::PairwiseOrdinal, ErrorKind::Config,
          "simulate", "generate_causal handles DGPs A and B");

  CausalLatents latents = draw_causal(spec);

  GeneratedCausal out;
  out.u = std::move(latents.u);
  out.t_raw = std::move(latents.t_raw);
  out.ds.y = std::move(latents.y);
  out.ds.t = std::move(latents.t);
  out.ds.reps.values = std::move(latents.reps);

  MissingTable z_table;
  z_table.values = std::move(latents.z_raw);
  z_table.missing.assign(z_table.values.data.size(), 0);
  z_table.names = {"z_1", "z_2"};
  out.ds.z = expand_missing(z_table);

  out.ds.cluster.resize(spec.n);
  std::iota(out.ds.cluster.begin(), out.ds.cluster.end(), 0);

  out.ds.validate();
  out.truth = causal_truth(spec);
  return out;
}

GeneratedPairwise generate_pairwise(const DgpSpec& spec) {
  spec.validate();
  require(spec.name == DgpName::PairwiseOrdinal, ErrorKind::Config,
          "simulate", "generate_pairwise handles DGP C");

  const std::size_t j_count = spec.j_args;
  const std::size_t d_u = spec.d_u;
  const std::size_t d_noise = spec.d_r - d_u;
  const Matrix q = embedding_matrix(spec);

  GeneratedPairwise out;
  out.u = Matrix(j_count, d_u);
  out.data.args.reps = Matrix(j_count, spec.d_r);
  out.data.args.element.resize(j_count);
  out.data.args.side.resize(j_count);
  out.data.args.topic.resize(j_count);

  Rng rng(mix_seed(spec.seed, 0xda7cu));
  std::vector<double> x(spec.d_r);
  std::vector<double> strength(j_count);
  for (std::size_t j = 0; j < j_count; ++j) {
    const int element =
        j < static_cast<std::size_t>(kRhetoricalElements)
            ? static_cast<int>(j)
            : static_cast<int>(rng.index(kRhetoricalElements));
    out.data.args.element[j] = element;
    out.data.args.side[j] = static_cast<int>(rng.index(2));
    out.data.args.topic[j] = static_cast<int>(rng.index(kPolicyTopics));

    for (std::size_t k = 0; k < d_u; ++k) out.u(j, k) = rng.normal();
    out.u(j, 0) += pairwise_confounder_shift(element);
    for (std::size_t k = 0; k < d_noise; ++k) x[d_u + k] = rng.normal();
    for (std::size_t k = 0; k < d_u; ++k) x[k] = out.u(j, k);
    for (std::size_t a = 0; a < spec.d_r; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < spec.d_r; ++b) acc += q(a, b) * x[b];
      out.data.args.reps(j, a) = acc;
    }

    strength[j] = pairwise_element_effect(element) +
                  kPairUSlope * out.u(j, 0) +
                  kPairUCurve * (out.u(j, 1) * out.u(j, 1) - 1.0);
  }

  // Topic/side pools; a topic is eligible when both sides are populated.
  std::vector<std::vector<int>> pool_for(kPolicyTopics),
      pool_against(kPolicyTopics);
  for (std::size_t j = 0; j < j_count; ++j) {
    auto& pool = out.data.args.side[j] == 0 ? pool_for : pool_against;
    pool[static_cast<std::size_t>(out.data.args.topic[j])].push_back(
        static_cast<int>(j));
  }
  std::vector<int> eligible;
  for (int p = 0; p < kPolicyTopics; ++p) {
    if (!pool_for[static_cast<std::size_t>(p)].empty() &&
        !pool_against[static_cast<std::size_t>(p)].empty()) {
      eligible.push_back(p);
    }
  }
  require(!eligible.empty(), ErrorKind::Validation, "simulate",
          "no topic has arguments on both sides");

  out.data.comparisons.reserve(spec.n);
  for (std::size_t c = 0; c < spec.n; ++c) {
    const int respondent = static_cast<int>(c / 4);
    const int topic = eligible[rng.index(eligible.size())];
    const auto& fp = pool_for[static_cast<std::size_t>(topic)];
    const auto& ap = pool_against[static_cast<std::size_t>(topic)];
    int j0 = fp[rng.index(fp.size())];
    int j1 = ap[rng.index(ap.size())];
    if (rng.bernoulli(0.5)) std::swap(j0, j1);  // randomize presentation order

    const double mu_diff = strength[static_cast<std::size_t>(j0)] -
                           strength[static_cast<std::size_t>(j1)];
    const double p0 = sigmoid(-kPairDelta + mu_diff);
    const double p1 = sigmoid(kPairDelta + mu_diff);
    const double draw = rng.uniform();
    const int y = draw < p0 ? 0 : (draw < p1 ? 1 : 2);
    out.data.comparisons.push_back({respondent, j0, j1, y});
  }

  out.data.validate();

  out.truth.beta.resize(kRhetoricalElements);
  double mean_effect = 0.0;
  for (int t = 0; t < kRhetoricalElements; ++t) {
    mean_effect += pairwise_element_effect(t);
  }
  mean_effect /= kRhetoricalElements;
  for (int t = 0; t < kRhetoricalElements; ++t) {
    out.truth.beta[static_cast<std::size_t>(t)] =
        pairwise_element_effect(t) - mean_effect;
  }
  return out;
}

NuisanceEstimates oracle_nuisances(const DgpSpec& spec,
                                   const CausalDataset& ds) {
  spec.validate();
  require(spec.name != DgpName::PairwiseOrdinal, ErrorKind::Config,
          "simulate.oracle", "oracle nuisances exist for DGPs A and B");
  CausalLatents latents = draw_causal(spec);
  require(latents.t.size() == ds.n(), ErrorKind::Provenance,
          "simulate.oracle", "dataset size does not match the spec");
  for (std::size_t i = 0; i < ds.n(); ++i) {
    require(latents.t[i] == ds.t[i], ErrorKind::Provenance, "simulate.oracle",
            "treatment mismatch: dataset was not generated by this spec");
  }
  // Representations may have made a float32 round trip through GPIR.
  double max_diff = 0.0;
  for (std::size_t i = 0; i < ds.reps.values.data.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(ds.reps.values.data[i] -
                                           latents.reps.data[i]));
  }
  require(max_diff < 1e-3, ErrorKind::Provenance, "simulate.oracle",
          "representation mismatch: dataset was not generated by this spec");

  const std::size_t n = ds.n();
  NuisanceEstimates est;
  est.fold_of.assign(n, 0);
  if (spec.name == DgpName::BinaryAtt) {
    est.mu_hat = Matrix(n, 2);
    est.pi_hat = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double u1 = latents.u(i, 0);
      const double u2 = latents.u(i, 1);
      const double z1 = latents.z_raw(i, 0);
      const double base = u1 + u2 * u2 + z1;
      est.mu_hat(i, 0) = base;
      est.mu_hat(i, 1) = spec.effect + base;
      const double pi1 =
          sigmoid(spec.confounding * u1 + spec.z_weight * z1);
      est.pi_hat(i, 0) = 1.0 - pi1;
      est.pi_hat(i, 1) = pi1;
    }
  } else {
    const std::vector<double> m = dose_response_table();
    const std::vector<double> edges = dose_score_edges(spec);
    est.mu_hat = Matrix(n, kDoseBins);
    est.pi_hat = Matrix(n, kDoseBins);
    for (std::size_t i = 0; i < n; ++i) {
      const double u1 = latents.u(i, 0);
      const double u2 = latents.u(i, 1);
      const double base = u1 + 0.5 * u2 * u2;
      double prev_cdf = 0.0;
      for (std::size_t t = 0; t < kDoseBins; ++t) {
        est.mu_hat(i, t) = m[t] + base;
        const double upper_cdf =
            t + 1 < kDoseBins
                ? normal_cdf((edges[t] - spec.confounding * u1) /
                             spec.t_noise_sd)
                : 1.0;
        est.pi_hat(i, t) = upper_cdf - prev_cdf;
        prev_cdf = upper_cdf;
      }
    }
  }
  est.f_hat = latents.u;
  return est;
}

}  // namespace gpi
