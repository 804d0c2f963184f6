#pragma once

#include <cstdint>
#include <vector>

#include "gpi/dataset.hpp"
#include "gpi/nuisance.hpp"
#include "gpi/structural.hpp"

namespace gpi {

enum class DgpName {
  BinaryAtt,        // A
  MultilevelApo,    // B
  PairwiseOrdinal,  // C
};

DgpName parse_dgp_name(const std::string& label);  // "A" / "B" / "C"
std::string dgp_label(DgpName name);

/// Synthetic data-generating processes with brute-force ground truth.
/// Latent confounders U are embedded in R through a seeded random orthogonal
/// map, so R deterministically encodes U while dim(U) << d_r.
struct DgpSpec {
  DgpName name = DgpName::BinaryAtt;
  std::size_t n = 4000;
  std::size_t d_r = 16;
  std::size_t d_u = 2;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;

  // DGP A knobs.
  double effect = 1.0;        // tau
  double confounding = 1.5;   // a: propensity loading on U1 (A) / score on U1 (B)
  double z_weight = 0.0;      // b: propensity loading on Z1 (A)

  // DGP B knobs.
  double t_noise_sd = 1.0;    // treatment-score noise carried inside R

  // DGP C knobs.
  std::size_t j_args = 64;

  void validate() const;
};

struct OracleRecord {
  double att = 0.0;                  // A
  std::vector<double> apo;           // B: one entry per bin
  std::vector<double> beta;          // C: centered element effects
};

struct GeneratedCausal {
  CausalDataset ds;
  OracleRecord truth;
  Matrix u;                    // n x d_u latents (for oracle checks)
  std::vector<double> t_raw;   // continuous treatment score (B only)
};

struct GeneratedPairwise {
  PairwiseDataset data;
  OracleRecord truth;
  Matrix u;  // J x d_u
};

/// DGP A (binary ATT) and DGP B (10-level dose response).
GeneratedCausal generate_causal(const DgpSpec& spec);
/// DGP C (pairwise ordinal comparisons).
GeneratedPairwise generate_pairwise(const DgpSpec& spec);

/// Closed-form nuisance values for a dataset produced by generate_causal
/// with the same spec. The latents are regenerated from the seed and checked
/// against the dataset; a mismatch raises a provenance error.
NuisanceEstimates oracle_nuisances(const DgpSpec& spec,
                                   const CausalDataset& ds);

/// The orthogonal embedding used for the given spec (d_r x d_r); its first
/// d_u columns carry U, so Q^T recovers the latents from R.
Matrix embedding_matrix(const DgpSpec& spec);

/// Tabulated m(t) for DGP B.
std::vector<double> dose_response_table();

/// DGP B decile edges of the population treatment-score distribution.
std::vector<double> dose_score_edges(const DgpSpec& spec);

/// True per-element effects (uncentered) and the confounded latent shift
/// pattern used by DGP C.
double pairwise_element_effect(int element);
double pairwise_confounder_shift(int element);

}  // namespace gpi
