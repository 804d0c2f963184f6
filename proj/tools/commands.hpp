#pragma once

#include <string>

#include "json.hpp"

namespace gpi::cli {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Resolved per-command configuration: built-in defaults, overridden by the
/// --config file, overridden by explicitly passed flags.
int run_simulate(const Json& cfg);
int run_estimate_att(const Json& cfg);
int run_estimate_dose(const Json& cfg);
int run_fit_structural(const Json& cfg);
int run_balance(const Json& cfg);

/// FNV-1a hex digest of the canonical (sorted-key) config dump.
std::string config_hash(const Json& cfg);

}  // namespace gpi::cli
