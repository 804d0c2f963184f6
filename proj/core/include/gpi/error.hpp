#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gpi {

enum class ErrorKind {
  Dimension,
  Validation,
  Config,
  Io,
  Format,
  Partition,
  DegenerateTreatment,
  TrainingDiverged,
  Coverage,
  Provenance,
  EstimandUndefined,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Partition: return "partition";
    case ErrorKind::DegenerateTreatment: return "degenerate-treatment";
    case ErrorKind::TrainingDiverged: return "training-diverged";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Provenance: return "provenance";
    case ErrorKind::EstimandUndefined: return "estimand-undefined";
  }
  return "unknown";
}

/// All recoverable failures surface as gpi::Error. `stage` names the module
/// or operation that raised it; the CLI maps kinds to exit codes
/// (training-diverged -> 3, everything else -> 2).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& message)
      : std::runtime_error(message), kind_(kind), stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  int exit_code() const noexcept {
    return kind_ == ErrorKind::TrainingDiverged ? 3 : 2;
  }

 private:
  ErrorKind kind_;
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& stage,
                              const std::string& message) {
  throw Error(kind, stage, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& stage,
                    const std::string& message) {
  if (!condition) fail(kind, stage, message);
}

}  // namespace gpi
