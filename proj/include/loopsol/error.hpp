#pragma once

#include <stdexcept>
#include <string>

namespace loopsol {

enum class ErrKind {
  DegenerateCurve,
  NonConvergence,
  BadModulus,
  PoleProximity,
  ZeroDenominator,
  SingularMatrix,
  ThetaDivisor,
  ConstraintViolated,
  OrderingAmbiguity,
  BranchPointDegeneracy,
  PoleOnPath,
  ConfigError,
};

const char* to_string(ErrKind k);

// Single exception type for all numerical failure modes. The kind is what
// callers (and the CLI exit-code mapping) dispatch on; the message is for
// humans.
class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}
  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline const char* to_string(ErrKind k) {
  switch (k) {
    case ErrKind::DegenerateCurve: return "DegenerateCurve";
    case ErrKind::NonConvergence: return "NonConvergence";
    case ErrKind::BadModulus: return "BadModulus";
    case ErrKind::PoleProximity: return "PoleProximity";
    case ErrKind::ZeroDenominator: return "ZeroDenominator";
    case ErrKind::SingularMatrix: return "SingularMatrix";
    case ErrKind::ThetaDivisor: return "ThetaDivisor";
    case ErrKind::ConstraintViolated: return "ConstraintViolated";
    case ErrKind::OrderingAmbiguity: return "OrderingAmbiguity";
    case ErrKind::BranchPointDegeneracy: return "BranchPointDegeneracy";
    case ErrKind::PoleOnPath: return "PoleOnPath";
    case ErrKind::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace loopsol
