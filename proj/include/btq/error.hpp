#pragma once
// Typed error taxonomy shared by every module. Each failure mode that a
// caller can meaningfully distinguish gets its own kind; everything carries a
// human-readable message with the offending quantities.

#include <stdexcept>
#include <string>

namespace btq {

enum class ErrorKind {
  NotAlmostComplex,       // J*J != -I
  NotSymplectic,          // matrix fails to preserve the symplectic form
  NotPositive,            // required positive-definiteness fails
  SingularInterpolation,  // averaged-structure operator not invertible
  ZeroDeterminant,        // determinant vanished along a tracked family
  BranchJump,             // argument increment too large to track a sqrt branch
  DimensionMismatch,      // incompatible sizes / unsupported degree
  TailBoundViolated,      // quadrature box too small for the requested tol
  ConvergenceFailure,     // iterative refinement failed to reach tolerance
  DegenerateFixedPoint,   // I - dphi (or its restriction) nearly singular
  DegenerateOnN,          // restriction to the normal subspace degenerate
  HolomorphyFailure,      // basis section fails the holomorphy residual check
  PeriodicityFailure,     // basis section fails quasi-periodicity
  TruncationTooSmall,     // lattice sum truncation insufficient for tolerance
  GridTooCoarse,          // quadrature grid below the resolution floor
  LiftInconsistent,       // map admits no consistent line-bundle lift
  UsageError,             // bad CLI / config input
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotAlmostComplex: return "NotAlmostComplex";
    case ErrorKind::NotSymplectic: return "NotSymplectic";
    case ErrorKind::NotPositive: return "NotPositive";
    case ErrorKind::SingularInterpolation: return "SingularInterpolation";
    case ErrorKind::ZeroDeterminant: return "ZeroDeterminant";
    case ErrorKind::BranchJump: return "BranchJump";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::TailBoundViolated: return "TailBoundViolated";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::DegenerateFixedPoint: return "DegenerateFixedPoint";
    case ErrorKind::DegenerateOnN: return "DegenerateOnN";
    case ErrorKind::HolomorphyFailure: return "HolomorphyFailure";
    case ErrorKind::PeriodicityFailure: return "PeriodicityFailure";
    case ErrorKind::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::LiftInconsistent: return "LiftInconsistent";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace btq
