#pragma once

#include <stdexcept>
#include <string>

namespace cpml {

// Base of every error raised by the library. Each failure mode has its own
// subclass so callers can catch precisely what they can recover from.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CPML_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// field
CPML_DEFINE_ERROR(ZeroInverse);
CPML_DEFINE_ERROR(OutOfRange);
CPML_DEFINE_ERROR(DimensionMismatch);
CPML_DEFINE_ERROR(InvalidParameter);

// quantize / sigmoid_approx
CPML_DEFINE_ERROR(OverflowRisk);
CPML_DEFINE_ERROR(SingularNormalEquations);

// lagrange
CPML_DEFINE_ERROR(InsufficientWorkers);
CPML_DEFINE_ERROR(FieldTooSmall);
CPML_DEFINE_ERROR(NotEnoughPoints);
CPML_DEFINE_ERROR(DuplicateEvaluationPoint);
CPML_DEFINE_ERROR(NotEnoughResults);
CPML_DEFINE_ERROR(FormatError);

// trainer
CPML_DEFINE_ERROR(QuantizationOverflow);

// runtime
CPML_DEFINE_ERROR(WorkerUnreachable);
CPML_DEFINE_ERROR(RoundTimeout);
CPML_DEFINE_ERROR(ProtocolViolation);

// mpc_baseline
CPML_DEFINE_ERROR(NotEnoughShares);
CPML_DEFINE_ERROR(InsufficientParties);

// cli
CPML_DEFINE_ERROR(FileNotFound);

#undef CPML_DEFINE_ERROR

}  // namespace cpml
