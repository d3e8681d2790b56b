#pragma once

#include <stdexcept>
#include <string>

namespace psoctseg {

/// Root of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PSOCTSEG_ERROR(Name)            \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

PSOCTSEG_ERROR(ContourOrderViolation)
PSOCTSEG_ERROR(OutOfBounds)
PSOCTSEG_ERROR(FormatError)
PSOCTSEG_ERROR(ShapeMismatch)
PSOCTSEG_ERROR(InfeasibleGeometry)
PSOCTSEG_ERROR(ScaleOutOfRange)
PSOCTSEG_ERROR(MissingInterface)
PSOCTSEG_ERROR(EmptyBoundary)
PSOCTSEG_ERROR(TooFewPatients)
PSOCTSEG_ERROR(MissingCritic)
PSOCTSEG_ERROR(Divergence)
PSOCTSEG_ERROR(ConfigError)

#undef PSOCTSEG_ERROR

/// A loss term evaluated to NaN or infinity; `term()` names it.
class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::string term)
      : Error("non-finite loss term: " + term), term_(std::move(term)) {}
  [[nodiscard]] const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace psoctseg
