#pragma once

#include <stdexcept>
#include <string>

namespace dnl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define DNL_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    using Error::Error;                                          \
    const char* kind() const noexcept override { return #Name; } \
  };

DNL_DEFINE_ERROR(ConfigError)
DNL_DEFINE_ERROR(RegimeError)
DNL_DEFINE_ERROR(DegenerateError)
DNL_DEFINE_ERROR(DomainError)
DNL_DEFINE_ERROR(DomainMismatch)
DNL_DEFINE_ERROR(SingularError)
DNL_DEFINE_ERROR(ResolutionError)
DNL_DEFINE_ERROR(MassError)
DNL_DEFINE_ERROR(SearchFailure)
DNL_DEFINE_ERROR(GridMismatch)
DNL_DEFINE_ERROR(PreconditionError)
DNL_DEFINE_ERROR(WindowError)
DNL_DEFINE_ERROR(QualityError)
DNL_DEFINE_ERROR(MissingArtifact)

#undef DNL_DEFINE_ERROR

/// Raised when the resolvent solver cannot reach its residual tolerance.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double last_residual, int step = -1)
      : Error(what), last_residual_(last_residual), step_(step) {}
  const char* kind() const noexcept override { return "NonConvergence"; }
  double last_residual() const noexcept { return last_residual_; }
  /// Index of the failing time step, or -1 for a standalone resolvent call.
  int step() const noexcept { return step_; }

 private:
  double last_residual_;
  int step_;
};

}  // namespace dnl
