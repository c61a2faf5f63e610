#ifndef DVFP_ERROR_HPP
#define DVFP_ERROR_HPP

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace dvfp {

/// Cut-off value for the full-history model, and the usual sentinel for unbounded quantities.
inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad argument: non-finite input, shape mismatch, malformed file.
class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class OutOfDomain : public Error {
  public:
    using Error::Error;
};

/// A parameter set violates one of the rate validity inequalities.
class OutOfValidity : public Error {
  public:
    using Error::Error;
};

/// Comparison equation has no positive decay rate (a <= b, lambda1 <= lambda2).
class NoPositiveRate : public Error {
  public:
    using Error::Error;
};

/// The particle integrator produced a non-finite state.
class Divergence : public Error {
  public:
    Divergence(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

  private:
    std::size_t step_;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what + " (residual " + std::to_string(last_residual) + ")"),
          residual_(last_residual) {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

/// Broken internal invariant, e.g. a history buffer that does not cover the
/// delay window.
class InternalError : public Error {
  public:
    using Error::Error;
};

/// Process exit codes used by the command line tool.
enum class ExitCode : int { ok = 0, usage = 1, validity = 2, numerical = 3 };

}  // namespace dvfp

#endif
