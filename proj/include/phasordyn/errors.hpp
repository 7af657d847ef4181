#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace phasordyn {

/// Base class of all domain errors. `component()` names the subsystem that
/// raised the error ("grid", "io", "steady_state", "solver", "scenarios").
class Error : public std::runtime_error {
public:
    Error(std::string component, const std::string& message)
        : std::runtime_error(message), component_(std::move(component)) {}

    const std::string& component() const noexcept { return component_; }

private:
    std::string component_;
};

/// Unknown owner, variable or parameter name.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Malformed grid/state document; the message carries the offending path.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A Newton iteration failed to reach its tolerance. Carries the best
/// iterate seen so the caller can inspect or restart from it.
class ConvergenceError : public Error {
public:
    ConvergenceError(std::string component, const std::string& message,
                     Eigen::VectorXd best_iterate, double residual_norm)
        : Error(std::move(component), message),
          best_iterate(std::move(best_iterate)),
          residual_norm(residual_norm) {}

    Eigen::VectorXd best_iterate;
    double residual_norm;
};

/// Rank-deficient Jacobian, typically a grid without a phase reference.
class SingularJacobianError : public Error {
public:
    using Error::Error;
};

}  // namespace phasordyn
