#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "phasordyn/assembly.hpp"
#include "phasordyn/errors.hpp"

namespace phasordyn {

enum class StepMethod { implicit_euler, trbdf2 };

struct SolverOptions {
    double rtol = 1e-6;
    double atol = 1e-6;
    double h_init = 1e-3;
    double h_min = 1e-10;
    double h_max = 0.0;  // 0: whole tspan length
    long max_steps = 1000000;
    StepMethod method = StepMethod::trbdf2;
    double newton_tol = 1e-9;
    int newton_max_iter = 10;
};

struct SolverStats {
    long accepted = 0;
    long rejected = 0;
    long newton_iterations = 0;
    long rhs_evaluations = 0;
    long jacobian_evaluations = 0;
    long lu_factorizations = 0;
};

/// Time-ordered samples with linear dense output between them. Evaluation at
/// a sample point reproduces the sample exactly.
struct Trajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::shared_ptr<const StateLayout> layout;

    double t_begin() const { return t.front(); }
    double t_end() const { return t.back(); }
    Eigen::VectorXd at(double time) const;
};

class IntegrationError : public Error {
public:
    IntegrationError(const std::string& message, Trajectory partial, SolverStats stats)
        : Error("solver", message), partial(std::move(partial)), stats(stats) {}

    Trajectory partial;
    SolverStats stats;
};

/// Dense forward-difference Jacobian of rhs at (t, x); column j is perturbed
/// by sqrt(machine eps) * max(|x_j|, 1e-3).
Eigen::MatrixXd fd_jacobian(const RhsFunction& rhs, double t, const Eigen::VectorXd& x,
                            SolverStats* stats = nullptr);

/// One implicit Euler step: solves M(x - x_n) = h f(t_n + h, x) by Newton.
/// Stiffly accurate, order 1, works with singular M. Throws ConvergenceError
/// if Newton fails.
Eigen::VectorXd step_implicit_euler(const RhsFunction& rhs, const Eigen::VectorXd& x_n,
                                    double t_n, double h,
                                    const SolverOptions& opts = {});

/// One TR-BDF2 step (γ = 2 − √2): trapezoidal substep to t_n + γh, then BDF2
/// to t_n + h. Stiffly accurate, order 2. Returns the new state and the
/// smoothed embedded error estimate.
std::pair<Eigen::VectorXd, Eigen::VectorXd> step_trbdf2(const RhsFunction& rhs,
                                                        const Eigen::VectorXd& x_n, double t_n,
                                                        double h,
                                                        const SolverOptions& opts = {});

/// Adaptive integration of M·ẋ = f over tspan. Requires x0 to satisfy the
/// algebraic constraints to 1e-6 (use reinit_algebraic first). Local error
/// per accepted step obeys the mixed tolerance over differential components.
/// Throws IntegrationError (carrying the partial trajectory) on step-size
/// underflow, repeated Newton failure or step-count overflow.
Trajectory integrate(const RhsFunction& rhs, const Eigen::VectorXd& x0,
                     std::pair<double, double> tspan, const SolverOptions& opts = {},
                     SolverStats* stats = nullptr);

}  // namespace phasordyn
