#include "phasordyn/operation_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "phasordyn/assembly.hpp"
#include "phasordyn/errors.hpp"

namespace phasordyn {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

void require_valid(const PowerGrid& grid) {
    const auto violations = validate(grid);
    if (!is_valid(violations)) {
        for (const auto& v : violations) {
            if (v.severity == Severity::error) {
                throw Error("steady_state", "invalid grid: " + v.message);
            }
        }
    }
}

// Damped Newton with Armijo backtracking, λ ∈ {1, 1/2, ..., 1/256}.
// Stagnation rule: less than a factor-1e3 residual reduction over 20
// iterations aborts with the best iterate.
Eigen::VectorXd damped_newton(const RhsFunction& rhs, Eigen::VectorXd x, double tol,
                              int max_iterations) {
    Eigen::VectorXd f = rhs(0.0, x);
    if (!f.allFinite()) {
        throw ConvergenceError("steady_state", "residual not finite at the initial guess", x,
                               std::numeric_limits<double>::infinity());
    }
    double fnorm = inf_norm(f);
    Eigen::VectorXd best_x = x;
    double best_norm = fnorm;
    double checkpoint_norm = fnorm;

    // Rank-revealing factorization; deficiency means the grid has a free
    // phase gauge (or worse), which must be reported rather than returned
    // with an arbitrary gauge.
    auto factor_checked = [&rhs](const Eigen::VectorXd& at) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(fd_jacobian(rhs, 0.0, at));
        lu.setThreshold(1e-6);
        if (!lu.isInvertible()) {
            throw SingularJacobianError(
                "steady_state",
                "Jacobian is rank deficient (rank " + std::to_string(lu.rank()) + " of " +
                    std::to_string(lu.rows()) +
                    "); the grid may lack a phase reference (slack or PLL node); "
                    "consider method=dynamic or adding a reference node");
        }
        return lu;
    };

    for (int iter = 0; iter < max_iterations; ++iter) {
        if (fnorm <= tol) {
            factor_checked(x);  // converged: still refuse a gauge-free grid
            return x;
        }

        const Eigen::FullPivLU<Eigen::MatrixXd> lu = factor_checked(x);
        const Eigen::VectorXd direction = lu.solve(-f);

        bool stepped = false;
        for (int k = 0; k <= 8; ++k) {
            const double lambda = std::ldexp(1.0, -k);
            Eigen::VectorXd x_trial = x + lambda * direction;
            Eigen::VectorXd f_trial = rhs(0.0, x_trial);
            if (!f_trial.allFinite()) continue;
            const double trial_norm = inf_norm(f_trial);
            if (trial_norm <= (1.0 - 1e-4 * lambda) * fnorm) {
                x = std::move(x_trial);
                f = std::move(f_trial);
                fnorm = trial_norm;
                stepped = true;
                break;
            }
        }
        if (!stepped) {
            throw ConvergenceError("steady_state",
                                   "Newton line search failed (no damping factor reduces the "
                                   "residual); best ‖f‖∞ = " + std::to_string(best_norm),
                                   best_x, best_norm);
        }
        if (fnorm < best_norm) {
            best_norm = fnorm;
            best_x = x;
        }
        if ((iter + 1) % 20 == 0) {
            if (fnorm > 1e-3 * checkpoint_norm) {
                throw ConvergenceError("steady_state",
                                       "Newton stagnated (residual reduction below 1e3 over 20 "
                                       "iterations); best ‖f‖∞ = " + std::to_string(best_norm),
                                       best_x, best_norm);
            }
            checkpoint_norm = fnorm;
        }
    }
    if (fnorm <= tol) {
        factor_checked(x);
        return x;
    }
    throw ConvergenceError("steady_state",
                           "Newton did not converge within the iteration limit; best ‖f‖∞ = " +
                               std::to_string(best_norm),
                           best_x, best_norm);
}

std::vector<int> frequency_rows(const StateLayout& layout) {
    std::vector<int> rows;
    for (int i = 0; i < layout.size(); ++i) {
        if (layout.entry(i).var == "ω" && layout.entry(i).differential) rows.push_back(i);
    }
    return rows;
}

Eigen::VectorXd dynamic_march(const PowerGrid& grid, const RhsFunction& rhs, Eigen::VectorXd x,
                              const OpOptions& options) {
    // March the index-1 DAE itself with extra damping pulling the frequency
    // states toward zero; the damping vanishes at any true equilibrium, so
    // the fixed points are unchanged.
    const auto omega_rows = frequency_rows(*rhs.layout);
    RhsFunction damped = rhs;
    const double damping = options.dynamic_damping;
    damped.f = [inner = rhs.f, omega_rows, damping](double t, const Eigen::VectorXd& x_in,
                                                    Eigen::VectorXd& out) {
        inner(t, x_in, out);
        for (int row : omega_rows) out[row] -= damping * x_in[row];
    };

    SolverOptions march_opts;
    march_opts.method = StepMethod::trbdf2;

    double t = 0.0;
    double chunk = 1.0;
    double fnorm = inf_norm(rhs(0.0, x));
    while (t < options.dynamic_horizon && fnorm > options.tol) {
        const double t_next = std::min(t + chunk, options.dynamic_horizon);
        try {
            Trajectory traj = integrate(damped, x, {t, t_next}, march_opts);
            x = traj.x.back();
        } catch (const IntegrationError& e) {
            throw ConvergenceError("steady_state",
                                   std::string("dynamic operation-point search failed: ") +
                                       e.what(),
                                   e.partial.x.empty() ? x : e.partial.x.back(), fnorm);
        }
        t = t_next;
        chunk = std::min(chunk * 2.0, 128.0);
        fnorm = inf_norm(rhs(0.0, x));
    }

    // One Newton polish pass, kept only when it improves the residual.
    Eigen::VectorXd f = rhs(0.0, x);
    Eigen::MatrixXd jac = fd_jacobian(rhs, 0.0, x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    Eigen::VectorXd x_polished = x + lu.solve(-f);
    if (x_polished.allFinite()) {
        Eigen::VectorXd f_polished = rhs(0.0, x_polished);
        if (f_polished.allFinite() && inf_norm(f_polished) < inf_norm(f)) {
            x = std::move(x_polished);
            f = std::move(f_polished);
        }
    }
    const double final_norm = inf_norm(f);
    if (final_norm > options.tol) {
        throw ConvergenceError("steady_state",
                               "dynamic method did not reach the residual target within t = " +
                                   std::to_string(options.dynamic_horizon) + " s (‖f‖∞ = " +
                                   std::to_string(final_norm) + ")",
                               x, final_norm);
    }
    return x;
}

}  // namespace

State default_guess(const PowerGrid& grid) {
    auto layout = build_layout(grid);
    State state(layout);
    for (const auto& n : grid.nodes()) {
        Phasor u{1.0, 0.0};
        if (const auto* slack = std::get_if<SlackAlgebraic>(&n.model)) u = slack->U();
        state.set_voltage(n.name, u);
        const auto names = node_internal_names(n.model);
        const auto values = node_initial_internals(n.model, u);
        for (size_t k = 0; k < names.size(); ++k) {
            state.set(n.name, std::string(names[k]), values[k]);
        }
    }
    for (const auto& l : grid.lines()) {
        const auto names = line_internal_names(l.model);
        if (names.empty()) continue;
        const auto values =
            line_initial_internals(l.model, state.voltage(l.from), state.voltage(l.to));
        for (size_t k = 0; k < names.size(); ++k) {
            state.set(l.name, std::string(names[k]), values[k]);
        }
    }
    return state;
}

State find_operationpoint(const PowerGrid& grid, OpMethod method,
                          const std::optional<State>& guess, const OpOptions& options) {
    require_valid(grid);
    const RhsFunction rhs = build_rhs(grid);

    Eigen::VectorXd x0;
    if (guess.has_value()) {
        if (!(guess->layout() == *rhs.layout)) {
            throw Error("steady_state", "guess layout does not match the grid layout");
        }
        x0 = guess->values();
    } else {
        x0 = default_guess(grid).values();
    }

    Eigen::VectorXd solution;
    switch (method) {
        case OpMethod::rootfind:
        case OpMethod::nlsolve:  // alias of rootfind
            solution = damped_newton(rhs, std::move(x0), options.tol, options.max_iterations);
            break;
        case OpMethod::dynamic: {
            State consistent = reinit_algebraic(grid, State(rhs.layout, std::move(x0)));
            solution = dynamic_march(grid, rhs, consistent.values(), options);
            break;
        }
    }
    return State(rhs.layout, std::move(solution));
}

State reinit_algebraic(const PowerGrid& grid, const State& x) {
    require_valid(grid);
    const RhsFunction rhs = build_rhs(grid);
    if (!(x.layout() == *rhs.layout)) {
        throw Error("steady_state", "state layout does not match the grid layout");
    }

    std::vector<int> algebraic;
    for (int i = 0; i < rhs.size(); ++i) {
        if (!rhs.mass[static_cast<size_t>(i)]) algebraic.push_back(i);
    }
    const int m = static_cast<int>(algebraic.size());
    if (m == 0) return x;

    constexpr double kTol = 1e-10;
    Eigen::VectorXd values = x.values();
    auto algebraic_residual = [&](const Eigen::VectorXd& full) {
        Eigen::VectorXd f = rhs(0.0, full);
        Eigen::VectorXd g(m);
        for (int a = 0; a < m; ++a) g[a] = f[algebraic[static_cast<size_t>(a)]];
        return g;
    };

    Eigen::VectorXd g = algebraic_residual(values);
    double gnorm = g.allFinite() ? inf_norm(g) : std::numeric_limits<double>::infinity();
    if (gnorm <= kTol) return x;  // already consistent, bit-identical return

    for (int iter = 0; iter < 50; ++iter) {
        Eigen::MatrixXd full_jac = fd_jacobian(rhs, 0.0, values);
        Eigen::MatrixXd reduced(m, m);
        for (int a = 0; a < m; ++a) {
            for (int b = 0; b < m; ++b) {
                reduced(a, b) = full_jac(algebraic[static_cast<size_t>(a)],
                                         algebraic[static_cast<size_t>(b)]);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(reduced);
        lu.setThreshold(1e-6);
        if (!lu.isInvertible()) {
            throw ConvergenceError("steady_state",
                                   "algebraic reinitialization failed: singular constraint "
                                   "Jacobian (constraints may be unsatisfiable, e.g. an islanded "
                                   "constant-power node)",
                                   values, gnorm);
        }
        const Eigen::VectorXd direction = lu.solve(-g);

        bool stepped = false;
        for (int k = 0; k <= 8; ++k) {
            const double lambda = std::ldexp(1.0, -k);
            Eigen::VectorXd trial = values;
            for (int a = 0; a < m; ++a) {
                trial[algebraic[static_cast<size_t>(a)]] += lambda * direction[a];
            }
            Eigen::VectorXd g_trial = algebraic_residual(trial);
            if (!g_trial.allFinite()) continue;
            const double trial_norm = inf_norm(g_trial);
            if (trial_norm <= (1.0 - 1e-4 * lambda) * gnorm || trial_norm <= kTol) {
                values = std::move(trial);
                g = std::move(g_trial);
                gnorm = trial_norm;
                stepped = true;
                break;
            }
        }
        if (!stepped) {
            throw ConvergenceError("steady_state",
                                   "algebraic reinitialization stalled at ‖g‖∞ = " +
                                       std::to_string(gnorm),
                                   values, gnorm);
        }
        if (gnorm <= kTol) return State(x.layout_ptr(), std::move(values));
    }
    throw ConvergenceError("steady_state",
                           "algebraic reinitialization did not converge (‖g‖∞ = " +
                               std::to_string(gnorm) + ")",
                           values, gnorm);
}

}  // namespace phasordyn
