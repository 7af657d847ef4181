#include "phasordyn/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace phasordyn {

namespace {

constexpr double kGamma = 2.0 - std::numbers::sqrt2;  // TR-BDF2 stage split
constexpr double kD = kGamma / 2.0;  // shared implicit coefficient of both stages

double inf_norm(const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

// Shared Newton machinery for the stage equations
//   R(x) = M∘(x − c) · inv_dh − f(t_stage, x) − k = 0,
// scaled so algebraic rows enter as the plain residual g(x): accepted stages
// therefore satisfy ‖g‖∞ ≤ newton_tol independent of the step size.
struct StageWorkspace {
    const RhsFunction& rhs;
    SolverStats& stats;
    Eigen::VectorXd mass;  // 1.0 differential, 0.0 algebraic
    int n_differential = 0;

    Eigen::MatrixXd jacobian;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool have_jacobian = false;
    bool jacobian_fresh = false;  // evaluated at the current step's base point
    double factored_inv_dh = std::numeric_limits<double>::quiet_NaN();
    bool slow_rate_seen = false;

    explicit StageWorkspace(const RhsFunction& rhs_in, SolverStats& stats_in)
        : rhs(rhs_in), stats(stats_in), mass(rhs_in.size()) {
        for (int i = 0; i < rhs.size(); ++i) {
            mass[i] = rhs.mass[static_cast<size_t>(i)] ? 1.0 : 0.0;
            n_differential += rhs.mass[static_cast<size_t>(i)] ? 1 : 0;
        }
    }

    void refresh_jacobian(double t, const Eigen::VectorXd& x) {
        jacobian = fd_jacobian(rhs, t, x, &stats);
        have_jacobian = true;
        jacobian_fresh = true;
        factored_inv_dh = std::numeric_limits<double>::quiet_NaN();
    }

    void factor(double inv_dh) {
        if (factored_inv_dh == inv_dh) return;
        Eigen::MatrixXd w = -jacobian;
        w.diagonal().array() += inv_dh * mass.array();
        lu.compute(w);
        factored_inv_dh = inv_dh;
        ++stats.lu_factorizations;
    }

    Eigen::VectorXd residual(double t_stage, const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                             double inv_dh, const Eigen::VectorXd* k) {
        Eigen::VectorXd f(rhs.size());
        rhs.f(t_stage, x, f);
        ++stats.rhs_evaluations;
        Eigen::VectorXd r =
            (mass.array() * (x - c).array() * inv_dh).matrix() - f;
        if (k != nullptr) r -= *k;
        return r;
    }

    double algebraic_norm(const Eigen::VectorXd& r) const {
        double worst = 0.0;
        for (int i = 0; i < r.size(); ++i) {
            if (mass[i] == 0.0) worst = std::max(worst, std::abs(r[i]));
        }
        return worst;
    }

    // Solves one stage equation in place. Returns true on convergence; x then
    // holds the converged point and r_final its (small) residual.
    bool solve_stage(double t_stage, const Eigen::VectorXd& c, double inv_dh,
                     const Eigen::VectorXd* k, Eigen::VectorXd& x, Eigen::VectorXd& r_final,
                     const SolverOptions& opts) {
        double prev_dn = std::numeric_limits<double>::infinity();
        double rate = 0.0;
        for (int iter = 0;; ++iter) {
            Eigen::VectorXd r = residual(t_stage, x, c, inv_dh, k);
            if (!r.allFinite()) return false;
            const double rnorm = inf_norm(r);
            const bool displacement_ok =
                iter > 0 && rate < 1.0 && std::isfinite(prev_dn) &&
                rate / (1.0 - rate) * prev_dn <= 0.1 * opts.newton_tol &&
                algebraic_norm(r) <= opts.newton_tol;
            if (rnorm <= opts.newton_tol || displacement_ok) {
                r_final = std::move(r);
                return true;
            }
            if (iter >= opts.newton_max_iter) return false;
            Eigen::VectorXd delta = lu.solve(-r);
            if (!delta.allFinite()) return false;
            x += delta;
            ++stats.newton_iterations;
            const double dn = inf_norm(delta);
            if (std::isfinite(prev_dn) && prev_dn > 0.0) {
                rate = dn / prev_dn;
                if (rate > 0.5) slow_rate_seen = true;
                if (iter >= 2 && rate > 2.0) return false;  // diverging
            }
            prev_dn = dn;
        }
    }
};

struct StepOutcome {
    bool converged = false;
    Eigen::VectorXd x;
    Eigen::VectorXd error_estimate;  // zeroed algebraic rows; empty for IE path users compute it
    Eigen::VectorXd f_new;           // f at (t_n + h, x)
};

// One implicit Euler stage: M(x − x_n) = h f(t_n + h, x).
StepOutcome attempt_implicit_euler(StageWorkspace& ws, const Eigen::VectorXd& x_n, double t_n,
                                   double h, const SolverOptions& opts) {
    StepOutcome out;
    const double inv_dh = 1.0 / h;
    ws.factor(inv_dh);
    Eigen::VectorXd x = x_n;
    Eigen::VectorXd r_final;
    if (!ws.solve_stage(t_n + h, x_n, inv_dh, nullptr, x, r_final, opts)) return out;
    out.converged = true;
    out.f_new = (ws.mass.array() * (x - x_n).array() * inv_dh).matrix() - r_final;
    out.x = std::move(x);
    return out;
}

// TR-BDF2: trapezoidal substep to t_n + γh, BDF2 substep to t_n + h, both
// sharing the iteration matrix M/(d·h) − J with d = γ/2. The embedded error
// estimate uses the third-order companion weights and is smoothed by one
// extra back-substitution.
StepOutcome attempt_trbdf2(StageWorkspace& ws, const Eigen::VectorXd& x_n, double t_n, double h,
                           const Eigen::VectorXd& f_n, const SolverOptions& opts) {
    StepOutcome out;
    const double inv_dh = 1.0 / (kD * h);
    ws.factor(inv_dh);

    // Stage 1 (TR): M(x_γ − x_n) = (γh/2)(f_n + f(x_γ)).
    Eigen::VectorXd x_gamma = x_n;
    Eigen::VectorXd r_gamma;
    if (!ws.solve_stage(t_n + kGamma * h, x_n, inv_dh, &f_n, x_gamma, r_gamma, opts)) return out;
    const Eigen::VectorXd f_gamma =
        (ws.mass.array() * (x_gamma - x_n).array() * inv_dh).matrix() - f_n - r_gamma;

    // Stage 2 (BDF2): M(x − c1·x_γ + c2·x_n) = d·h·f(x).
    const double c1 = 1.0 / (kGamma * (2.0 - kGamma));
    const double c2 = (1.0 - kGamma) * (1.0 - kGamma) / (kGamma * (2.0 - kGamma));
    const Eigen::VectorXd c = c1 * x_gamma - c2 * x_n;
    Eigen::VectorXd x = x_gamma;
    Eigen::VectorXd r_new;
    if (!ws.solve_stage(t_n + h, c, inv_dh, nullptr, x, r_new, opts)) return out;
    Eigen::VectorXd f_new = (ws.mass.array() * (x - c).array() * inv_dh).matrix() - r_new;

    // b − b̂ for c = [0, γ, 1]: ((√2−1)/3, −1/3, (2−√2)/3).
    const double w1 = (std::numbers::sqrt2 - 1.0) / 3.0;
    const double w2 = -1.0 / 3.0;
    const double w3 = (2.0 - std::numbers::sqrt2) / 3.0;
    const Eigen::VectorXd e_raw = h * (w1 * f_n + w2 * f_gamma + w3 * f_new);
    Eigen::VectorXd est = ws.lu.solve((ws.mass.array() * e_raw.array()).matrix()) * inv_dh;
    if (!est.allFinite()) est = e_raw;
    for (int i = 0; i < est.size(); ++i) {
        if (ws.mass[i] == 0.0) est[i] = 0.0;
    }

    out.converged = true;
    out.x = std::move(x);
    out.error_estimate = std::move(est);
    out.f_new = std::move(f_new);
    return out;
}

// Error measured per unit step (est/h against the mixed tolerance) so the
// accumulated error over the whole span stays near the tolerance itself.
double error_norm(const Eigen::VectorXd& est, double h, const Eigen::VectorXd& x_old,
                  const Eigen::VectorXd& x_new, const Eigen::VectorXd& mass,
                  int n_differential, const SolverOptions& opts) {
    if (n_differential == 0) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < est.size(); ++i) {
        if (mass[i] == 0.0) continue;
        const double scale = opts.atol + opts.rtol * std::max(std::abs(x_old[i]), std::abs(x_new[i]));
        const double q = est[i] / (h * scale);
        acc += q * q;
    }
    return std::sqrt(acc / n_differential);
}

double controller_factor(double err, int order) {
    if (err <= 0.0) return 5.0;
    return std::clamp(0.9 * std::pow(err, -1.0 / (order + 1)), 0.2, 5.0);
}

}  // namespace

Eigen::VectorXd Trajectory::at(double time) const {
    const double span = t.back() - t.front();
    const double slack = 1e-9 * std::max(1.0, std::abs(span));
    if (time < t.front() - slack || time > t.back() + slack) {
        throw Error("solver", "time " + std::to_string(time) + " outside trajectory range [" +
                                  std::to_string(t.front()) + ", " + std::to_string(t.back()) + "]");
    }
    const double tq = std::clamp(time, t.front(), t.back());
    auto it = std::lower_bound(t.begin(), t.end(), tq);
    if (it != t.end() && *it == tq) {
        return x[static_cast<size_t>(it - t.begin())];
    }
    const size_t hi = static_cast<size_t>(it - t.begin());
    const size_t lo = hi - 1;
    const double w = (tq - t[lo]) / (t[hi] - t[lo]);
    return (1.0 - w) * x[lo] + w * x[hi];
}

Eigen::MatrixXd fd_jacobian(const RhsFunction& rhs, double t, const Eigen::VectorXd& x,
                            SolverStats* stats) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd f0(n);
    rhs.f(t, x, f0);
    Eigen::MatrixXd jac(n, n);
    Eigen::VectorXd xp = x;
    Eigen::VectorXd fj(n);
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    for (int j = 0; j < n; ++j) {
        const double eps = sqrt_eps * std::max(std::abs(x[j]), 1e-3);
        xp[j] = x[j] + eps;
        rhs.f(t, xp, fj);
        jac.col(j) = (fj - f0) / eps;
        xp[j] = x[j];
    }
    if (stats != nullptr) {
        stats->rhs_evaluations += n + 1;
        ++stats->jacobian_evaluations;
    }
    return jac;
}

Eigen::VectorXd step_implicit_euler(const RhsFunction& rhs, const Eigen::VectorXd& x_n,
                                    double t_n, double h, const SolverOptions& opts) {
    SolverStats stats;
    StageWorkspace ws(rhs, stats);
    ws.refresh_jacobian(t_n, x_n);
    auto out = attempt_implicit_euler(ws, x_n, t_n, h, opts);
    if (!out.converged) {
        throw ConvergenceError("solver", "implicit Euler stage did not converge", x_n,
                               std::numeric_limits<double>::quiet_NaN());
    }
    return out.x;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> step_trbdf2(const RhsFunction& rhs,
                                                        const Eigen::VectorXd& x_n, double t_n,
                                                        double h, const SolverOptions& opts) {
    SolverStats stats;
    StageWorkspace ws(rhs, stats);
    ws.refresh_jacobian(t_n, x_n);
    Eigen::VectorXd f_n(rhs.size());
    rhs.f(t_n, x_n, f_n);
    auto out = attempt_trbdf2(ws, x_n, t_n, h, f_n, opts);
    if (!out.converged) {
        throw ConvergenceError("solver", "TR-BDF2 stage did not converge", x_n,
                               std::numeric_limits<double>::quiet_NaN());
    }
    return {out.x, out.error_estimate};
}

Trajectory integrate(const RhsFunction& rhs, const Eigen::VectorXd& x0,
                     std::pair<double, double> tspan, const SolverOptions& opts,
                     SolverStats* stats_out) {
    const auto [t0, t1] = tspan;
    if (!(t1 > t0)) throw Error("solver", "tspan must satisfy t0 < t1");
    if (x0.size() != rhs.size()) throw Error("solver", "x0 does not match system dimension");
    if (!x0.allFinite()) throw Error("solver", "x0 contains non-finite entries");

    SolverStats stats;
    StageWorkspace ws(rhs, stats);

    Trajectory traj;
    traj.layout = rhs.layout;
    traj.t.push_back(t0);
    traj.x.push_back(x0);

    auto fail = [&](const std::string& why) {
        if (stats_out != nullptr) *stats_out = stats;
        return IntegrationError(why, traj, stats);
    };

    // Consistency precondition on the algebraic rows.
    {
        Eigen::VectorXd f_at_x0(rhs.size());
        rhs.f(t0, x0, f_at_x0);
        ++stats.rhs_evaluations;
        double g0 = 0.0;
        for (int i = 0; i < rhs.size(); ++i) {
            if (!rhs.mass[static_cast<size_t>(i)]) g0 = std::max(g0, std::abs(f_at_x0[i]));
        }
        if (!(g0 <= 1e-6) || !f_at_x0.allFinite()) {
            throw fail("initial state violates the algebraic constraints (norm " +
                       std::to_string(g0) + "); reinitialize before integrating");
        }
    }

    const double h_max = opts.h_max > 0.0 ? opts.h_max : (t1 - t0);
    const int order = opts.method == StepMethod::implicit_euler ? 1 : 2;
    double h = std::clamp(opts.h_init, opts.h_min, h_max);
    double t = t0;
    Eigen::VectorXd x = x0;
    long steps = 0;

    while (t < t1) {
        if (++steps > opts.max_steps) throw fail("maximum step count exceeded");
        bool final_step = false;
        double remaining = t1 - t;
        if (h >= remaining * (1.0 - 1e-12)) {
            h = remaining;
            final_step = true;
        }

        if (!ws.have_jacobian) ws.refresh_jacobian(t, x);

        Eigen::VectorXd f_n(rhs.size());
        rhs.f(t, x, f_n);
        ++stats.rhs_evaluations;
        if (!f_n.allFinite()) throw fail("right-hand side is not finite at the current state");

        ws.slow_rate_seen = false;
        StepOutcome out = opts.method == StepMethod::implicit_euler
                              ? attempt_implicit_euler(ws, x, t, h, opts)
                              : attempt_trbdf2(ws, x, t, h, f_n, opts);

        if (!out.converged && !ws.jacobian_fresh) {
            // Modified-Newton fallback: refresh the Jacobian and retry once
            // before rejecting the step.
            ws.refresh_jacobian(t, x);
            ws.slow_rate_seen = false;
            out = opts.method == StepMethod::implicit_euler
                      ? attempt_implicit_euler(ws, x, t, h, opts)
                      : attempt_trbdf2(ws, x, t, h, f_n, opts);
        }

        if (!out.converged) {
            ++stats.rejected;
            h *= 0.5;
            if (h < opts.h_min) throw fail("step size underflow (Newton not converging)");
            continue;
        }

        Eigen::VectorXd est;
        if (opts.method == StepMethod::implicit_euler) {
            est = out.x - x - h * f_n;  // first-order predictor difference
            for (int i = 0; i < est.size(); ++i) {
                if (ws.mass[i] == 0.0) est[i] = 0.0;
            }
        } else {
            est = std::move(out.error_estimate);
        }
        const double err = error_norm(est, h, x, out.x, ws.mass, ws.n_differential, opts);
        const double factor = controller_factor(err, order);

        if (err <= 1.0) {
            t = final_step ? t1 : t + h;
            x = std::move(out.x);
            traj.t.push_back(t);
            traj.x.push_back(x);
            ++stats.accepted;
            ws.jacobian_fresh = false;
            if (ws.slow_rate_seen) ws.have_jacobian = false;
            h = std::min(h * factor, h_max);
        } else {
            ++stats.rejected;
            h *= factor;
            if (h < opts.h_min) throw fail("step size underflow (error control)");
        }
    }

    if (stats_out != nullptr) *stats_out = stats;
    return traj;
}

}  // namespace phasordyn
