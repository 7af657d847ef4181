#pragma once

#include <optional>

#include "phasordyn/power_grid.hpp"
#include "phasordyn/solver.hpp"
#include "phasordyn/state.hpp"

namespace phasordyn {

/// rootfind and nlsolve are one damped-Newton implementation under two
/// names; dynamic marches a damped version of the system and polishes the
/// endpoint with a Newton pass.
enum class OpMethod { rootfind, nlsolve, dynamic };

struct OpOptions {
    double tol = 1e-8;             // ∞-norm residual target
    int max_iterations = 200;      // hard Newton cap
    double dynamic_damping = 1.0;  // extra pull on frequency states
    double dynamic_horizon = 1e3;  // s
};

/// Flat start: every voltage 1+0j (slack nodes: their set-point), internals
/// at the model defaults.
State default_guess(const PowerGrid& grid);

/// Solves f(0, x) = 0 for the full grid RHS. Throws ConvergenceError
/// (carrying the best iterate) on stagnation and SingularJacobianError when
/// the Jacobian is rank deficient (typically a missing phase reference).
State find_operationpoint(const PowerGrid& grid, OpMethod method = OpMethod::rootfind,
                          const std::optional<State>& guess = std::nullopt,
                          const OpOptions& options = {});

/// Re-solves the algebraic subsystem by Newton with all differential
/// components held fixed (bit-identical on return). Target ‖g‖∞ ≤ 1e-10.
State reinit_algebraic(const PowerGrid& grid, const State& x);

}  // namespace phasordyn
