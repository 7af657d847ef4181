#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "phasordyn/power_grid.hpp"
#include "phasordyn/state.hpp"

namespace phasordyn {

/// Builds the flat state layout for a grid: one block per node in insertion
/// order (u_re, u_im, internals), then dynamic-line internals in line order.
std::shared_ptr<const StateLayout> build_layout(const PowerGrid& grid);

/// Right-hand side of the mass-matrix system M·ẋ = f(t, x). The callable is
/// pure and re-entrant; rows where mass is false are algebraic residuals.
struct RhsFunction {
    std::function<void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& out)> f;
    std::vector<bool> mass;
    std::shared_ptr<const StateLayout> layout;  // null for ad-hoc test systems

    int size() const { return static_cast<int>(mass.size()); }

    Eigen::VectorXd operator()(double t, const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(x.size());
        f(t, x, out);
        return out;
    }
};

/// Composes all node and line models into one RHS. Requires validate(grid)
/// to pass; throws Error("grid") otherwise. Per evaluation: line currents
/// first, aggregated per node, then every node RHS, packed in layout order.
RhsFunction build_rhs(const PowerGrid& grid);

/// Per-node aggregate injection currents for given node voltages and dynamic
/// line states (layout order, possibly empty). Exposed for testing; build_rhs
/// uses the same path.
std::vector<Phasor> aggregate_currents(const PowerGrid& grid,
                                       std::span<const Phasor> node_voltages,
                                       std::span<const double> line_states = {});

}  // namespace phasordyn
