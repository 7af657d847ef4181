#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "phasordyn/operation_point.hpp"
#include "phasordyn/power_grid.hpp"
#include "phasordyn/solver.hpp"
#include "phasordyn/state.hpp"

namespace phasordyn {

/// Removes the named line for the fault window; the line is restored (the
/// fault recloses) if the window ends before the simulation does.
struct LineFailure {
    std::string line_name;
    std::pair<double, double> tspan_fault;
};

/// Overrides the P and/or Q set-point of any node exposing them.
struct PowerPerturbation {
    std::string node_name;
    std::optional<double> P_fault;
    std::optional<double> Q_fault;
    std::pair<double, double> tspan_fault;
};

/// Overrides one named parameter of a node for the fault window.
struct NodeParameterChange {
    std::string node_name;
    std::string parameter;
    double value;
    std::pair<double, double> tspan_fault;
};

/// Starts the simulation from a modified initial state; no fault window.
struct ChangeInitialConditions {
    struct Assignment {
        std::string owner;
        std::string var;
        double value;
    };
    std::vector<Assignment> assignments;
};

using Perturbation =
    std::variant<LineFailure, PowerPerturbation, NodeParameterChange, ChangeInitialConditions>;

/// Returns the perturbed grid; the input grid is never mutated. Throws
/// LookupError for unknown component or parameter names.
PowerGrid apply(const Perturbation& perturbation, const PowerGrid& grid);

/// Carries one trajectory per topology segment together with the grid it was
/// integrated on. Segment ranges abut exactly at the fault boundaries.
class PowerGridSolution {
public:
    struct Segment {
        PowerGrid grid;
        Trajectory trajectory;

        double t_begin() const { return trajectory.t_begin(); }
        double t_end() const { return trajectory.t_end(); }
    };

    PowerGridSolution(PowerGrid base_grid, std::vector<Segment> segments);

    std::pair<double, double> tspan() const;
    const PowerGrid& grid() const { return base_grid_; }
    const std::vector<Segment>& segments() const { return segments_; }

    /// Value of (owner, var) at time t. Resolves state variables plus the
    /// derived quantities "u_re"/"u_im" aliases, "v", "φ", "p", "q" and "ω"
    /// (internal where present, the PLL frequency estimate otherwise).
    /// At a fault boundary the left segment wins (the fault applies for
    /// t ≥ t_on, but the reported boundary sample is the pre-switch value).
    /// Variables absent from the active segment (a tripped dynamic line)
    /// evaluate to NaN.
    double value(double t, const std::string& owner, const std::string& var) const;

    std::vector<double> series(const std::vector<double>& times, const std::string& owner,
                               const std::string& var) const;

    /// Node/line owners for which `var` resolves, in grid order. Used by the
    /// plot layer to expand a bare variable selection.
    std::vector<std::string> owners_with(const std::string& var) const;

private:
    const Segment& segment_at(double t) const;

    PowerGrid base_grid_;
    std::vector<Segment> segments_;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& message, std::vector<PowerGridSolution::Segment> completed)
        : Error("scenarios", message), completed_segments(std::move(completed)) {}

    std::vector<PowerGridSolution::Segment> completed_segments;
};

struct SimulateOptions {
    SolverOptions solver;
};

/// Copies variables matched by (owner, var) name from one grid's state to
/// another's, fills newly appearing variables with model defaults and
/// re-solves the algebraic subsystem.
State map_state(const PowerGrid& from_grid, const State& x, const PowerGrid& to_grid);

/// Three-phase fault protocol: [t0, t_on] on the grid, [t_on, t_off] on the
/// perturbed grid, [t_off, t1] back on the original; degenerate segments are
/// skipped and states are mapped across every boundary.
/// ChangeInitialConditions runs one segment from the modified state.
PowerGridSolution simulate(const Perturbation& perturbation, const PowerGrid& grid,
                           const State& x0, std::pair<double, double> tspan,
                           const SimulateOptions& options = {}, SolverStats* stats = nullptr);

}  // namespace phasordyn
