#include "phasordyn/scenarios.hpp"

#include <cmath>
#include <limits>

#include "phasordyn/assembly.hpp"
#include "phasordyn/errors.hpp"

namespace phasordyn {

namespace {

struct ApplyVisitor {
    const PowerGrid& grid;

    PowerGrid operator()(const LineFailure& p) const {
        PowerGrid out = grid;
        out.remove_line(p.line_name);
        return out;
    }

    PowerGrid operator()(const PowerPerturbation& p) const {
        PowerGrid out = grid;
        NodeModel& model = out.node_model(p.node_name);
        if (p.P_fault.has_value()) node_set_param(model, "P", *p.P_fault);
        if (p.Q_fault.has_value()) node_set_param(model, "Q", *p.Q_fault);
        return out;
    }

    PowerGrid operator()(const NodeParameterChange& p) const {
        PowerGrid out = grid;
        node_set_param(out.node_model(p.node_name), p.parameter, p.value);
        return out;
    }

    PowerGrid operator()(const ChangeInitialConditions&) const {
        return grid;  // acts on the state, not the grid
    }
};

std::optional<std::pair<double, double>> fault_window(const Perturbation& p) {
    if (const auto* lf = std::get_if<LineFailure>(&p)) return lf->tspan_fault;
    if (const auto* pp = std::get_if<PowerPerturbation>(&p)) return pp->tspan_fault;
    if (const auto* pc = std::get_if<NodeParameterChange>(&p)) return pc->tspan_fault;
    return std::nullopt;
}

double algebraic_norm(const RhsFunction& rhs, const Eigen::VectorXd& x) {
    const Eigen::VectorXd f = rhs(0.0, x);
    double worst = 0.0;
    for (int i = 0; i < rhs.size(); ++i) {
        if (!rhs.mass[static_cast<size_t>(i)]) worst = std::max(worst, std::abs(f[i]));
    }
    return worst;
}

}  // namespace

PowerGrid apply(const Perturbation& perturbation, const PowerGrid& grid) {
    return std::visit(ApplyVisitor{grid}, perturbation);
}

State map_state(const PowerGrid& from_grid, const State& x, const PowerGrid& to_grid) {
    if (!(x.layout() == *build_layout(from_grid))) {
        throw Error("scenarios", "state layout does not match the source grid");
    }
    auto to_layout = build_layout(to_grid);
    State out(to_layout);

    std::vector<bool> filled(static_cast<size_t>(to_layout->size()), false);
    for (int i = 0; i < to_layout->size(); ++i) {
        const auto& e = to_layout->entry(i);
        if (x.layout().contains(e.owner, e.var)) {
            out.values()[i] = x.get(e.owner, e.var);
            filled[static_cast<size_t>(i)] = true;
        }
    }

    // Newly appearing variables get model default guesses from the copied
    // voltages.
    for (const auto& n : to_grid.nodes()) {
        if (!filled[static_cast<size_t>(to_layout->index_of(n.name, "u_re"))]) {
            Phasor u{1.0, 0.0};
            if (const auto* slack = std::get_if<SlackAlgebraic>(&n.model)) u = slack->U();
            out.set_voltage(n.name, u);
        }
        const auto names = node_internal_names(n.model);
        std::vector<double> defaults;
        for (size_t k = 0; k < names.size(); ++k) {
            const int idx = to_layout->index_of(n.name, std::string(names[k]));
            if (filled[static_cast<size_t>(idx)]) continue;
            if (defaults.empty()) defaults = node_initial_internals(n.model, out.voltage(n.name));
            out.values()[idx] = defaults[k];
        }
    }
    for (const auto& l : to_grid.lines()) {
        const auto names = line_internal_names(l.model);
        std::vector<double> defaults;
        for (size_t k = 0; k < names.size(); ++k) {
            const int idx = to_layout->index_of(l.name, std::string(names[k]));
            if (filled[static_cast<size_t>(idx)]) continue;
            if (defaults.empty()) {
                defaults =
                    line_initial_internals(l.model, out.voltage(l.from), out.voltage(l.to));
            }
            out.values()[idx] = defaults[k];
        }
    }
    return reinit_algebraic(to_grid, out);
}

PowerGridSolution::PowerGridSolution(PowerGrid base_grid, std::vector<Segment> segments)
    : base_grid_(std::move(base_grid)), segments_(std::move(segments)) {
    if (segments_.empty()) {
        throw Error("scenarios", "solution needs at least one segment");
    }
    for (size_t k = 1; k < segments_.size(); ++k) {
        if (segments_[k].t_begin() != segments_[k - 1].t_end()) {
            throw Error("scenarios", "solution segments do not abut");
        }
    }
}

std::pair<double, double> PowerGridSolution::tspan() const {
    return {segments_.front().t_begin(), segments_.back().t_end()};
}

const PowerGridSolution::Segment& PowerGridSolution::segment_at(double t) const {
    // Left segment wins at boundaries: use the first segment whose end
    // reaches t.
    for (const auto& seg : segments_) {
        if (t <= seg.t_end()) return seg;
    }
    return segments_.back();
}

double PowerGridSolution::value(double t, const std::string& owner, const std::string& var) const {
    const Segment& seg = segment_at(t);
    const auto& layout = *seg.trajectory.layout;
    const Eigen::VectorXd x = seg.trajectory.at(t);

    auto voltage_of = [&](const std::string& node) -> Phasor {
        return {x[layout.index_of(node, "u_re")], x[layout.index_of(node, "u_im")]};
    };

    if (layout.contains(owner, var)) {
        return x[layout.index_of(owner, var)];
    }

    if (base_grid_.has_node(owner)) {
        if (var == "v") return std::abs(voltage_of(owner));
        if (var == "φ") return std::arg(voltage_of(owner));
        if (var == "p" || var == "q") {
            const auto& grid = seg.grid;
            std::vector<Phasor> voltages;
            voltages.reserve(grid.nodes().size());
            for (const auto& n : grid.nodes()) voltages.push_back(voltage_of(n.name));
            int line_state_count = 0;
            for (const auto& l : grid.lines()) line_state_count += line_internal_count(l.model);
            std::span<const double> line_states;
            if (line_state_count > 0) {
                line_states = {x.data() + (x.size() - line_state_count),
                               static_cast<size_t>(line_state_count)};
            }
            const auto injections = aggregate_currents(grid, voltages, line_states);
            const Phasor s = complex_power(voltages[static_cast<size_t>(grid.node_index(owner))],
                                           injections[static_cast<size_t>(grid.node_index(owner))]);
            return var == "p" ? s.real() : s.imag();
        }
        if (var == "ω") {
            const NodeModel& model = seg.grid.node(owner).model;
            const auto names = node_internal_names(model);
            std::vector<double> internals;
            internals.reserve(names.size());
            for (const auto& name : names) {
                internals.push_back(x[layout.index_of(owner, std::string(name))]);
            }
            const auto derived = node_derived(model, "ω", voltage_of(owner), internals);
            if (derived.has_value()) return *derived;
        }
    }

    // Known in the base grid but absent from this segment (e.g. a tripped
    // dynamic line): report NaN. Anything else is a bad name.
    const auto base = build_layout(base_grid_);
    if (base->contains(owner, var)) return std::numeric_limits<double>::quiet_NaN();
    throw LookupError("scenarios", "cannot resolve variable '" + owner + ":" + var + "'");
}

std::vector<double> PowerGridSolution::series(const std::vector<double>& times,
                                              const std::string& owner,
                                              const std::string& var) const {
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(value(t, owner, var));
    return out;
}

std::vector<std::string> PowerGridSolution::owners_with(const std::string& var) const {
    std::vector<std::string> owners;
    const auto layout = build_layout(base_grid_);
    for (const auto& n : base_grid_.nodes()) {
        const bool derived =
            var == "v" || var == "φ" || var == "p" || var == "q" ||
            (var == "ω" && std::holds_alternative<GridFollowingPLL>(n.model));
        if (derived || layout->contains(n.name, var)) owners.push_back(n.name);
    }
    for (const auto& l : base_grid_.lines()) {
        if (layout->contains(l.name, var)) owners.push_back(l.name);
    }
    return owners;
}

PowerGridSolution simulate(const Perturbation& perturbation, const PowerGrid& grid,
                           const State& x0, std::pair<double, double> tspan,
                           const SimulateOptions& options, SolverStats* stats) {
    const auto [t0, t1] = tspan;
    if (!(t1 > t0)) throw Error("scenarios", "tspan must satisfy t0 < t1");

    const RhsFunction rhs = build_rhs(grid);
    if (!(x0.layout() == *rhs.layout)) {
        throw Error("scenarios", "initial state layout does not match the grid");
    }

    SolverStats local_stats;
    auto run_segment = [&](const PowerGrid& segment_grid, const RhsFunction& segment_rhs,
                           const State& start, std::pair<double, double> span,
                           std::vector<PowerGridSolution::Segment>& completed) {
        SolverStats seg_stats;
        try {
            Trajectory traj = integrate(segment_rhs, start.values(), span, options.solver,
                                        &seg_stats);
            local_stats.accepted += seg_stats.accepted;
            local_stats.rejected += seg_stats.rejected;
            local_stats.newton_iterations += seg_stats.newton_iterations;
            local_stats.rhs_evaluations += seg_stats.rhs_evaluations;
            local_stats.jacobian_evaluations += seg_stats.jacobian_evaluations;
            local_stats.lu_factorizations += seg_stats.lu_factorizations;
            completed.push_back({segment_grid, std::move(traj)});
        } catch (const IntegrationError& e) {
            throw SimulationError(std::string("segment [") + std::to_string(span.first) + ", " +
                                      std::to_string(span.second) + "] failed: " + e.what(),
                                  std::move(completed));
        }
    };

    State start = x0;
    if (algebraic_norm(rhs, start.values()) > 1e-6) {
        start = reinit_algebraic(grid, start);
    }

    std::vector<PowerGridSolution::Segment> segments;

    if (const auto* ic = std::get_if<ChangeInitialConditions>(&perturbation)) {
        State modified = start;
        for (const auto& a : ic->assignments) modified.set(a.owner, a.var, a.value);
        modified = reinit_algebraic(grid, modified);
        run_segment(grid, rhs, modified, {t0, t1}, segments);
        if (stats != nullptr) *stats = local_stats;
        return PowerGridSolution(grid, std::move(segments));
    }

    const auto window = fault_window(perturbation);
    const auto [t_on, t_off] = *window;
    if (!(t_on < t_off)) {
        throw Error("scenarios", "fault window must satisfy t_on < t_off");
    }
    if (t_on < t0 || t_off > t1) {
        throw Error("scenarios", "fault window must lie inside the simulation tspan");
    }

    const PowerGrid faulted = apply(perturbation, grid);
    const RhsFunction faulted_rhs = build_rhs(faulted);

    State cursor = std::move(start);
    if (t_on > t0) {
        run_segment(grid, rhs, cursor, {t0, t_on}, segments);
        cursor = State(rhs.layout, segments.back().trajectory.x.back());
    }

    State mapped = map_state(grid, cursor, faulted);
    run_segment(faulted, faulted_rhs, mapped, {t_on, t_off}, segments);
    cursor = State(faulted_rhs.layout, segments.back().trajectory.x.back());

    if (t_off < t1) {
        // The original grid returns after the window (a tripped line
        // recloses); windows ending with the simulation never switch back.
        State restored = map_state(faulted, cursor, grid);
        run_segment(grid, rhs, restored, {t_off, t1}, segments);
    }

    if (stats != nullptr) *stats = local_stats;
    return PowerGridSolution(grid, std::move(segments));
}

}  // namespace phasordyn
