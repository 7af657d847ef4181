#include "phasordyn/assembly.hpp"

#include <memory>

#include "phasordyn/errors.hpp"

namespace phasordyn {

namespace {

struct NodeSlot {
    int u_index;
    int internal_base;
    int internal_count;
};

struct LineSlot {
    int from;
    int to;
    int internal_base;  // -1 for static lines
    int internal_count;
};

struct Assembled {
    PowerGrid grid;
    std::shared_ptr<const StateLayout> layout;
    std::vector<NodeSlot> node_slots;
    std::vector<LineSlot> line_slots;
};

std::shared_ptr<const Assembled> assemble(const PowerGrid& grid) {
    auto data = std::make_shared<Assembled>();
    data->grid = grid;
    data->layout = build_layout(grid);

    int cursor = 0;
    for (const auto& n : grid.nodes()) {
        NodeSlot slot;
        slot.u_index = cursor;
        cursor += 2;
        slot.internal_base = cursor;
        slot.internal_count = node_internal_count(n.model);
        cursor += slot.internal_count;
        data->node_slots.push_back(slot);
    }
    for (const auto& l : grid.lines()) {
        LineSlot slot;
        slot.from = grid.node_index(l.from);
        slot.to = grid.node_index(l.to);
        slot.internal_count = line_internal_count(l.model);
        slot.internal_base = slot.internal_count > 0 ? cursor : -1;
        cursor += slot.internal_count;
        data->line_slots.push_back(slot);
    }
    return data;
}

}  // namespace

std::shared_ptr<const StateLayout> build_layout(const PowerGrid& grid) {
    auto layout = std::make_shared<StateLayout>();
    for (const auto& n : grid.nodes()) {
        const auto flags = node_mass_flags(n.model);
        layout->add(n.name, "u_re", flags[0]);
        layout->add(n.name, "u_im", flags[1]);
        const auto names = node_internal_names(n.model);
        for (size_t k = 0; k < names.size(); ++k) {
            layout->add(n.name, std::string(names[k]), flags[2 + k]);
        }
    }
    for (const auto& l : grid.lines()) {
        const auto names = line_internal_names(l.model);
        const auto flags = line_mass_flags(l.model);
        for (size_t k = 0; k < names.size(); ++k) {
            layout->add(l.name, std::string(names[k]), flags[k]);
        }
    }
    return layout;
}

RhsFunction build_rhs(const PowerGrid& grid) {
    const auto violations = validate(grid);
    if (!is_valid(violations)) {
        for (const auto& v : violations) {
            if (v.severity == Severity::error) {
                throw Error("grid", "cannot build RHS: " + v.message);
            }
        }
    }
    auto data = assemble(grid);

    RhsFunction rhs;
    rhs.layout = data->layout;
    rhs.mass = data->layout->mass_diagonal();
    rhs.f = [data](double t, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        const int n_nodes = static_cast<int>(data->node_slots.size());
        std::vector<Phasor> u(static_cast<size_t>(n_nodes));
        std::vector<Phasor> injection(static_cast<size_t>(n_nodes), Phasor{0.0, 0.0});
        for (int k = 0; k < n_nodes; ++k) {
            const auto& slot = data->node_slots[static_cast<size_t>(k)];
            u[static_cast<size_t>(k)] = {x[slot.u_index], x[slot.u_index + 1]};
        }
        for (size_t l = 0; l < data->line_slots.size(); ++l) {
            const auto& slot = data->line_slots[l];
            std::span<const double> xs;
            std::span<double> dxs;
            if (slot.internal_count > 0) {
                xs = {x.data() + slot.internal_base, static_cast<size_t>(slot.internal_count)};
                dxs = {out.data() + slot.internal_base, static_cast<size_t>(slot.internal_count)};
            }
            Phasor i_from, i_to;
            line_currents(data->grid.lines()[l].model, u[static_cast<size_t>(slot.from)],
                          u[static_cast<size_t>(slot.to)], xs, i_from, i_to, dxs);
            injection[static_cast<size_t>(slot.from)] += i_from;
            injection[static_cast<size_t>(slot.to)] += i_to;
        }
        for (int k = 0; k < n_nodes; ++k) {
            const auto& slot = data->node_slots[static_cast<size_t>(k)];
            std::span<const double> xs;
            std::span<double> rs;
            if (slot.internal_count > 0) {
                xs = {x.data() + slot.internal_base, static_cast<size_t>(slot.internal_count)};
                rs = {out.data() + slot.internal_base, static_cast<size_t>(slot.internal_count)};
            }
            Phasor r_u;
            node_rhs(data->grid.nodes()[static_cast<size_t>(k)].model, u[static_cast<size_t>(k)],
                     injection[static_cast<size_t>(k)], xs, t, r_u, rs);
            out[slot.u_index] = r_u.real();
            out[slot.u_index + 1] = r_u.imag();
        }
    };
    return rhs;
}

std::vector<Phasor> aggregate_currents(const PowerGrid& grid,
                                       std::span<const Phasor> node_voltages,
                                       std::span<const double> line_states) {
    std::vector<Phasor> injection(grid.nodes().size(), Phasor{0.0, 0.0});
    size_t offset = 0;
    for (const auto& l : grid.lines()) {
        const int count = line_internal_count(l.model);
        std::span<const double> xs;
        if (count > 0) {
            if (offset + static_cast<size_t>(count) > line_states.size()) {
                throw Error("grid", "line state vector too short for dynamic lines");
            }
            xs = line_states.subspan(offset, static_cast<size_t>(count));
            offset += static_cast<size_t>(count);
        }
        std::vector<double> dx_scratch(static_cast<size_t>(count));
        Phasor i_from, i_to;
        line_currents(l.model, node_voltages[static_cast<size_t>(grid.node_index(l.from))],
                      node_voltages[static_cast<size_t>(grid.node_index(l.to))], xs, i_from, i_to,
                      dx_scratch);
        injection[static_cast<size_t>(grid.node_index(l.from))] += i_from;
        injection[static_cast<size_t>(grid.node_index(l.to))] += i_to;
    }
    return injection;
}

}  // namespace phasordyn
