#include "phasordyn/power_grid.hpp"

#include <queue>

#include "phasordyn/errors.hpp"

namespace phasordyn {

PowerGrid::PowerGrid(double omega_nominal) : omega_nominal_(omega_nominal) {}

void PowerGrid::add_node(std::string name, NodeModel model) {
    if (node_index_.count(name) > 0) {
        throw Error("grid", "duplicate node name '" + name + "'");
    }
    auto bad = node_violations(model);
    if (!bad.empty()) {
        throw Error("grid", "node '" + name + "' (" + std::string(node_type_name(model)) +
                                "): " + bad.front());
    }
    node_index_.emplace(name, static_cast<int>(nodes_.size()));
    nodes_.push_back({std::move(name), std::move(model)});
}

void PowerGrid::add_line(std::string name, LineModel model, const std::string& from,
                         const std::string& to) {
    if (line_index_.count(name) > 0) {
        throw Error("grid", "duplicate line name '" + name + "'");
    }
    if (!has_node(from)) {
        throw Error("grid", "line '" + name + "': unknown endpoint '" + from + "'");
    }
    if (!has_node(to)) {
        throw Error("grid", "line '" + name + "': unknown endpoint '" + to + "'");
    }
    auto bad = line_violations(model);
    if (!bad.empty()) {
        throw Error("grid", "line '" + name + "' (" + std::string(line_type_name(model)) +
                                "): " + bad.front());
    }
    line_index_.emplace(name, static_cast<int>(lines_.size()));
    lines_.push_back({std::move(name), std::move(model), from, to});
}

void PowerGrid::remove_line(const std::string& name) {
    auto it = line_index_.find(name);
    if (it == line_index_.end()) {
        throw LookupError("grid", "unknown line '" + name + "'");
    }
    lines_.erase(lines_.begin() + it->second);
    line_index_.clear();
    for (size_t k = 0; k < lines_.size(); ++k) line_index_.emplace(lines_[k].name, static_cast<int>(k));
}

bool PowerGrid::has_node(const std::string& name) const { return node_index_.count(name) > 0; }
bool PowerGrid::has_line(const std::string& name) const { return line_index_.count(name) > 0; }

const NamedNode& PowerGrid::node(const std::string& name) const {
    return nodes_[static_cast<size_t>(node_index(name))];
}

const NamedLine& PowerGrid::line(const std::string& name) const {
    auto it = line_index_.find(name);
    if (it == line_index_.end()) {
        throw LookupError("grid", "unknown line '" + name + "'");
    }
    return lines_[static_cast<size_t>(it->second)];
}

NodeModel& PowerGrid::node_model(const std::string& name) {
    return nodes_[static_cast<size_t>(node_index(name))].model;
}

LineModel& PowerGrid::line_model(const std::string& name) {
    auto it = line_index_.find(name);
    if (it == line_index_.end()) {
        throw LookupError("grid", "unknown line '" + name + "'");
    }
    return lines_[static_cast<size_t>(it->second)].model;
}

int PowerGrid::node_index(const std::string& name) const {
    auto it = node_index_.find(name);
    if (it == node_index_.end()) {
        throw LookupError("grid", "unknown node '" + name + "'");
    }
    return it->second;
}

bool PowerGrid::operator==(const PowerGrid& other) const {
    return omega_nominal_ == other.omega_nominal_ && nodes_ == other.nodes_ &&
           lines_ == other.lines_;
}

std::vector<Violation> validate(const PowerGrid& grid) {
    std::vector<Violation> out;
    if (grid.nodes().empty()) {
        out.push_back({Severity::error, "no nodes"});
        return out;
    }
    if (!(grid.omega_nominal() > 0.0)) {
        out.push_back({Severity::error, "nominal angular frequency must be > 0"});
    }
    for (const auto& n : grid.nodes()) {
        for (const auto& v : node_violations(n.model)) {
            out.push_back({Severity::error, "node '" + n.name + "': " + v});
        }
    }
    for (const auto& l : grid.lines()) {
        if (!grid.has_node(l.from)) {
            out.push_back({Severity::error, "line '" + l.name + "': unknown endpoint '" + l.from + "'"});
        }
        if (!grid.has_node(l.to)) {
            out.push_back({Severity::error, "line '" + l.name + "': unknown endpoint '" + l.to + "'"});
        }
        for (const auto& v : line_violations(l.model)) {
            out.push_back({Severity::error, "line '" + l.name + "': " + v});
        }
    }

    // Connectivity (BFS over the undirected graph); disconnection is a
    // warning since islanding is a legitimate post-fault condition.
    const int n = static_cast<int>(grid.nodes().size());
    std::vector<std::vector<int>> adjacency(static_cast<size_t>(n));
    for (const auto& l : grid.lines()) {
        if (!grid.has_node(l.from) || !grid.has_node(l.to)) continue;
        int a = grid.node_index(l.from);
        int b = grid.node_index(l.to);
        adjacency[static_cast<size_t>(a)].push_back(b);
        adjacency[static_cast<size_t>(b)].push_back(a);
    }
    std::vector<bool> seen(static_cast<size_t>(n), false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int reached = 1;
    while (!frontier.empty()) {
        int k = frontier.front();
        frontier.pop();
        for (int next : adjacency[static_cast<size_t>(k)]) {
            if (!seen[static_cast<size_t>(next)]) {
                seen[static_cast<size_t>(next)] = true;
                ++reached;
                frontier.push(next);
            }
        }
    }
    if (reached < n) {
        out.push_back({Severity::warning,
                       "grid is disconnected (" + std::to_string(n - reached) + " of " +
                           std::to_string(n) + " nodes unreachable from '" +
                           grid.nodes().front().name + "')"});
    }
    return out;
}

bool is_valid(const std::vector<Violation>& violations) {
    for (const auto& v : violations) {
        if (v.severity == Severity::error) return false;
    }
    return true;
}

}  // namespace phasordyn
