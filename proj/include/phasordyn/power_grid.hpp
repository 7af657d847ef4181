#pragma once

#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "phasordyn/line_models.hpp"
#include "phasordyn/node_models.hpp"

namespace phasordyn {

struct NamedNode {
    std::string name;
    NodeModel model;

    bool operator==(const NamedNode&) const = default;
};

struct NamedLine {
    std::string name;
    LineModel model;
    std::string from;
    std::string to;

    bool operator==(const NamedLine&) const = default;
};

/// Static description of the system: ordered named node models plus ordered
/// named line models with endpoints. Value type; scenario code copies and
/// edits grids freely.
class PowerGrid {
public:
    explicit PowerGrid(double omega_nominal = 2.0 * std::numbers::pi * 50.0);

    /// Insertion order defines the state layout. Throws Error("grid") on
    /// duplicate names, unknown endpoints or model invariant violations.
    void add_node(std::string name, NodeModel model);
    void add_line(std::string name, LineModel model, const std::string& from,
                  const std::string& to);
    void remove_line(const std::string& name);

    bool has_node(const std::string& name) const;
    bool has_line(const std::string& name) const;
    const NamedNode& node(const std::string& name) const;
    const NamedLine& line(const std::string& name) const;
    NodeModel& node_model(const std::string& name);
    LineModel& line_model(const std::string& name);

    /// Ordinal of a node in insertion order; throws LookupError.
    int node_index(const std::string& name) const;

    const std::vector<NamedNode>& nodes() const { return nodes_; }
    const std::vector<NamedLine>& lines() const { return lines_; }

    double omega_nominal() const { return omega_nominal_; }
    void set_omega_nominal(double w) { omega_nominal_ = w; }

    bool operator==(const PowerGrid& other) const;

private:
    double omega_nominal_;
    std::vector<NamedNode> nodes_;
    std::vector<NamedLine> lines_;
    std::unordered_map<std::string, int> node_index_;
    std::unordered_map<std::string, int> line_index_;
};

enum class Severity { error, warning };

struct Violation {
    Severity severity;
    std::string message;
};

/// Structural and model-invariant checks; never throws. Disconnected grids
/// produce a warning, not an error (islanding is a legitimate fault outcome).
std::vector<Violation> validate(const PowerGrid& grid);

/// True when no error-severity violations are present.
bool is_valid(const std::vector<Violation>& violations);

}  // namespace phasordyn
