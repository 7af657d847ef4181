#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "phasordyn/phasor.hpp"

namespace phasordyn {

struct LayoutEntry {
    std::string owner;  // node or line name
    std::string var;    // variable name within that owner
    bool differential;  // true: integrated state, false: algebraic constraint

    bool operator==(const LayoutEntry&) const = default;
};

/// Index mapping between (owner, variable) pairs and positions in the flat
/// state vector. Every node block starts with "u_re", "u_im" followed by the
/// model's internal variables; dynamic-line internals come after all node
/// blocks.
class StateLayout {
public:
    /// Appends an entry and returns its index. Throws on duplicate keys.
    int add(std::string owner, std::string var, bool differential);

    int size() const { return static_cast<int>(entries_.size()); }
    const LayoutEntry& entry(int index) const { return entries_.at(static_cast<size_t>(index)); }
    const std::vector<LayoutEntry>& entries() const { return entries_; }

    bool contains(const std::string& owner, const std::string& var) const;
    /// Throws LookupError for unknown keys.
    int index_of(const std::string& owner, const std::string& var) const;

    /// Differential flags per index (the diagonal boolean mass matrix).
    std::vector<bool> mass_diagonal() const;

    bool operator==(const StateLayout& other) const { return entries_ == other.entries_; }

private:
    std::vector<LayoutEntry> entries_;
    std::map<std::pair<std::string, std::string>, int> index_;
};

/// Flat real state vector bound to a layout. Entries must stay finite; the
/// named setters enforce that, raw mutable access is for solver internals.
class State {
public:
    explicit State(std::shared_ptr<const StateLayout> layout);
    State(std::shared_ptr<const StateLayout> layout, Eigen::VectorXd values);

    /// Reads a variable. Besides layout entries this resolves the derived
    /// voltage accessors "v" (magnitude) and "φ" (angle) for node owners.
    double get(const std::string& owner, const std::string& var) const;
    void set(const std::string& owner, const std::string& var, double value);

    /// Complex voltage of a node owner (the "u" accessor).
    Phasor voltage(const std::string& owner) const;
    void set_voltage(const std::string& owner, Phasor u);

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    const StateLayout& layout() const { return *layout_; }
    const std::shared_ptr<const StateLayout>& layout_ptr() const { return layout_; }

private:
    std::shared_ptr<const StateLayout> layout_;
    Eigen::VectorXd values_;
};

}  // namespace phasordyn
