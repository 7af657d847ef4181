#include "phasordyn/state.hpp"

#include <cmath>

#include "phasordyn/errors.hpp"

namespace phasordyn {

int StateLayout::add(std::string owner, std::string var, bool differential) {
    auto key = std::make_pair(owner, var);
    if (index_.count(key) > 0) {
        throw Error("grid", "layout conflict: duplicate variable '" + owner + ":" + var + "'");
    }
    int idx = size();
    index_.emplace(std::move(key), idx);
    entries_.push_back({std::move(owner), std::move(var), differential});
    return idx;
}

bool StateLayout::contains(const std::string& owner, const std::string& var) const {
    return index_.count({owner, var}) > 0;
}

int StateLayout::index_of(const std::string& owner, const std::string& var) const {
    auto it = index_.find({owner, var});
    if (it == index_.end()) {
        throw LookupError("grid", "unknown variable '" + owner + ":" + var + "'");
    }
    return it->second;
}

std::vector<bool> StateLayout::mass_diagonal() const {
    std::vector<bool> mass(entries_.size());
    for (size_t i = 0; i < entries_.size(); ++i) mass[i] = entries_[i].differential;
    return mass;
}

State::State(std::shared_ptr<const StateLayout> layout)
    : layout_(std::move(layout)), values_(Eigen::VectorXd::Zero(layout_->size())) {}

State::State(std::shared_ptr<const StateLayout> layout, Eigen::VectorXd values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->size()) {
        throw Error("grid", "state size " + std::to_string(values_.size()) +
                                " does not match layout dimension " +
                                std::to_string(layout_->size()));
    }
    if (!values_.allFinite()) {
        throw Error("grid", "state contains non-finite entries");
    }
}

double State::get(const std::string& owner, const std::string& var) const {
    if (layout_->contains(owner, var)) {
        return values_[layout_->index_of(owner, var)];
    }
    if (var == "v") return std::abs(voltage(owner));
    if (var == "φ") return std::arg(voltage(owner));
    throw LookupError("grid", "unknown variable '" + owner + ":" + var + "'");
}

void State::set(const std::string& owner, const std::string& var, double value) {
    if (!is_finite(value)) {
        throw Error("grid", "refusing to set non-finite value for '" + owner + ":" + var + "'");
    }
    values_[layout_->index_of(owner, var)] = value;
}

Phasor State::voltage(const std::string& owner) const {
    return {values_[layout_->index_of(owner, "u_re")], values_[layout_->index_of(owner, "u_im")]};
}

void State::set_voltage(const std::string& owner, Phasor u) {
    if (!is_finite(u)) {
        throw Error("grid", "refusing to set non-finite voltage at '" + owner + "'");
    }
    values_[layout_->index_of(owner, "u_re")] = u.real();
    values_[layout_->index_of(owner, "u_im")] = u.imag();
}

}  // namespace phasordyn
