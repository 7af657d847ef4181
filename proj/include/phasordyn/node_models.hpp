#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "phasordyn/phasor.hpp"

namespace phasordyn {

// Sign convention shared by all node models: i is the current flowing from
// the node into the network, so complex_power(u, i) is the node's power
// injection (generation positive, consumption negative). r_u is du/dt where
// the voltage is a differential variable, otherwise the algebraic residual
// that must vanish; internal variables follow the same rule.

/// Fixed-voltage bus providing the phase reference.
struct SlackAlgebraic {
    double U_re = 1.0;
    double U_im = 0.0;

    Phasor U() const { return {U_re, U_im}; }
    bool operator==(const SlackAlgebraic&) const = default;
};

/// Constant power injection; loads carry negative set-points.
struct PQAlgebraic {
    double P = 0.0;
    double Q = 0.0;

    bool operator==(const PQAlgebraic&) const = default;
};

/// Two-axis synchronous machine with the complex terminal voltage as a
/// differential variable. Internal variables: θ (rotor angle, rad) and
/// ω (speed deviation from nominal, rad/s).
struct FourthOrderEq {
    double H = 1.0;         // inertia constant, s
    double D = 0.0;         // damping
    double P = 0.0;         // mechanical power set-point
    double E_f = 1.0;       // field voltage
    double T_d_dash = 1.0;  // d-axis transient time constant, s
    double T_q_dash = 1.0;  // q-axis transient time constant, s
    double X_d = 1.0;
    double X_q = 1.0;
    double X_d_dash = 0.5;
    double X_q_dash = 0.5;
    double omega = 0.0;     // nominal angular frequency Ω, rad/s

    bool operator==(const FourthOrderEq&) const = default;
};

/// Droop-controlled voltage source inverter with first-order measurement
/// filters. Internal variables: ω (frequency deviation, rad/s) and q_m
/// (measured reactive power).
struct VSIVoltagePT1 {
    double tau_v = 1.0;  // voltage droop delay
    double tau_P = 1.0;  // active power measurement
    double tau_Q = 1.0;  // reactive power measurement
    double K_P = 1.0;    // active droop gain
    double K_Q = 1.0;    // reactive droop gain
    double V_r = 1.0;    // voltage reference
    double P = 0.0;
    double Q = 0.0;

    bool operator==(const VSIVoltagePT1&) const = default;
};

/// Grid-following converter: first-order voltage filter, SRF-PLL and a
/// frequency/voltage droop on the commanded power, injected through an
/// algebraic current-source constraint. Internal variables: θ (PLL angle),
/// ε (PLL integrator), vf_re/vf_im (filtered voltage).
struct GridFollowingPLL {
    double tau_v = 1.0;
    double K_pll_p = 0.0;
    double K_pll_i = 1.0;
    double K_P = 0.0;
    double K_Q = 0.0;
    double V_r = 1.0;
    double P = 0.0;
    double Q = 0.0;

    bool operator==(const GridFollowingPLL&) const = default;
};

using NodeModel =
    std::variant<SlackAlgebraic, PQAlgebraic, FourthOrderEq, VSIVoltagePT1, GridFollowingPLL>;

std::string_view node_type_name(const NodeModel& m);

/// Mass-matrix flags: the u_re/u_im pair first, then the internals.
std::vector<bool> node_mass_flags(const NodeModel& m);

std::vector<std::string_view> node_internal_names(const NodeModel& m);
int node_internal_count(const NodeModel& m);

/// Invariant violations; empty means the parameters are admissible.
std::vector<std::string> node_violations(const NodeModel& m);

/// Evaluates the node right-hand side. x_int and r_int have
/// node_internal_count entries; singular inputs (u = 0 where a model divides
/// by |u|) propagate as non-finite outputs, which integrators treat as a
/// step-rejection signal.
void node_rhs(const NodeModel& m, Phasor u, Phasor i, std::span<const double> x_int, double t,
              Phasor& r_u, std::span<double> r_int);

/// Default internal values used by operation-point searches: θ = arg(u),
/// ω = 0, q_m = Q, ε = 0, filtered voltage = u.
std::vector<double> node_initial_internals(const NodeModel& m, Phasor u);

/// Model-derived read-only quantity that is not a state variable, e.g. the
/// PLL frequency estimate "ω" of GridFollowingPLL.
std::optional<double> node_derived(const NodeModel& m, std::string_view var, Phasor u,
                                   std::span<const double> x_int);

// Parameter reflection using the canonical grid-file names in declaration
// order; complex parameters appear as NAME_re / NAME_im.
std::vector<std::string_view> node_param_names(const NodeModel& m);
bool node_has_param(const NodeModel& m, std::string_view name);
double node_get_param(const NodeModel& m, std::string_view name);
void node_set_param(NodeModel& m, std::string_view name, double value);

}  // namespace phasordyn
