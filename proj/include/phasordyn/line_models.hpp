#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "phasordyn/phasor.hpp"

namespace phasordyn {

// Terminal convention shared by all line models: I_from is the current
// flowing from the from-node into the line, I_to the current from the
// to-node into the line. A node's aggregate injection current is the sum of
// these over its incident lines.

/// Series admittance branch.
struct StaticLine {
    double Y_re = 0.0;
    double Y_im = 0.0;

    Phasor Y() const { return {Y_re, Y_im}; }
    bool operator==(const StaticLine&) const = default;
};

/// Pi-model branch: series admittance plus one shunt admittance per end.
struct PiModelLine {
    double y_re = 0.0;
    double y_im = 0.0;
    double y_shunt_from_re = 0.0;
    double y_shunt_from_im = 0.0;
    double y_shunt_to_re = 0.0;
    double y_shunt_to_im = 0.0;

    Phasor y() const { return {y_re, y_im}; }
    Phasor y_shunt_from() const { return {y_shunt_from_re, y_shunt_from_im}; }
    Phasor y_shunt_to() const { return {y_shunt_to_re, y_shunt_to_im}; }
    bool operator==(const PiModelLine&) const = default;
};

/// Pi-model based transformer with a (possibly complex) tap on the from
/// side; no magnetizing shunt.
struct Transformer {
    double y_re = 0.0;
    double y_im = 0.0;
    double t_ratio_re = 1.0;
    double t_ratio_im = 0.0;

    Phasor y() const { return {y_re, y_im}; }
    Phasor t_ratio() const { return {t_ratio_re, t_ratio_im}; }
    bool operator==(const Transformer&) const = default;
};

/// Dynamic series branch in the rotating frame. Internal state: complex line
/// current I (entries "I_re", "I_im"), flowing from-to-to; its fixed point
/// reproduces StaticLine with Y = 1/(R + jω_N·L).
struct RLLine {
    double R = 0.0;
    double L = 1.0;
    double omega_nominal = 0.0;  // ω_N, rad/s

    bool operator==(const RLLine&) const = default;
};

using LineModel = std::variant<StaticLine, PiModelLine, Transformer, RLLine>;

std::string_view line_type_name(const LineModel& m);

std::vector<std::string_view> line_internal_names(const LineModel& m);
int line_internal_count(const LineModel& m);

/// Mass flags for the internal variables only (lines own no voltage block).
std::vector<bool> line_mass_flags(const LineModel& m);

std::vector<std::string> line_violations(const LineModel& m);

/// Evaluates terminal currents and, for dynamic lines, the internal-state
/// derivatives.
void line_currents(const LineModel& m, Phasor u_from, Phasor u_to, std::span<const double> x_int,
                   Phasor& I_from, Phasor& I_to, std::span<double> dx_int);

/// Default internal values for solver starts: the static steady state for
/// the given terminal voltages.
std::vector<double> line_initial_internals(const LineModel& m, Phasor u_from, Phasor u_to);

// Parameter reflection, canonical grid-file names.
std::vector<std::string_view> line_param_names(const LineModel& m);
bool line_has_param(const LineModel& m, std::string_view name);
double line_get_param(const LineModel& m, std::string_view name);
void line_set_param(LineModel& m, std::string_view name, double value);

}  // namespace phasordyn
