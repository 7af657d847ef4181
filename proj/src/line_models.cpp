#include "phasordyn/line_models.hpp"

#include <cmath>

#include "phasordyn/errors.hpp"

namespace phasordyn {

namespace {

template <class M>
struct ParamDef {
    std::string_view name;
    double M::* field;
};

constexpr ParamDef<StaticLine> kStaticParams[] = {
    {"Y_re", &StaticLine::Y_re},
    {"Y_im", &StaticLine::Y_im},
};

constexpr ParamDef<PiModelLine> kPiParams[] = {
    {"y_re", &PiModelLine::y_re},
    {"y_im", &PiModelLine::y_im},
    {"y_shunt_from_re", &PiModelLine::y_shunt_from_re},
    {"y_shunt_from_im", &PiModelLine::y_shunt_from_im},
    {"y_shunt_to_re", &PiModelLine::y_shunt_to_re},
    {"y_shunt_to_im", &PiModelLine::y_shunt_to_im},
};

constexpr ParamDef<Transformer> kTransformerParams[] = {
    {"y_re", &Transformer::y_re},
    {"y_im", &Transformer::y_im},
    {"t_ratio_re", &Transformer::t_ratio_re},
    {"t_ratio_im", &Transformer::t_ratio_im},
};

constexpr ParamDef<RLLine> kRLParams[] = {
    {"R", &RLLine::R},
    {"L", &RLLine::L},
    {"ω_N", &RLLine::omega_nominal},
};

template <class M>
constexpr std::span<const ParamDef<M>> param_defs();

template <>
constexpr std::span<const ParamDef<StaticLine>> param_defs() { return kStaticParams; }
template <>
constexpr std::span<const ParamDef<PiModelLine>> param_defs() { return kPiParams; }
template <>
constexpr std::span<const ParamDef<Transformer>> param_defs() { return kTransformerParams; }
template <>
constexpr std::span<const ParamDef<RLLine>> param_defs() { return kRLParams; }

constexpr std::string_view type_name(const StaticLine&) { return "StaticLine"; }
constexpr std::string_view type_name(const PiModelLine&) { return "PiModelLine"; }
constexpr std::string_view type_name(const Transformer&) { return "Transformer"; }
constexpr std::string_view type_name(const RLLine&) { return "RLLine"; }

void check(std::vector<std::string>& out, bool ok, const char* message) {
    if (!ok) out.emplace_back(message);
}

std::vector<std::string> violations(const StaticLine& m) {
    std::vector<std::string> out;
    check(out, m.Y() != Phasor{0.0, 0.0}, "Y must be nonzero");
    return out;
}

std::vector<std::string> violations(const PiModelLine& m) {
    std::vector<std::string> out;
    check(out, m.y() != Phasor{0.0, 0.0}, "y must be nonzero");
    return out;
}

std::vector<std::string> violations(const Transformer& m) {
    std::vector<std::string> out;
    check(out, m.y() != Phasor{0.0, 0.0}, "y must be nonzero");
    check(out, m.t_ratio() != Phasor{0.0, 0.0}, "t_ratio must be nonzero");
    return out;
}

std::vector<std::string> violations(const RLLine& m) {
    std::vector<std::string> out;
    check(out, m.R >= 0.0, "R must be >= 0");
    check(out, m.L > 0.0, "L must be > 0");
    check(out, m.omega_nominal > 0.0, "ω_N must be > 0");
    return out;
}

Phasor rl_impedance(const RLLine& m) { return {m.R, m.omega_nominal * m.L}; }

void currents(const StaticLine& m, Phasor u_from, Phasor u_to, std::span<const double>,
              Phasor& I_from, Phasor& I_to, std::span<double>) {
    I_from = m.Y() * (u_from - u_to);
    I_to = -I_from;
}

void currents(const PiModelLine& m, Phasor u_from, Phasor u_to, std::span<const double>,
              Phasor& I_from, Phasor& I_to, std::span<double>) {
    I_from = m.y() * (u_from - u_to) + m.y_shunt_from() * u_from;
    I_to = m.y() * (u_to - u_from) + m.y_shunt_to() * u_to;
}

void currents(const Transformer& m, Phasor u_from, Phasor u_to, std::span<const double>,
              Phasor& I_from, Phasor& I_to, std::span<double>) {
    const Phasor t = m.t_ratio();
    const Phasor y = m.y();
    I_from = y / std::norm(t) * u_from - y / std::conj(t) * u_to;
    I_to = -y / t * u_from + y * u_to;
}

void currents(const RLLine& m, Phasor u_from, Phasor u_to, std::span<const double> x,
              Phasor& I_from, Phasor& I_to, std::span<double> dx) {
    const Phasor I{x[0], x[1]};
    I_from = I;
    I_to = -I;
    const Phasor dI = (u_from - u_to - rl_impedance(m) * I) / m.L;
    dx[0] = dI.real();
    dx[1] = dI.imag();
}

}  // namespace

std::string_view line_type_name(const LineModel& m) {
    return std::visit([](const auto& model) { return type_name(model); }, m);
}

std::vector<std::string_view> line_internal_names(const LineModel& m) {
    if (std::holds_alternative<RLLine>(m)) return {"I_re", "I_im"};
    return {};
}

int line_internal_count(const LineModel& m) {
    return static_cast<int>(line_internal_names(m).size());
}

std::vector<bool> line_mass_flags(const LineModel& m) {
    if (std::holds_alternative<RLLine>(m)) return {true, true};
    return {};
}

std::vector<std::string> line_violations(const LineModel& m) {
    auto out = std::visit([](const auto& model) { return violations(model); }, m);
    std::visit(
        [&out](const auto& model) {
            for (const auto& def : param_defs<std::decay_t<decltype(model)>>()) {
                if (!is_finite(model.*(def.field))) {
                    out.push_back(std::string(def.name) + " must be finite");
                }
            }
        },
        m);
    return out;
}

void line_currents(const LineModel& m, Phasor u_from, Phasor u_to, std::span<const double> x_int,
                   Phasor& I_from, Phasor& I_to, std::span<double> dx_int) {
    std::visit([&](const auto& model) { currents(model, u_from, u_to, x_int, I_from, I_to, dx_int); },
               m);
}

std::vector<double> line_initial_internals(const LineModel& m, Phasor u_from, Phasor u_to) {
    if (const auto* rl = std::get_if<RLLine>(&m)) {
        const Phasor I = (u_from - u_to) / rl_impedance(*rl);
        return {I.real(), I.imag()};
    }
    return {};
}

std::vector<std::string_view> line_param_names(const LineModel& m) {
    return std::visit(
        [](const auto& model) {
            std::vector<std::string_view> names;
            for (const auto& def : param_defs<std::decay_t<decltype(model)>>()) {
                names.push_back(def.name);
            }
            return names;
        },
        m);
}

bool line_has_param(const LineModel& m, std::string_view name) {
    return std::visit(
        [name](const auto& model) {
            for (const auto& def : param_defs<std::decay_t<decltype(model)>>()) {
                if (def.name == name) return true;
            }
            return false;
        },
        m);
}

double line_get_param(const LineModel& m, std::string_view name) {
    return std::visit(
        [&](const auto& model) -> double {
            for (const auto& def : param_defs<std::decay_t<decltype(model)>>()) {
                if (def.name == name) return model.*(def.field);
            }
            throw LookupError("grid", "model " + std::string(type_name(model)) +
                                          " has no parameter '" + std::string(name) + "'");
        },
        m);
}

void line_set_param(LineModel& m, std::string_view name, double value) {
    std::visit(
        [&](auto& model) {
            for (const auto& def : param_defs<std::decay_t<decltype(model)>>()) {
                if (def.name == name) {
                    model.*(def.field) = value;
                    return;
                }
            }
            throw LookupError("grid", "model " + std::string(type_name(model)) +
                                          " has no parameter '" + std::string(name) + "'");
        },
        m);
}

}  // namespace phasordyn
