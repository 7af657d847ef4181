#include "phasordyn/node_models.hpp"

#include <cmath>
#include <numbers>

#include "phasordyn/errors.hpp"

namespace phasordyn {

namespace {

template <class M>
struct ParamDef {
    std::string_view name;
    double M::* field;
};

constexpr ParamDef<SlackAlgebraic> kSlackParams[] = {
    {"U_re", &SlackAlgebraic::U_re},
    {"U_im", &SlackAlgebraic::U_im},
};

constexpr ParamDef<PQAlgebraic> kPQParams[] = {
    {"P", &PQAlgebraic::P},
    {"Q", &PQAlgebraic::Q},
};

constexpr ParamDef<FourthOrderEq> kFourthOrderParams[] = {
    {"H", &FourthOrderEq::H},
    {"D", &FourthOrderEq::D},
    {"P", &FourthOrderEq::P},
    {"E_f", &FourthOrderEq::E_f},
    {"T_d_dash", &FourthOrderEq::T_d_dash},
    {"T_q_dash", &FourthOrderEq::T_q_dash},
    {"X_d", &FourthOrderEq::X_d},
    {"X_q", &FourthOrderEq::X_q},
    {"X_d_dash", &FourthOrderEq::X_d_dash},
    {"X_q_dash", &FourthOrderEq::X_q_dash},
    {"Ω", &FourthOrderEq::omega},
};

constexpr ParamDef<VSIVoltagePT1> kVSIParams[] = {
    {"τ_v", &VSIVoltagePT1::tau_v},
    {"τ_P", &VSIVoltagePT1::tau_P},
    {"τ_Q", &VSIVoltagePT1::tau_Q},
    {"K_P", &VSIVoltagePT1::K_P},
    {"K_Q", &VSIVoltagePT1::K_Q},
    {"V_r", &VSIVoltagePT1::V_r},
    {"P", &VSIVoltagePT1::P},
    {"Q", &VSIVoltagePT1::Q},
};

constexpr ParamDef<GridFollowingPLL> kPLLParams[] = {
    {"τ_v", &GridFollowingPLL::tau_v},
    {"K_pll_p", &GridFollowingPLL::K_pll_p},
    {"K_pll_i", &GridFollowingPLL::K_pll_i},
    {"K_P", &GridFollowingPLL::K_P},
    {"K_Q", &GridFollowingPLL::K_Q},
    {"V_r", &GridFollowingPLL::V_r},
    {"P", &GridFollowingPLL::P},
    {"Q", &GridFollowingPLL::Q},
};

template <class M>
constexpr std::span<const ParamDef<M>> param_defs();

template <>
constexpr std::span<const ParamDef<SlackAlgebraic>> param_defs() { return kSlackParams; }
template <>
constexpr std::span<const ParamDef<PQAlgebraic>> param_defs() { return kPQParams; }
template <>
constexpr std::span<const ParamDef<FourthOrderEq>> param_defs() { return kFourthOrderParams; }
template <>
constexpr std::span<const ParamDef<VSIVoltagePT1>> param_defs() { return kVSIParams; }
template <>
constexpr std::span<const ParamDef<GridFollowingPLL>> param_defs() { return kPLLParams; }

constexpr std::string_view type_name(const SlackAlgebraic&) { return "SlackAlgebraic"; }
constexpr std::string_view type_name(const PQAlgebraic&) { return "PQAlgebraic"; }
constexpr std::string_view type_name(const FourthOrderEq&) { return "FourthOrderEq"; }
constexpr std::string_view type_name(const VSIVoltagePT1&) { return "VSIVoltagePT1"; }
constexpr std::string_view type_name(const GridFollowingPLL&) { return "GridFollowingPLL"; }

void check(std::vector<std::string>& out, bool ok, const char* message) {
    if (!ok) out.emplace_back(message);
}

std::vector<std::string> violations(const SlackAlgebraic& m) {
    std::vector<std::string> out;
    check(out, std::abs(m.U()) > 0.0, "|U| must be > 0");
    return out;
}

std::vector<std::string> violations(const PQAlgebraic&) { return {}; }

std::vector<std::string> violations(const FourthOrderEq& m) {
    std::vector<std::string> out;
    check(out, m.H > 0.0, "H must be > 0");
    check(out, m.T_d_dash > 0.0, "T_d_dash must be > 0");
    check(out, m.T_q_dash > 0.0, "T_q_dash must be > 0");
    check(out, m.X_d >= m.X_d_dash && m.X_d_dash > 0.0, "X_d >= X_d_dash > 0 required");
    check(out, m.X_q >= m.X_q_dash && m.X_q_dash > 0.0, "X_q >= X_q_dash > 0 required");
    check(out, m.omega > 0.0, "Ω must be > 0");
    return out;
}

std::vector<std::string> violations(const VSIVoltagePT1& m) {
    std::vector<std::string> out;
    check(out, m.tau_v > 0.0, "τ_v must be > 0");
    check(out, m.tau_P > 0.0, "τ_P must be > 0");
    check(out, m.tau_Q > 0.0, "τ_Q must be > 0");
    check(out, m.K_P > 0.0, "K_P must be > 0");
    check(out, m.K_Q > 0.0, "K_Q must be > 0");
    return out;
}

std::vector<std::string> violations(const GridFollowingPLL& m) {
    std::vector<std::string> out;
    check(out, m.tau_v > 0.0, "τ_v must be > 0");
    check(out, m.K_pll_p >= 0.0, "K_pll_p must be >= 0");
    check(out, m.K_pll_i > 0.0, "K_pll_i must be > 0");
    check(out, m.K_P >= 0.0, "K_P must be >= 0");
    check(out, m.K_Q >= 0.0, "K_Q must be >= 0");
    return out;
}

// --- right-hand sides ---------------------------------------------------

void rhs(const SlackAlgebraic& m, Phasor u, Phasor /*i*/, std::span<const double>, double,
         Phasor& r_u, std::span<double>) {
    r_u = u - m.U();
}

void rhs(const PQAlgebraic& m, Phasor u, Phasor i, std::span<const double>, double, Phasor& r_u,
         std::span<double>) {
    r_u = complex_power(u, i) - Phasor{m.P, m.Q};
}

void rhs(const FourthOrderEq& m, Phasor u, Phasor i, std::span<const double> x, double,
         Phasor& r_u, std::span<double> r) {
    const double theta = x[0];
    const double omega = x[1];
    const Phasor to_rotor = std::polar(1.0, -theta);
    const Phasor e_c = u * to_rotor;
    const Phasor i_c = i * to_rotor;
    const double e_d = e_c.real(), e_q = e_c.imag();
    const double i_d = i_c.real(), i_q = i_c.imag();
    const double p = complex_power(u, i).real();

    const double de_d = (-e_d + (m.X_q - m.X_q_dash) * i_q) / m.T_q_dash;
    const double de_q = (-e_q - (m.X_d - m.X_d_dash) * i_d + m.E_f) / m.T_d_dash;
    const double dtheta = omega;
    const double domega =
        m.omega / (2.0 * m.H) *
        (m.P - m.D * omega - p - (m.X_q_dash - m.X_d_dash) * i_d * i_q);

    r_u = std::polar(1.0, theta) * Phasor{de_d, de_q} + u * Phasor{0.0, omega};
    r[0] = dtheta;
    r[1] = domega;
}

void rhs(const VSIVoltagePT1& m, Phasor u, Phasor i, std::span<const double> x, double,
         Phasor& r_u, std::span<double> r) {
    const double omega = x[0];
    const double q_m = x[1];
    const Phasor s = complex_power(u, i);
    const double p = s.real();
    const double q = s.imag();
    const double dphi = omega;
    const double v = std::abs(u);
    const double dv = (-v + m.V_r - m.K_Q * (q_m - m.Q)) / m.tau_v;
    const double dq_m = (q - q_m) / m.tau_Q;
    // v = 0 turns u/v into NaN, the solver-level singular-input guard.
    r_u = u * Phasor{0.0, dphi} + dv * (u / v);
    r[0] = (-omega - m.K_P * (p - m.P)) / m.tau_P;
    r[1] = dq_m;
}

void rhs(const GridFollowingPLL& m, Phasor u, Phasor i, std::span<const double> x, double,
         Phasor& r_u, std::span<double> r) {
    const double theta = x[0];
    const double eps = x[1];
    const Phasor u_f{x[2], x[3]};
    const double v_q = (u * std::polar(1.0, -theta)).imag();
    const double omega_pll = m.K_pll_p * v_q + eps;
    const Phasor du_f = (u - u_f) / m.tau_v;
    const Phasor s_cmd{m.P - m.K_P * omega_pll, m.Q + m.K_Q * (m.V_r - std::abs(u_f))};
    r_u = i - std::conj(s_cmd / u);
    r[0] = omega_pll;
    r[1] = m.K_pll_i * v_q;
    r[2] = du_f.real();
    r[3] = du_f.imag();
}

}  // namespace

std::string_view node_type_name(const NodeModel& m) {
    return std::visit([](const auto& model) { return type_name(model); }, m);
}

std::vector<bool> node_mass_flags(const NodeModel& m) {
    struct Visitor {
        std::vector<bool> operator()(const SlackAlgebraic&) const { return {false, false}; }
        std::vector<bool> operator()(const PQAlgebraic&) const { return {false, false}; }
        std::vector<bool> operator()(const FourthOrderEq&) const {
            return {true, true, true, true};
        }
        std::vector<bool> operator()(const VSIVoltagePT1&) const {
            return {true, true, true, true};
        }
        std::vector<bool> operator()(const GridFollowingPLL&) const {
            return {false, false, true, true, true, true};
        }
    };
    return std::visit(Visitor{}, m);
}

std::vector<std::string_view> node_internal_names(const NodeModel& m) {
    struct Visitor {
        std::vector<std::string_view> operator()(const SlackAlgebraic&) const { return {}; }
        std::vector<std::string_view> operator()(const PQAlgebraic&) const { return {}; }
        std::vector<std::string_view> operator()(const FourthOrderEq&) const {
            return {"θ", "ω"};
        }
        std::vector<std::string_view> operator()(const VSIVoltagePT1&) const {
            return {"ω", "q_m"};
        }
        std::vector<std::string_view> operator()(const GridFollowingPLL&) const {
            return {"θ", "ε", "vf_re", "vf_im"};
        }
    };
    return std::visit(Visitor{}, m);
}

int node_internal_count(const NodeModel& m) {
    return static_cast<int>(node_internal_names(m).size());
}

std::vector<std::string> node_violations(const NodeModel& m) {
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

void node_rhs(const NodeModel& m, Phasor u, Phasor i, std::span<const double> x_int, double t,
              Phasor& r_u, std::span<double> r_int) {
    std::visit([&](const auto& model) { rhs(model, u, i, x_int, t, r_u, r_int); }, m);
}

std::vector<double> node_initial_internals(const NodeModel& m, Phasor u) {
    struct Visitor {
        Phasor u;
        std::vector<double> operator()(const SlackAlgebraic&) const { return {}; }
        std::vector<double> operator()(const PQAlgebraic&) const { return {}; }
        std::vector<double> operator()(const FourthOrderEq&) const {
            // open-circuit relation: u = j e_q e^{jθ}, so the rotor angle sits
            // a quarter turn behind the voltage angle
            return {std::arg(u) - std::numbers::pi / 2.0, 0.0};
        }
        std::vector<double> operator()(const VSIVoltagePT1& m) const { return {0.0, m.Q}; }
        std::vector<double> operator()(const GridFollowingPLL&) const {
            return {std::arg(u), 0.0, u.real(), u.imag()};
        }
    };
    return std::visit(Visitor{u}, m);
}

std::optional<double> node_derived(const NodeModel& m, std::string_view var, Phasor u,
                                   std::span<const double> x_int) {
    if (var != "ω") return std::nullopt;
    if (const auto* pll = std::get_if<GridFollowingPLL>(&m)) {
        const double v_q = (u * std::polar(1.0, -x_int[0])).imag();
        return pll->K_pll_p * v_q + x_int[1];
    }
    return std::nullopt;
}

std::vector<std::string_view> node_param_names(const NodeModel& m) {
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

bool node_has_param(const NodeModel& m, std::string_view name) {
    return std::visit(
        [name](const auto& model) {
            for (const auto& def : param_defs<std::decay_t<decltype(model)>>()) {
                if (def.name == name) return true;
            }
            return false;
        },
        m);
}

double node_get_param(const NodeModel& m, std::string_view name) {
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

void node_set_param(NodeModel& m, std::string_view name, double value) {
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
