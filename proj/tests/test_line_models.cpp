#include <doctest.h>

#include <numbers>
#include <random>

#include "phasordyn/errors.hpp"
#include "phasordyn/line_models.hpp"
#include "phasordyn/power_grid.hpp"
#include "test_support.hpp"

using namespace phasordyn;
using namespace testsupport;

namespace {

struct LineEval {
    Phasor I_from;
    Phasor I_to;
    std::vector<double> dx;
};

LineEval eval(const LineModel& m, Phasor u_from, Phasor u_to, std::vector<double> x = {}) {
    LineEval out;
    out.dx.resize(x.size());
    line_currents(m, u_from, u_to, x, out.I_from, out.I_to, out.dx);
    return out;
}

}  // namespace

TEST_CASE("static line") {
    const LineModel m = StaticLine{0.0, -20.0};
    CHECK(eval(m, {1.0, 0.2}, {1.0, 0.2}).I_from == Phasor{0.0, 0.0});

    const auto out = eval(m, {1.0, 0.0}, {0.9, 0.0});
    CHECK(std::abs(out.I_from - Phasor{0.0, -2.0}) < 1e-15);
    CHECK(std::abs(out.I_to - Phasor{0.0, 2.0}) < 1e-15);

    std::mt19937 rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto o = eval(m, random_phasor(rng), random_phasor(rng));
        CHECK(o.I_to == -o.I_from);
    }
}

TEST_CASE("pi-model line") {
    const Phasor u{1.07, -0.13};
    std::mt19937 rng(9);

    SUBCASE("zero shunts reduce to the static line") {
        const LineModel pi = PiModelLine{3.0, -12.0, 0.0, 0.0, 0.0, 0.0};
        const LineModel st = StaticLine{3.0, -12.0};
        for (int k = 0; k < 20; ++k) {
            const Phasor a = random_phasor(rng), b = random_phasor(rng);
            const auto p = eval(pi, a, b);
            const auto s = eval(st, a, b);
            CHECK(p.I_from == s.I_from);
            CHECK(p.I_to == s.I_to);
        }
    }

    SUBCASE("pure charging current at equal terminal voltages") {
        const LineModel pi = PiModelLine{3.0, -12.0, 0.0, 0.01, 0.0, 0.01};
        const auto out = eval(pi, {1.0, 0.0}, {1.0, 0.0});
        CHECK(std::abs(out.I_from - Phasor{0.0, 0.01}) < 1e-15);
        CHECK(std::abs(out.I_to - Phasor{0.0, 0.01}) < 1e-15);
    }

    SUBCASE("grounded far end") {
        const PiModelLine pi{3.0, -12.0, 0.5, 0.02, 0.0, 0.0};
        const auto out = eval(LineModel{pi}, u, {0.0, 0.0});
        CHECK(std::abs(out.I_from - (pi.y() + pi.y_shunt_from()) * u) < 1e-15);
    }
}

TEST_CASE("transformer") {
    std::mt19937 rng(13);

    SUBCASE("unit tap reduces to the static line") {
        const LineModel tr = Transformer{2.0, -20.0, 1.0, 0.0};
        const LineModel st = StaticLine{2.0, -20.0};
        for (int k = 0; k < 20; ++k) {
            const Phasor a = random_phasor(rng), b = random_phasor(rng);
            const auto t = eval(tr, a, b);
            const auto s = eval(st, a, b);
            CHECK(std::abs(t.I_from - s.I_from) < 1e-13);
            CHECK(std::abs(t.I_to - s.I_to) < 1e-13);
        }
    }

    SUBCASE("real taps give a reciprocal two-port") {
        const LineModel tr = Transformer{1.5, -9.0, 0.97, 0.0};
        // coefficient of u_to in I_from vs u_from in I_to
        const Phasor c12 = eval(tr, {0.0, 0.0}, {1.0, 0.0}).I_from;
        const Phasor c21 = eval(tr, {1.0, 0.0}, {0.0, 0.0}).I_to;
        CHECK(std::abs(c12 - c21) < 1e-14);
    }

    SUBCASE("hand-evaluated two-port matrix") {
        const LineModel tr = Transformer{1.0, 0.0, 2.0, 0.0};
        const auto out = eval(tr, {1.0, 0.0}, {0.0, 0.0});
        CHECK(std::abs(out.I_from - Phasor{0.25, 0.0}) < 1e-15);
        CHECK(std::abs(out.I_to - Phasor{-0.5, 0.0}) < 1e-15);
    }
}

TEST_CASE("rl line") {
    const double omega_n = 100.0 * std::numbers::pi;
    const RLLine rl{0.01, 0.001, omega_n};
    const Phasor z{rl.R, rl.omega_nominal * rl.L};

    SUBCASE("fixed point carries the static-line current") {
        std::mt19937 rng(21);
        for (int k = 0; k < 20; ++k) {
            const Phasor a = random_phasor(rng), b = random_phasor(rng);
            const Phasor i_ss = (a - b) / z;
            const auto out = eval(LineModel{rl}, a, b, {i_ss.real(), i_ss.imag()});
            CHECK(std::abs(Phasor{out.dx[0], out.dx[1]}) < 1e-12);
            CHECK(out.I_from == Phasor{i_ss.real(), i_ss.imag()});
            CHECK(out.I_to == -out.I_from);

            const auto st = eval(LineModel{StaticLine{(1.0 / z).real(), (1.0 / z).imag()}}, a, b);
            CHECK(std::abs(out.I_from - st.I_from) < 1e-12);
        }
    }

    SUBCASE("hand-evaluated derivative at zero current") {
        const auto out = eval(LineModel{rl}, {1.0, 0.0}, {0.9, 0.0}, {0.0, 0.0});
        CHECK(out.dx[0] == doctest::Approx(100.0).epsilon(1e-12));
        CHECK(out.dx[1] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("loss positivity for passive static lines") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> pos(0.0, 5.0);
    std::uniform_real_distribution<double> any(-5.0, 5.0);
    for (int k = 0; k < 50; ++k) {
        const StaticLine line{pos(rng) + 1e-3, any(rng)};  // Re(Y) > 0 implies Re(1/Y) > 0
        const Phasor a = random_phasor(rng), b = random_phasor(rng);
        const auto out = eval(LineModel{line}, a, b);
        CHECK(((a - b) * std::conj(out.I_from)).real() >= -1e-12);
    }
}

TEST_CASE("static models are linear in the terminal voltages") {
    std::mt19937 rng(37);
    const std::vector<LineModel> models{StaticLine{2.0, -8.0},
                                        PiModelLine{2.0, -8.0, 0.1, 0.05, 0.0, 0.02},
                                        Transformer{2.0, -8.0, 0.98, 0.05}};
    for (const auto& m : models) {
        for (int k = 0; k < 10; ++k) {
            const Phasor a1 = random_phasor(rng), b1 = random_phasor(rng);
            const Phasor a2 = random_phasor(rng), b2 = random_phasor(rng);
            const auto sum = eval(m, a1 + a2, b1 + b2);
            const auto o1 = eval(m, a1, b1);
            const auto o2 = eval(m, a2, b2);
            CHECK(std::abs(sum.I_from - (o1.I_from + o2.I_from)) < 1e-12);
            CHECK(std::abs(sum.I_to - (o1.I_to + o2.I_to)) < 1e-12);
        }
    }
}

TEST_CASE("line parameter validation and reflection") {
    PowerGrid g;
    g.add_node("a", SlackAlgebraic{});
    g.add_node("b", PQAlgebraic{});
    CHECK_THROWS_AS(g.add_line("l", StaticLine{0.0, 0.0}, "a", "b"), Error);
    CHECK_THROWS_AS(g.add_line("l", Transformer{1.0, 0.0, 0.0, 0.0}, "a", "b"), Error);
    CHECK_THROWS_AS(g.add_line("l", RLLine{-0.1, 0.001, 100.0}, "a", "b"), Error);
    CHECK_THROWS_AS(g.add_line("l", RLLine{0.1, 0.0, 100.0}, "a", "b"), Error);

    LineModel m = RLLine{0.02, 0.003, 314.0};
    CHECK(line_param_names(m) == std::vector<std::string_view>{"R", "L", "ω_N"});
    CHECK(line_get_param(m, "ω_N") == 314.0);
    line_set_param(m, "R", 0.05);
    CHECK(std::get<RLLine>(m).R == 0.05);
    CHECK_THROWS_AS(line_set_param(m, "Y_re", 1.0), LookupError);
    CHECK(line_internal_names(m) == std::vector<std::string_view>{"I_re", "I_im"});
    CHECK(line_mass_flags(m) == std::vector<bool>{true, true});
    CHECK(line_internal_count(LineModel{StaticLine{1.0, 0.0}}) == 0);
}
