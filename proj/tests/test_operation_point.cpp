#include <doctest.h>

#include <cmath>

#include "phasordyn/assembly.hpp"
#include "phasordyn/errors.hpp"
#include "phasordyn/operation_point.hpp"
#include "test_support.hpp"

using namespace phasordyn;
using namespace testsupport;

TEST_CASE("single slack operation point") {
    PowerGrid g;
    g.add_node("bus1", SlackAlgebraic{1.0, 0.0});
    const State op = find_operationpoint(g);
    CHECK(op.get("bus1", "u_re") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(op.get("bus1", "u_im") == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two-bus analytic power flow") {
    const State op = find_operationpoint(two_bus_grid());
    const double b = -0.015;
    const double a = (1.0 + std::sqrt(1.0 - 4.0 * b * b)) / 2.0;
    CHECK(std::abs(op.voltage("bus2") - Phasor{a, b}) < 1e-6);
}

TEST_CASE("slack plus droop inverter settles on the published equilibrium") {
    const PowerGrid g = slack_vsi_grid();
    const State op = find_operationpoint(g);
    CHECK(std::abs(op.get("bus2", "ω")) < 1e-9);

    // q_m equals the measured reactive power at the terminal
    const std::vector<Phasor> u{op.voltage("bus1"), op.voltage("bus2")};
    const auto inj = aggregate_currents(g, u);
    const double q = complex_power(u[1], inj[1]).imag();
    CHECK(op.get("bus2", "q_m") == doctest::Approx(q).epsilon(1e-8));
    // active power is pinned to the set-point
    CHECK(complex_power(u[1], inj[1]).real() == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("default guess") {
    PowerGrid g;
    g.add_node("bus1", SlackAlgebraic{0.98, 0.01});
    g.add_node("bus2", listing_vsi());
    g.add_node("bus3", GridFollowingPLL{.tau_v = 0.05,
                                        .K_pll_p = 2.0,
                                        .K_pll_i = 20.0,
                                        .K_P = 0.5,
                                        .K_Q = 0.5,
                                        .V_r = 1.0,
                                        .P = 0.2,
                                        .Q = 0.0});
    g.add_line("b1", StaticLine{2.0, -20.0}, "bus1", "bus2");
    g.add_line("b2", StaticLine{2.0, -20.0}, "bus2", "bus3");
    const State guess = default_guess(g);
    CHECK(guess.voltage("bus1") == Phasor{0.98, 0.01});
    CHECK(guess.voltage("bus2") == Phasor{1.0, 0.0});
    CHECK(guess.get("bus2", "ω") == 0.0);
    CHECK(guess.get("bus2", "q_m") == 0.1);
    CHECK(guess.get("bus3", "θ") == 0.0);
    CHECK(guess.get("bus3", "ε") == 0.0);
    CHECK(guess.get("bus3", "vf_re") == 1.0);
    CHECK(guess.get("bus3", "vf_im") == 0.0);
}

TEST_CASE("reinit_algebraic") {
    SUBCASE("a consistent state returns unchanged") {
        const PowerGrid g = two_bus_grid();
        const State op = find_operationpoint(g);
        const State back = reinit_algebraic(g, op);
        CHECK(back.values() == op.values());
    }

    SUBCASE("a perturbed slack voltage is restored exactly") {
        PowerGrid g;
        g.add_node("bus1", SlackAlgebraic{1.0, 0.0});
        auto layout = build_layout(g);
        State s(layout);
        s.set("bus1", "u_re", 0.9);
        const State fixed = reinit_algebraic(g, s);
        CHECK(std::abs(fixed.get("bus1", "u_re") - 1.0) < 1e-12);
        CHECK(std::abs(fixed.get("bus1", "u_im")) < 1e-12);
    }

    SUBCASE("differential components are bit-identical") {
        const PowerGrid g = slack_vsi_grid();
        State s = default_guess(g);
        s.set("bus2", "ω", 0.123);
        s.set("bus1", "u_re", 0.7);  // inconsistent algebraic entry
        const State fixed = reinit_algebraic(g, s);
        CHECK(fixed.get("bus2", "ω") == 0.123);
        CHECK(fixed.get("bus2", "q_m") == s.get("bus2", "q_m"));
        CHECK(std::abs(fixed.get("bus1", "u_re") - 1.0) < 1e-10);
    }

    SUBCASE("an islanded constant-power node has no consistent state") {
        PowerGrid g;
        g.add_node("bus1", SlackAlgebraic{});
        g.add_node("bus2", PQAlgebraic{-0.3, 0.0});
        // no line: the PQ node is islanded with nonzero P
        CHECK_THROWS_AS(reinit_algebraic(g, default_guess(g)), ConvergenceError);
    }
}

TEST_CASE("nlsolve is a bit-identical alias of rootfind") {
    for (const auto& g : {two_bus_grid(), validation_grid()}) {
        const State a = find_operationpoint(g, OpMethod::rootfind);
        const State b = find_operationpoint(g, OpMethod::nlsolve);
        CHECK(a.values() == b.values());
    }
}

TEST_CASE("rootfind and dynamic agree") {
    const PowerGrid g = validation_grid();
    const State a = find_operationpoint(g, OpMethod::rootfind);
    const State b = find_operationpoint(g, OpMethod::dynamic);
    CHECK((a.values() - b.values()).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("residual certificate") {
    for (const auto& g : {two_bus_grid(), validation_grid(), ieee14_grid()}) {
        const State op = find_operationpoint(g);
        const RhsFunction rhs = build_rhs(g);
        CHECK(rhs(0.0, op.values()).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("a grid without a phase reference is reported as singular") {
    // two droop inverters with zero set-points: every global rotation of an
    // equilibrium is another equilibrium
    PowerGrid g;
    VSIVoltagePT1 inv = listing_vsi();
    inv.P = 0.0;
    inv.Q = 0.0;
    g.add_node("bus1", inv);
    g.add_node("bus2", inv);
    g.add_line("branch1", StaticLine{0.0, -10.0}, "bus1", "bus2");

    CHECK_THROWS_AS(find_operationpoint(g, OpMethod::rootfind), SingularJacobianError);

    // the dynamic method settles somewhere on the orbit instead
    const State op = find_operationpoint(g, OpMethod::dynamic);
    const RhsFunction rhs = build_rhs(g);
    CHECK(rhs(0.0, op.values()).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("argument validation") {
    PowerGrid empty;
    CHECK_THROWS_AS(find_operationpoint(empty), Error);

    const PowerGrid g = two_bus_grid();
    const PowerGrid other = validation_grid();
    CHECK_THROWS_AS(find_operationpoint(g, OpMethod::rootfind, default_guess(other)), Error);
}
