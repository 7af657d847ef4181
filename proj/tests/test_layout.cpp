#include <doctest.h>

#include <numbers>

#include "phasordyn/assembly.hpp"
#include "phasordyn/errors.hpp"
#include "test_support.hpp"

using namespace phasordyn;
using namespace testsupport;

TEST_CASE("slack-only layout") {
    PowerGrid g;
    g.add_node("bus1", SlackAlgebraic{});
    auto layout = build_layout(g);
    CHECK(layout->size() == 2);
    CHECK(layout->mass_diagonal() == std::vector<bool>{false, false});
}

TEST_CASE("slack + VSI layout matches the declared mass flags") {
    auto layout = build_layout(slack_vsi_grid());
    CHECK(layout->size() == 6);
    CHECK(layout->mass_diagonal() == std::vector<bool>{false, false, true, true, true, true});
    CHECK(layout->entry(2).var == "u_re");
    CHECK(layout->entry(4).var == "ω");
    CHECK(layout->entry(5).var == "q_m");
}

TEST_CASE("dynamic line internals come after all node blocks") {
    PowerGrid g;
    g.add_node("bus1", SlackAlgebraic{});
    g.add_node("bus2", PQAlgebraic{});
    g.add_line("branch1", RLLine{0.01, 0.001, g.omega_nominal()}, "bus1", "bus2");
    auto layout = build_layout(g);
    CHECK(layout->size() == 6);
    CHECK(layout->mass_diagonal() ==
          std::vector<bool>{false, false, false, false, true, true});
    CHECK(layout->entry(4).owner == "branch1");
    CHECK(layout->entry(4).var == "I_re");
    CHECK(layout->entry(5).var == "I_im");
}

TEST_CASE("layout round trip and determinism") {
    const PowerGrid g = validation_grid();
    auto a = build_layout(g);
    auto b = build_layout(g);
    CHECK(*a == *b);
    for (int i = 0; i < a->size(); ++i) {
        const auto& e = a->entry(i);
        CHECK(a->index_of(e.owner, e.var) == i);
    }
}

TEST_CASE("duplicate layout keys are a conflict") {
    StateLayout layout;
    layout.add("n", "u_re", false);
    CHECK_THROWS_AS(layout.add("n", "u_re", true), Error);
}

TEST_CASE("state accessors") {
    auto layout = build_layout(slack_vsi_grid());
    State s(layout);
    s.set("bus1", "u_re", 1.0);
    s.set("bus1", "u_im", 0.0);
    CHECK(s.get("bus1", "v") == 1.0);

    s.set_voltage("bus2", {0.0, 1.0});
    CHECK(s.get("bus2", "φ") == doctest::Approx(std::numbers::pi / 2));

    s.set("bus2", "ω", 0.25);
    CHECK(s.get("bus2", "ω") == 0.25);

    CHECK_THROWS_AS(s.get("bus9", "u_re"), LookupError);
    CHECK_THROWS_AS(s.get("bus1", "nonsense"), LookupError);
    CHECK_THROWS_AS(s.set("bus1", "u_re", std::nan("")), Error);

    Eigen::VectorXd bad = Eigen::VectorXd::Zero(layout->size());
    bad[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(State(layout, bad), Error);
    CHECK_THROWS_AS(State(layout, Eigen::VectorXd::Zero(3)), Error);
}
