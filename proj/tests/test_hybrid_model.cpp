#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmfg/scenario.hpp"

#include <set>

using namespace hmfg;

namespace {

Automaton sec4() { return paper_sec4_scenario().automaton(); }

}  // namespace

TEST_CASE("twelve edges over eight labels") {
    const Automaton aut = sec4();
    CHECK(aut.edges().size() == 12);
    std::set<std::pair<int, int>> seen;
    for (const auto& e : aut.edges()) seen.insert({int(e.from), int(e.to)});
    CHECK(seen.size() == 12);
    CHECK(aut.outgoing(Label::q1ab).size() == 3);
    CHECK(aut.outgoing(Label::q2).empty());
    CHECK(aut.incoming(Label::q1ab).empty());
    for (Label l : kAllLabels) CHECK(label_from_name(label_name(l)) == l);
}

TEST_CASE("major switch in the initial stage keeps the state") {
    const Automaton aut = sec4();
    const auto& e = aut.edge(Label::q1ab, Label::q2ab);
    CHECK(e.event == Event::major_switch);
    CHECK(e.psi_major == Mat::Identity(6, 6));
    CHECK(aut.major_dim(Label::q1ab) == 6);
}

TEST_CASE("stopping of b drops its mean-field block") {
    const Automaton aut = sec4();
    const auto& e = aut.edge(Label::q1ab, Label::q1a);
    Mat expect = Mat::Zero(4, 6);
    expect.block(0, 0, 2, 2).setIdentity();
    expect.block(2, 2, 2, 2).setIdentity();
    CHECK(e.psi_major == expect);
    CHECK(e.event == Event::pop_b_stops);
}

TEST_CASE("zero terminal weights give zero switching costs") {
    Scenario s = paper_sec4_scenario();
    for (auto& m : s.specs.major) m.Pbar.setZero();
    for (auto& m : s.specs.minor) m.Pbar.setZero();
    const Automaton aut = s.automaton();
    for (const auto& e : aut.edges()) {
        CHECK(e.cost_major.cwiseAbs().maxCoeff() == 0.0);
        for (const Mat& c : e.cost_minor)
            if (c.size()) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("pi_kron") {
    const Mat F = Mat::Identity(2, 2);
    Mat expect(2, 4);
    expect << 0.5, 0, 0.5, 0, 0, 0.5, 0, 0.5;
    CHECK(pi_kron(PopulationFractions::both(0.5, 0.5), F) == expect);
    const Mat G = Mat::Random(3, 2);
    CHECK(pi_kron(PopulationFractions::only(Pop::a), G) == G);
    CHECK(pi_kron(PopulationFractions::none(), G).cols() == 0);
}

TEST_CASE("mask_block") {
    Mat P(3, 3);
    P << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    CHECK(mask_block(P, 1, 3) == P);
    CHECK(mask_block(Mat::Zero(4, 4), 2, 3) == Mat::Zero(4, 4));
    // oracle: keep row 3 and column 3 by direct index selection
    Mat oracle = Mat::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i == 2 || j == 2) oracle(i, j) = P(i, j);
    CHECK(mask_block(P, 3, 3) == oracle);
    CHECK_THROWS_AS(mask_block(P, 0, 2), DimensionError);
    CHECK_THROWS_AS(mask_block(P, 2, 4), DimensionError);
}

TEST_CASE("diffusion compatibility") {
    const auto checks = check_diffusion_compat(sec4());
    REQUIRE(checks.size() == 12);
    for (const auto& c : checks) CHECK(c.pass());

    Scenario s = paper_sec4_scenario();
    s.specs.major[1].D(0, 0) += 1e-3;
    for (const auto& c : check_diffusion_compat(s.automaton())) {
        const bool crosses = state_of(c.from).major_mode != state_of(c.to).major_mode;
        if (c.from == Label::q1a && c.to == Label::q2a) CHECK(c.residual() == doctest::Approx(1e-3).epsilon(1e-9));
        CHECK(c.pass() == !crosses);
    }
}

TEST_CASE("dimensions per state") {
    const Automaton aut = sec4();
    CHECK(aut.major_dim(Label::q1a) == 4);
    CHECK(aut.major_dim(Label::q2) == 2);
    CHECK(aut.minor_dim(Label::q1ab, Pop::a) == 8);
    CHECK(aut.major_block(Label::q1b, Pop::a) == -1);
    CHECK(aut.major_block(Label::q1b, Pop::b) == 2);
}
