#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmfg/riccati.hpp"
#include "support.hpp"

#include <cmath>

using namespace hmfg;
using hmfg::testing::scalar;

TEST_CASE("zero system stays at zero") {
    const LqSystem sys = LqSystem::constant(Mat::Zero(3, 3), Mat::Zero(3, 1), Mat::Zero(3, 3), scalar(1));
    const RiccatiSegment s = integrate_riccati(sys, 1.0, Mat::Zero(3, 3), 0.0, 0.1);
    for (const Mat& P : s.Pi) CHECK(P.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar closed form tanh") {
    const double T = 3.0;
    const LqSystem sys = LqSystem::constant(scalar(0), scalar(1), scalar(1), scalar(1));
    const RiccatiSegment s = integrate_riccati(sys, T, scalar(0), 0.0, 0.01);
    CHECK(s.nodes() == 301);
    CHECK(s.at(T - 1.0)(0, 0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-9));
    CHECK(s.at(0.123)(0, 0) == doctest::Approx(std::tanh(T - 0.123)).epsilon(1e-7));
    CHECK(s.gain(T - 1.0)(0, 0) == doctest::Approx(-std::tanh(1.0)).epsilon(1e-9));
    CHECK(feedback_gain(s, 0.5).rows() == 1);

    // step halving moves the error by about 2^-4
    const RiccatiSegment c = integrate_riccati(sys, T, scalar(0), 0.0, 0.2);
    const RiccatiSegment f = integrate_riccati(sys, T, scalar(0), 0.0, 0.1);
    const double ec = std::abs(c.node(0)(0, 0) - std::tanh(T));
    const double ef = std::abs(f.node(0)(0, 0) - std::tanh(T));
    CHECK(ec / ef == doctest::Approx(16.0).epsilon(0.2));
}

TEST_CASE("terminal value is kept") {
    Mat Pbar(2, 2);
    Pbar << 2, 0.5, 0.5, 1;
    const LqSystem sys = LqSystem::constant(-Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2),
                                            Mat::Identity(2, 2));
    const RiccatiSegment s = integrate_riccati(sys, 2.0, Pbar, 0.0, 0.01);
    CHECK(s.Pi.back() == Pbar);
}

TEST_CASE("jump conditions") {
    const Mat P = (Mat(2, 2) << 3, 1, 1, 2).finished();
    CHECK(apply_jump_condition(P, Mat::Identity(2, 2), Mat::Zero(2, 2)) == P);
    Mat Psi(2, 3);
    Psi << 1, 0, 0, 0, 1, 0;
    const Mat before = apply_jump_condition(Mat::Identity(2, 2), Psi, Mat::Zero(3, 3));
    CHECK(before == Eigen::Vector3d(1, 1, 0).asDiagonal().toDenseMatrix());
    // stopping: nothing survives, the value before is the switching cost
    const Mat C = (Mat(3, 3) << 1, 0.2, 0, 0.2, 1, 0, 0, 0, 0).finished();
    CHECK(apply_jump_condition(Mat::Zero(0, 0), Mat::Zero(0, 3), C) == C);
}

TEST_CASE("identical modes give an identically zero gap") {
    const LqSystem sys = LqSystem::constant(scalar(0.3), scalar(1), scalar(2), scalar(1));
    const RiccatiSegment s = integrate_riccati(sys, 5.0, scalar(1), 0.0, 0.01);
    const GapFunction g = switch_gap(sys, sys, [&](double t) { return s.at(t); }, scalar(1), scalar(0));
    for (double t : {0.0, 1.3, 4.9}) CHECK(g(t).norm() == 0.0);
    const EventSearch r = find_event_time(g, 0.0, 5.0);
    CHECK_FALSE(r.time);
    CHECK(r.identically_zero);
}

TEST_CASE("stopping gap closed form") {
    const double A = -0.4, B = 1.5, R = 2.0, P = 1.0, C = 0.7;
    const LqSystem sys = LqSystem::constant(scalar(A), scalar(B), scalar(P), scalar(R));
    const GapFunction g = stopping_gap(sys, [&](double) { return scalar(C); });
    CHECK(g(2.0)(0, 0) == doctest::Approx(P - C * B / R * B * C + 2 * C * A).epsilon(1e-14));
}

TEST_CASE("linear gap root") {
    GapFunction g{[](double s) { return scalar(s - 5.0); }};
    const EventSearch r = find_event_time(g, 0.0, 18.0);
    REQUIRE(r.time);
    // bisection oracle on the same function
    double lo = 0.0, hi = 18.0;
    for (int i = 0; i < 200; ++i) ((lo + hi) / 2 - 5.0 < 0 ? lo : hi) = (lo + hi) / 2;
    CHECK(*r.time == doctest::Approx(lo).epsilon(1e-9));
}

TEST_CASE("definite gap has no event") {
    GapFunction g{[](double s) { return scalar(1.0 + s * s); }};
    const EventSearch r = find_event_time(g, 0.0, 10.0);
    CHECK_FALSE(r.time);
    CHECK_FALSE(r.identically_zero);
}

TEST_CASE("two crossings are ambiguous") {
    GapFunction g{[](double s) { return scalar(std::sin(s)); }};
    // -sin crosses upward at pi and 3 pi
    GapFunction h{[](double s) { return scalar(-std::sin(s)); }};
    CHECK_NOTHROW(find_event_time(g, 1.0, 8.0));
    CHECK_THROWS_AS(find_event_time(h, 1.0, 11.0), AmbiguityError);
}

TEST_CASE("two-mode scalar gap against a dense scan") {
    // after the switch: A = -1, P = 1 to T with zero terminal weight
    const double T = 4.0;
    const LqSystem after = LqSystem::constant(scalar(-1), scalar(1), scalar(1), scalar(1));
    const RiccatiSegment sol = integrate_riccati(after, T, scalar(0), 0.0, 0.001);
    auto Pi = [&](double t) { return sol.at(t); };

    auto scan = [&](const GapFunction& gf) {
        const int M = 10000;
        std::vector<double> roots;
        double prev = gf(0.0)(0, 0);
        for (int i = 1; i < M; ++i) {
            const double t = T * i / M, v = gf(t)(0, 0);
            if (prev < 0 && v >= 0) roots.push_back(t);
            prev = v;
        }
        return roots;
    };
    EventOptions eo;
    eo.h = 0.01;

    // A = 1 before: the gap is 2 (1 - (-1)) Pi, zero only at T
    const LqSystem unstable = LqSystem::constant(scalar(1), scalar(1), scalar(1), scalar(1));
    const GapFunction g1 = switch_gap(unstable, after, Pi, scalar(1), scalar(0));
    CHECK(scan(g1).empty());
    CHECK_FALSE(find_event_time(g1, 0.0, T, eo).time);

    // A = -2, P = 1.5 before: the gap 0.5 - 2 Pi turns positive where Pi falls below 1/4
    const LqSystem damped = LqSystem::constant(scalar(-2), scalar(1), scalar(1.5), scalar(1));
    const GapFunction g2 = switch_gap(damped, after, Pi, scalar(1), scalar(0));
    const auto roots = scan(g2);
    REQUIRE(roots.size() == 1);
    const EventSearch r = find_event_time(g2, 0.0, T, eo);
    REQUIRE(r.time);
    CHECK(std::abs(*r.time - roots.front()) <= eo.h);
    CHECK(sol.at(*r.time)(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("gain shape") {
    const LqSystem sys = LqSystem::constant(Mat::Identity(4, 4), Mat::Ones(4, 2), Mat::Identity(4, 4),
                                            Mat::Identity(2, 2));
    const RiccatiSegment s = integrate_riccati(sys, 1.0, Mat::Zero(4, 4), 0.0, 0.05);
    CHECK(s.gain(0.3).rows() == 2);
    CHECK(s.gain(0.3).cols() == 4);
    CHECK(s.gain(1.0).norm() == 0.0);
}

TEST_CASE("finite escape is reported") {
    // -p' = -1 - p^2 gives p = -tan(T - t), which escapes at T - pi/2
    const LqSystem sys = LqSystem::constant(scalar(0), scalar(1), scalar(-1), scalar(1));
    IntegrateOptions io;
    io.check_psd = false;
    CHECK_THROWS_AS(integrate_riccati(sys, 5.0, scalar(0), 0.0, 0.01, io), SolverError);
}
