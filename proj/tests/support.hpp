#pragma once

#include "hmfg/scenario.hpp"

#include <cmath>
#include <functional>

namespace hmfg::testing {

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }

// Two minor types whose drift grows like -1.2 + 0.2 e^{rate t}; with unit weights each
// type's stopping gap is 2 A(t), so type a leaves at ln(6)/0.4 and type b at ln(6)/0.2.
inline Scenario stopping_scenario(double H0 = 0.5) {
    Scenario s;
    s.name = "stopping";
    s.n = s.m = s.r = 1;
    s.T = 15.0;
    s.dt = 0.01;
    ModeSpec mj;
    mj.A = TimeMatrix(scalar(-0.5));
    mj.B = scalar(1);
    mj.D = scalar(0.05);
    mj.P = scalar(1);
    mj.R = scalar(1);
    mj.Pbar = scalar(1);
    mj.H = scalar(H0);
    s.specs.major = {mj, mj};
    auto minor = [&](double rate) {
        ModeSpec k;
        TimeMatrix A(1, 1);
        A.at(0, 0).terms = {{-1.2, 0.0}, {0.2, rate}};
        k.A = A;
        k.B = scalar(1);
        k.D = scalar(0.05);
        k.P = scalar(1);
        k.R = scalar(1);
        k.Pbar = scalar(1);
        return k;
    };
    s.specs.minor = {minor(0.4), minor(0.2)};
    s.x0 = Vec::Constant(1, 1.0);
    s.xi_mean = {Vec::Constant(1, 2.0), Vec::Constant(1, -1.0)};
    s.xi_cov = {scalar(0.1), scalar(0.1)};
    return s;
}

// Scalar RK4 for -p' = q + 2 a p - (b^2/r) p^2, backward from p(t1) = p1 to t0; also returns
// int_{t0}^{t1} d^2 p dt by the trapezoid rule.
struct ScalarValue {
    double p0 = 0.0, trace = 0.0;
};

inline ScalarValue scalar_riccati(double a, double b, double r, double q, double d, double p1, double t0, double t1,
                                  double h) {
    auto f = [&](double p) { return q + 2 * a * p - b * b / r * p * p; };
    const int N = int(std::lround((t1 - t0) / h));
    double p = p1, tr = 0.0;
    for (int i = 0; i < N; ++i) {
        const double k1 = f(p), k2 = f(p + 0.5 * h * k1), k3 = f(p + 0.5 * h * k2), k4 = f(p + h * k3);
        const double pn = p + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        tr += 0.5 * h * d * d * (p + pn);
        p = pn;
    }
    return {p, tr};
}

}  // namespace hmfg::testing
