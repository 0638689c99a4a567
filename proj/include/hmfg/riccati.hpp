#pragma once

#include "hmfg/hybrid_model.hpp"
#include "hmfg/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hmfg {

// dx = (A(t) x + B u) dt + ..., running cost x'Qx + u'Ru.
struct LqSystem {
    std::function<void(double, Mat&)> A;  // writes A(t) into a d x d buffer
    Mat B, Q, R;
    Mat RinvBt;  // R^{-1} B'
    Mat S;       // B R^{-1} B'

    LqSystem() = default;
    LqSystem(std::function<void(double, Mat&)> a, Mat b, Mat q, Mat r);
    static LqSystem constant(const Mat& a, Mat b, Mat q, Mat r);

    int dim() const { return int(Q.rows()); }
    Mat A_at(double t) const;
};

// Q + Pi A + A' Pi - Pi S Pi, i.e. -dPi/dt.
Mat riccati_rhs(const LqSystem& sys, double t, const Mat& Pi);

// Pi on the nodes t0 + i*h, i = 0..N, with dPi/dt stored for Hermite interpolation.
struct RiccatiSegment {
    double t0 = 0.0, h = 0.0;
    std::vector<Mat> Pi, dPi;
    Mat RinvBt;

    int nodes() const { return int(Pi.size()); }
    double t1() const { return t0 + h * (nodes() - 1); }
    int dim() const { return Pi.empty() ? 0 : int(Pi.front().rows()); }
    bool contains(double t) const;
    const Mat& node(int i) const { return Pi[i]; }

    Mat at(double t) const;              // cubic Hermite between nodes
    Mat gain(double t) const;            // -R^{-1} B' Pi(t), Pi linear between nodes
    Mat gain_node(int i) const { return -RinvBt * Pi[i]; }
};

struct IntegrateOptions {
    double blowup = 1e12;
    bool check_psd = true;
    double psd_tol = 1e-8;
    std::string label;  // used in error messages
};

RiccatiSegment integrate_riccati(const LqSystem& sys, double t_end, const Mat& Pi_end,
                                 double t_start, double h, const IntegrateOptions& opt = {});

// Psi' Pi Psi + C for the given agent class (kMajor, 0 = a, 1 = b).
Mat apply_jump_condition(const Mat& Pi_after, const JumpTransition& edge, int agent);
Mat apply_jump_condition(const Mat& Pi_after, const Mat& Psi, const Mat& C);

struct GapFunction {
    std::function<Mat(double)> eval;

    Mat operator()(double s) const { return symmetrized(eval(s)); }
    // (lambda_min, lambda_max); (0, 0) for an empty matrix.
    std::pair<double, double> eig_range(double s) const;
};

// H(s) = rhs_before(Psi' Pi(s) Psi + C(s)) - Psi' rhs_after(Pi(s)) Psi + dC/dt(s).
GapFunction switch_gap(const LqSystem& before, const LqSystem& after,
                       std::function<Mat(double)> Pi_after, Mat Psi,
                       std::function<Mat(double)> C, std::function<Mat(double)> dC = {});
GapFunction switch_gap(const LqSystem& before, const LqSystem& after,
                       std::function<Mat(double)> Pi_after, const Mat& Psi, const Mat& C);

// Gap for stopping: nothing survives the jump, so H(s) = rhs(C(s)) + dC/dt(s).
GapFunction stopping_gap(const LqSystem& before, std::function<Mat(double)> C,
                         std::function<Mat(double)> dC = {});

struct EventOptions {
    double h = 0.01;         // scan step
    double tol_def = 1e-8;
    double tol_root = 1e-10;
    bool allow_fallback = false;  // indefinite crossings, see find_event_time
};

struct EventSearch {
    std::optional<double> time;
    bool fallback = false;           // time came from an indefinite crossing
    bool identically_zero = false;
    std::vector<double> candidates;  // fallback candidates when more than one
    std::string reason;
};

// Finds t in [t_lo, t_hi] where the gap moves from negative semidefinite (not zero)
// to positive semidefinite (not zero). Throws AmbiguityError on several such crossings.
EventSearch find_event_time(const GapFunction& gap, double t_lo, double t_hi,
                            const EventOptions& opt = {});

Mat feedback_gain(const RiccatiSegment& sol, double t);

// Row-major vec(Pi) per node, header t,p_1_1,...
void write_riccati_csv(const RiccatiSegment& sol, const std::string& path);

}  // namespace hmfg
