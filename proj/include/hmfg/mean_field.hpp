#pragma once

#include "hmfg/hybrid_model.hpp"
#include "hmfg/riccati.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hmfg {

// Uniform time grid t_k = k*dt, k = 0..K, K*dt = T.
struct Grid {
    double T = 0.0, dt = 0.0;
    int K = 0;

    Grid() = default;
    Grid(double T, double dt);
    double t(int k) const { return k == K ? T : k * dt; }
    int node(double t) const;  // nearest node
};

// Stacked (Abar, Gbar) of a discrete state at time t: Abar is w x w, Gbar is w x n,
// w = n * (number of active populations).
using LawFn = std::function<void(double, Mat&, Mat&)>;

struct ExtendedSystem {
    LqSystem lq;
    Vec M;     // drift offset, zero at the consistency fixed point
    Mat D;     // extended diffusion
    Mat Pbar;  // terminal-projection weight
};

// e_k: selects the block of population p from the mean field of state l.
Mat selector(const Automaton& aut, Label l, Pop p);

ExtendedSystem build_major_extended(const Automaton& aut, Label l, LawFn law);
ExtendedSystem build_minor_extended(const Automaton& aut, Label l, Pop p, const ExtendedSystem& major,
                                    std::function<Mat(double)> Pi0);

// Mean-field law of one discrete state over node range [k0, k1], sampled on the half-step
// grid: sample j sits at t(k0) + j*dt/2, j = 0..2*(k1-k0).
struct SegmentLaw {
    Label label = Label::q1ab;
    double t0 = 0.0, half = 0.0;
    int n = 0;
    std::array<std::vector<Mat>, 2> Abar, Gbar;  // per population, empty when inactive
    std::array<Vec, 2> mbar;                     // always zero

    int samples() const;
    void stacked(double t, Mat& A, Mat& G) const;
    LawFn fn() const;
};

// (Abar_p, Gbar_p) implied by the minor Riccati value Pi_p at time t.
std::pair<Mat, Mat> law_from_minor(const Automaton& aut, Label l, Pop p, double t, const Mat& Pi_p);

struct ConsistencyOptions {
    double theta = 0.5;
    double tol = 1e-9;
    int max_iter = 200;
};

struct SegmentSolution {
    Label label = Label::q1ab;
    int k0 = 0, k1 = 0;
    RiccatiSegment major;
    std::array<std::optional<RiccatiSegment>, 2> minor;
    SegmentLaw law;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;

    ExtendedSystem major_system(const Automaton& aut) const;
    ExtendedSystem minor_system(const Automaton& aut, Pop p) const;
};

// Fixed point on one discrete state with given terminal values at node k1.
// init overrides the decoupled starting law when given.
SegmentSolution solve_segment(const Automaton& aut, const Grid& grid, Label l, int k0, int k1,
                              const Mat& Pi0_end, const std::array<Mat, 2>& Pik_end,
                              const ConsistencyOptions& opt = {}, const SegmentLaw* init = nullptr);

// Candidate discrete path with event nodes (events[j] separates states[j] and states[j+1]).
struct PathHypothesis {
    std::vector<Label> states;
    std::vector<int> events;
};

struct PathSolution {
    PathHypothesis path;
    std::vector<SegmentSolution> segments;  // in forward order
    double residual = 0.0;
    int iterations = 0;  // summed over segments

    const SegmentSolution& segment_at(int k) const;
};

// Terminal values for the segment ending at the last node of `after`'s start, given the jump.
struct TerminalValues {
    Mat major;
    std::array<Mat, 2> minor;
};
TerminalValues final_terminal(const Automaton& aut, Label last);
TerminalValues jump_terminal(const Automaton& aut, const JumpTransition& e, const SegmentSolution& after);

PathSolution solve_consistency(const Automaton& aut, const Grid& grid, const PathHypothesis& path,
                               const ConsistencyOptions& opt = {});

void write_meanfield_csv(const SegmentLaw& law, const Grid& grid, int k0, int k1, const std::string& path);

}  // namespace hmfg
