#pragma once

#include "hmfg/time_function.hpp"
#include "hmfg/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace hmfg {

// Discrete states of the automaton. Superscript 1/2 is the major's dynamics,
// trailing letters are the minor populations still in the system.
enum class Label : int { q1ab = 0, q2ab, q1a, q1b, q2a, q2b, q1, q2 };
inline constexpr int kNumLabels = 8;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {
    Label::q1ab, Label::q2ab, Label::q1a, Label::q1b, Label::q2a, Label::q2b, Label::q1, Label::q2};

enum class Pop : int { a = 0, b = 1 };
inline constexpr std::array<Pop, 2> kPops = {Pop::a, Pop::b};
inline int idx(Pop p) { return static_cast<int>(p); }
inline Pop other(Pop p) { return p == Pop::a ? Pop::b : Pop::a; }

enum class Event { major_switch, pop_a_stops, pop_b_stops };

struct DiscreteState {
    Label label;
    int stage;
    int major_mode;
    std::array<bool, 2> active;

    bool has(Pop p) const { return active[idx(p)]; }
    int num_active() const { return int(active[0]) + int(active[1]); }
};

DiscreteState state_of(Label l);
std::string label_name(Label l);
Label label_from_name(const std::string& s);
std::string event_name(Event e);
std::string pop_name(Pop p);
Event stop_event(Pop p);

struct PopulationFractions {
    double pi_a = 0.5;
    double pi_b = 0.5;
    std::array<bool, 2> active = {true, true};

    static PopulationFractions both(double pa, double pb) { return {pa, pb, {true, true}}; }
    static PopulationFractions only(Pop p) {
        return p == Pop::a ? PopulationFractions{1.0, 0.0, {true, false}}
                           : PopulationFractions{0.0, 1.0, {false, true}};
    }
    static PopulationFractions none() { return {0.0, 0.0, {false, false}}; }

    double operator[](Pop p) const { return p == Pop::a ? pi_a : pi_b; }
    int count() const { return int(active[0]) + int(active[1]); }
    // Per-mode fractions: the base pair in two-population states, (1,0)/(0,1)/(0,0) otherwise.
    PopulationFractions in_state(Label l) const;
};

// [pi_a F, pi_b F] over the active populations.
template <typename Derived>
MatrixX<typename Derived::Scalar> pi_kron(const PopulationFractions& pi,
                                          const Eigen::MatrixBase<Derived>& F) {
    using S = typename Derived::Scalar;
    const Eigen::Index n = F.rows(), c = F.cols();
    MatrixX<S> out(n, c * pi.count());
    Eigen::Index col = 0;
    for (Pop p : kPops) {
        if (!pi.active[idx(p)]) continue;
        out.middleCols(col, c) = S(pi[p]) * F;
        col += c;
    }
    return out;
}

// Keeps rows l..m and columns l..m (1-based, inclusive), zeros elsewhere.
template <typename Derived>
MatrixX<typename Derived::Scalar> mask_block(const Eigen::MatrixBase<Derived>& P, Eigen::Index l,
                                             Eigen::Index m) {
    const Eigen::Index s = P.rows();
    if (P.cols() != s) throw DimensionError("mask_block: matrix not square");
    if (l < 1 || m < l || m > s)
        throw DimensionError("mask_block: range " + std::to_string(l) + ":" + std::to_string(m) +
                             " outside 1.." + std::to_string(s));
    MatrixX<typename Derived::Scalar> out = MatrixX<typename Derived::Scalar>::Zero(s, s);
    const Eigen::Index w = m - l + 1;
    out.middleRows(l - 1, w) = P.middleRows(l - 1, w);
    out.middleCols(l - 1, w) = P.middleCols(l - 1, w);
    return out;
}

// One agent class in one discrete state. Major specs use H; minor specs use G, H1, H2.
struct ModeSpec {
    TimeMatrix A;
    Mat B, D, G, F, P, R, Pbar, H, H1, H2;

    bool operator==(const ModeSpec&) const = default;
};

struct HybridSpecs {
    std::array<ModeSpec, 2> major;  // dynamics 1 and 2
    std::array<ModeSpec, 2> minor;  // populations a and b
};

struct JumpTransition {
    Label from, to;
    Event event;
    Mat psi_major, cost_major;
    std::array<Mat, 2> psi_minor, cost_minor;  // 0x0 when the population is absent before the jump

    const Mat& psi(int agent) const { return agent < 0 ? psi_major : psi_minor[agent]; }
    const Mat& cost(int agent) const { return agent < 0 ? cost_major : cost_minor[agent]; }
};

// Agent class selector used across modules: -1 major, 0 minor a, 1 minor b.
inline constexpr int kMajor = -1;

class Automaton {
public:
    Automaton(int n, HybridSpecs specs, PopulationFractions pi);

    int n() const { return n_; }
    const HybridSpecs& specs() const { return specs_; }
    const PopulationFractions& pi() const { return pi_; }
    const std::vector<JumpTransition>& edges() const { return edges_; }
    const JumpTransition& edge(Label from, Label to) const;
    std::vector<const JumpTransition*> incoming(Label l) const;
    std::vector<const JumpTransition*> outgoing(Label l) const;

    const ModeSpec& major_spec(Label l) const { return specs_.major[state_of(l).major_mode - 1]; }
    const ModeSpec& minor_spec(Pop p) const { return specs_.minor[idx(p)]; }
    PopulationFractions fractions(Label l) const { return pi_.in_state(l); }

    int major_dim(Label l) const;
    int minor_dim(Label l, Pop p) const;
    int dim(Label l, int agent) const { return agent < 0 ? major_dim(l) : minor_dim(l, Pop(agent)); }
    // Offset of the mean-field block of p inside the major extended state, or -1.
    int major_block(Label l, Pop p) const;

    const Mat& running_weight(Label l, int agent) const { return weights_[int(l)][agent + 1].run; }
    const Mat& terminal_weight(Label l, int agent) const { return weights_[int(l)][agent + 1].term; }
    Mat diffusion(Label l, int agent) const;

private:
    struct Weights {
        Mat run, term;
    };
    int n_;
    HybridSpecs specs_;
    PopulationFractions pi_;
    std::vector<JumpTransition> edges_;
    std::array<std::array<Weights, 3>, kNumLabels> weights_;
};

Automaton build_automaton(int n, const HybridSpecs& specs, const PopulationFractions& pi);

struct DiffusionCheck {
    Label from, to;
    double residual_major = 0.0;
    std::array<double, 2> residual_minor = {0.0, 0.0};
    double residual() const;
    bool pass() const { return residual() == 0.0; }
};

std::vector<DiffusionCheck> check_diffusion_compat(const Automaton& aut);

}  // namespace hmfg
