#include "hmfg/hybrid_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hmfg {

DiscreteState state_of(Label l) {
    switch (l) {
        case Label::q1ab: return {l, 0, 1, {true, true}};
        case Label::q2ab: return {l, 1, 2, {true, true}};
        case Label::q1a: return {l, 1, 1, {true, false}};
        case Label::q1b: return {l, 1, 1, {false, true}};
        case Label::q2a: return {l, 2, 2, {true, false}};
        case Label::q2b: return {l, 2, 2, {false, true}};
        case Label::q1: return {l, 2, 1, {false, false}};
        case Label::q2: return {l, 3, 2, {false, false}};
    }
    throw ConfigError("unknown discrete state");
}

std::string label_name(Label l) {
    static const char* names[] = {"q1ab", "q2ab", "q1a", "q1b", "q2a", "q2b", "q1", "q2"};
    return names[int(l)];
}

Label label_from_name(const std::string& s) {
    for (Label l : kAllLabels)
        if (label_name(l) == s) return l;
    throw ConfigError("unknown discrete state label '" + s + "'");
}

std::string event_name(Event e) {
    switch (e) {
        case Event::major_switch: return "major_switch";
        case Event::pop_a_stops: return "pop_a_stops";
        case Event::pop_b_stops: return "pop_b_stops";
    }
    return "?";
}

std::string pop_name(Pop p) { return p == Pop::a ? "a" : "b"; }

Event stop_event(Pop p) { return p == Pop::a ? Event::pop_a_stops : Event::pop_b_stops; }

PopulationFractions PopulationFractions::in_state(Label l) const {
    const auto s = state_of(l);
    if (s.has(Pop::a) && s.has(Pop::b)) return both(pi_a, pi_b);
    if (s.has(Pop::a)) return only(Pop::a);
    if (s.has(Pop::b)) return only(Pop::b);
    return none();
}

double DiffusionCheck::residual() const {
    return std::max({residual_major, residual_minor[0], residual_minor[1]});
}

namespace {

bool is_symmetric(const Mat& M) {
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + M.cwiseAbs().maxCoeff());
}

double min_eig(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

void fill_zero(Mat& M, int rows, int cols) {
    if (M.size() == 0) M = Mat::Zero(rows, cols);
}

void validate(ModeSpec& s, int n, bool major, const std::string& who) {
    auto dims = [&](const Mat& M, Eigen::Index r, Eigen::Index c, const char* name) {
        if (M.rows() != r || M.cols() != c)
            throw DimensionError(who + "." + name + ": expected " + std::to_string(r) + "x" +
                                 std::to_string(c) + ", got " + std::to_string(M.rows()) + "x" +
                                 std::to_string(M.cols()));
    };
    if (s.A.rows() != n || s.A.cols() != n) throw DimensionError(who + ".A: expected n x n");
    if (s.B.rows() != n || s.B.cols() < 1) throw DimensionError(who + ".B: expected n rows");
    if (s.D.rows() != n || s.D.cols() < 1) throw DimensionError(who + ".D: expected n rows");
    const int m = int(s.B.cols());
    fill_zero(s.F, n, n);
    fill_zero(s.G, n, n);
    fill_zero(s.H, n, n);
    fill_zero(s.H1, n, n);
    fill_zero(s.H2, n, n);
    fill_zero(s.Pbar, n, n);
    dims(s.F, n, n, "F");
    dims(s.P, n, n, "P");
    dims(s.Pbar, n, n, "Pbar");
    dims(s.R, m, m, "R");
    if (major) {
        dims(s.H, n, n, "H");
    } else {
        dims(s.G, n, n, "G");
        dims(s.H1, n, n, "H1");
        dims(s.H2, n, n, "H2");
    }
    for (auto [M, name] : {std::pair{&s.P, "P"}, {&s.Pbar, "Pbar"}, {&s.R, "R"}})
        if (!is_symmetric(*M)) throw ConfigError(who + "." + name + " is not symmetric");
    if (min_eig(s.P) < -1e-10) throw ConfigError(who + ".P is not positive semidefinite");
    if (min_eig(s.Pbar) < -1e-10) throw ConfigError(who + ".Pbar is not positive semidefinite");
    if (min_eig(s.R) <= 0.0) throw ConfigError(who + ".R is not positive definite");
}

Mat selection(int n, const std::vector<int>& keep_blocks, int from_blocks) {
    Mat S = Mat::Zero(n * int(keep_blocks.size()), n * from_blocks);
    for (std::size_t i = 0; i < keep_blocks.size(); ++i)
        S.block(n * int(i), n * keep_blocks[i], n, n).setIdentity();
    return S;
}

}  // namespace

Automaton::Automaton(int n, HybridSpecs specs, PopulationFractions pi)
    : n_(n), specs_(std::move(specs)), pi_(pi) {
    if (n < 1) throw DimensionError("state dimension must be >= 1");
    if (pi.pi_a < 0 || pi.pi_b < 0 || std::abs(pi.pi_a + pi.pi_b - 1.0) > 1e-12 || pi.count() != 2)
        throw ConfigError("population fractions must be nonnegative and sum to 1");
    validate(specs_.major[0], n, true, "major[1]");
    validate(specs_.major[1], n, true, "major[2]");
    validate(specs_.minor[0], n, false, "minor[a]");
    validate(specs_.minor[1], n, false, "minor[b]");
    if (specs_.major[0].B.cols() != specs_.major[1].B.cols())
        throw DimensionError("major input width differs between dynamics 1 and 2");
    if (specs_.major[0].D.cols() != specs_.major[1].D.cols())
        throw DimensionError("major noise width differs between dynamics 1 and 2");

    for (Label l : kAllLabels) {
        const auto pl = fractions(l);
        const ModeSpec& M = major_spec(l);
        Mat L(n, major_dim(l));
        L << Mat::Identity(n, n), -pi_kron(pl, M.H);
        weights_[int(l)][0] = {L.transpose() * M.P * L, L.transpose() * M.Pbar * L};
        for (Pop p : kPops) {
            auto& w = weights_[int(l)][idx(p) + 1];
            if (!state_of(l).has(p)) {
                w = {Mat(0, 0), Mat(0, 0)};
                continue;
            }
            const ModeSpec& K = minor_spec(p);
            Mat Lk(n, minor_dim(l, p));
            Lk << Mat::Identity(n, n), -K.H1, -pi_kron(pl, K.H2);
            w = {Lk.transpose() * K.P * Lk, Lk.transpose() * K.Pbar * Lk};
        }
    }

    auto add = [&](Label from, Label to, Event ev) {
        JumpTransition e{from, to, ev, {}, {}, {}, {}};
        const auto sf = state_of(from);
        const int df = major_dim(from);
        if (ev == Event::major_switch) {
            e.psi_major = Mat::Identity(df, df);
            e.cost_major = Mat::Zero(df, df);
            for (Pop p : kPops) {
                const int d = minor_dim(from, p);
                e.psi_minor[idx(p)] = Mat::Identity(d, d);
                e.cost_minor[idx(p)] = Mat::Zero(d, d);
            }
        } else {
            const Pop gone = ev == Event::pop_a_stops ? Pop::a : Pop::b;
            // blocks of the major extended state kept after the jump (block 0 is x0)
            std::vector<int> keep = {0};
            int b = 1, dropped = -1;
            for (Pop p : kPops) {
                if (!sf.has(p)) continue;
                if (p == gone) dropped = b; else keep.push_back(b);
                ++b;
            }
            e.psi_major = selection(n, keep, sf.num_active() + 1);
            e.cost_major = mask_block(terminal_weight(from, kMajor), dropped * n + 1, (dropped + 1) * n);
            for (Pop p : kPops) {
                if (!sf.has(p)) continue;
                const int d = minor_dim(from, p);
                if (p == gone) {
                    e.psi_minor[idx(p)] = Mat::Zero(0, d);
                    e.cost_minor[idx(p)] = terminal_weight(from, idx(p));
                } else {
                    std::vector<int> kk = {0};
                    for (int k : keep) kk.push_back(k + 1);
                    e.psi_minor[idx(p)] = selection(n, kk, d / n);
                    e.cost_minor[idx(p)] = mask_block(terminal_weight(from, idx(p)),
                                                      (dropped + 1) * n + 1, (dropped + 2) * n);
                }
            }
        }
        edges_.push_back(std::move(e));
    };
    using L = Label;
    add(L::q1ab, L::q2ab, Event::major_switch);
    add(L::q1ab, L::q1a, Event::pop_b_stops);
    add(L::q1ab, L::q1b, Event::pop_a_stops);
    add(L::q2ab, L::q2a, Event::pop_b_stops);
    add(L::q2ab, L::q2b, Event::pop_a_stops);
    add(L::q1a, L::q2a, Event::major_switch);
    add(L::q1a, L::q1, Event::pop_a_stops);
    add(L::q1b, L::q2b, Event::major_switch);
    add(L::q1b, L::q1, Event::pop_b_stops);
    add(L::q2a, L::q2, Event::pop_a_stops);
    add(L::q2b, L::q2, Event::pop_b_stops);
    add(L::q1, L::q2, Event::major_switch);
}

const JumpTransition& Automaton::edge(Label from, Label to) const {
    for (const auto& e : edges_)
        if (e.from == from && e.to == to) return e;
    throw ConfigError("no transition " + label_name(from) + " -> " + label_name(to));
}

std::vector<const JumpTransition*> Automaton::incoming(Label l) const {
    std::vector<const JumpTransition*> out;
    for (const auto& e : edges_)
        if (e.to == l) out.push_back(&e);
    return out;
}

std::vector<const JumpTransition*> Automaton::outgoing(Label l) const {
    std::vector<const JumpTransition*> out;
    for (const auto& e : edges_)
        if (e.from == l) out.push_back(&e);
    return out;
}

int Automaton::major_dim(Label l) const { return n_ * (1 + state_of(l).num_active()); }

int Automaton::minor_dim(Label l, Pop p) const {
    return state_of(l).has(p) ? n_ + major_dim(l) : 0;
}

int Automaton::major_block(Label l, Pop p) const {
    const auto s = state_of(l);
    if (!s.has(p)) return -1;
    return p == Pop::a || !s.has(Pop::a) ? n_ : 2 * n_;
}

Mat Automaton::diffusion(Label l, int agent) const {
    const Mat& D0 = major_spec(l).D;
    const int d0 = major_dim(l);
    Mat DD0 = Mat::Zero(d0, D0.cols());
    DD0.topRows(n_) = D0;
    if (agent < 0) return DD0;
    const Mat& Dk = minor_spec(Pop(agent)).D;
    const int d = minor_dim(l, Pop(agent));
    Mat out = Mat::Zero(d, Dk.cols() + D0.cols());
    if (d > 0) {
        out.topLeftCorner(n_, Dk.cols()) = Dk;
        out.bottomRightCorner(d0, D0.cols()) = DD0;
    }
    return out;
}

Automaton build_automaton(int n, const HybridSpecs& specs, const PopulationFractions& pi) {
    return Automaton(n, specs, pi);
}

std::vector<DiffusionCheck> check_diffusion_compat(const Automaton& aut) {
    std::vector<DiffusionCheck> out;
    for (const auto& e : aut.edges()) {
        DiffusionCheck c{e.from, e.to};
        c.residual_major =
            (aut.diffusion(e.to, kMajor) - e.psi_major * aut.diffusion(e.from, kMajor)).norm();
        for (Pop p : kPops) {
            if (!state_of(e.from).has(p)) continue;
            const Mat before = aut.diffusion(e.from, idx(p));
            const Mat after = aut.diffusion(e.to, idx(p));
            const Mat mapped = e.psi_minor[idx(p)] * before;
            c.residual_minor[idx(p)] =
                mapped.rows() == after.rows() && mapped.cols() == after.cols()
                    ? (after - mapped).norm()
                    : std::numeric_limits<double>::infinity();
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace hmfg
