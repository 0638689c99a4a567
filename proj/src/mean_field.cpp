#include "hmfg/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace hmfg {

Grid::Grid(double T_, double dt_) : T(T_), dt(dt_) {
    if (!(T > 0) || !(dt > 0)) throw ConfigError("horizon and step must be positive");
    K = int(std::lround(T / dt));
    if (K < 1 || std::abs(K * dt - T) > 1e-9 * T) throw ConfigError("dt must divide T");
}

int Grid::node(double t) const { return std::clamp(int(std::lround(t / dt)), 0, K); }

Mat selector(const Automaton& aut, Label l, Pop p) {
    const int n = aut.n();
    const auto s = state_of(l);
    if (!s.has(p)) throw DimensionError("selector: population " + pop_name(p) + " absent in " + label_name(l));
    Mat e = Mat::Zero(n, n * s.num_active());
    e.middleCols(aut.major_block(l, p) - n, n).setIdentity();
    return e;
}

ExtendedSystem build_major_extended(const Automaton& aut, Label l, LawFn law) {
    const int n = aut.n(), d = aut.major_dim(l), w = d - n;
    const ModeSpec& M = aut.major_spec(l);
    const Mat PK = pi_kron(aut.fractions(l), M.F);
    auto Abuf = std::make_shared<Mat>(w, w);
    auto Gbuf = std::make_shared<Mat>(w, n);
    TimeMatrix A0 = M.A;
    auto A = [=](double t, Mat& out) {
        out.resize(d, d);
        A0.eval_into(t, out.topLeftCorner(n, n));
        if (w == 0) return;
        out.topRightCorner(n, w) = PK;
        if (!law) throw DimensionError("major extended system in " + label_name(l) + " needs a mean-field law");
        law(t, *Abuf, *Gbuf);
        if (Abuf->rows() != w || Abuf->cols() != w || Gbuf->rows() != w || Gbuf->cols() != n)
            throw DimensionError("mean-field law width does not match " + label_name(l));
        out.bottomLeftCorner(w, n) = *Gbuf;
        out.bottomRightCorner(w, w) = *Abuf;
    };
    Mat B = Mat::Zero(d, M.B.cols());
    B.topRows(n) = M.B;
    return {LqSystem(A, B, aut.running_weight(l, kMajor), M.R), Vec::Zero(d), aut.diffusion(l, kMajor),
            aut.terminal_weight(l, kMajor)};
}

ExtendedSystem build_minor_extended(const Automaton& aut, Label l, Pop p, const ExtendedSystem& major,
                                    std::function<Mat(double)> Pi0) {
    const int n = aut.n(), d0 = aut.major_dim(l), d = aut.minor_dim(l, p), w = d0 - n;
    if (d == 0) throw DimensionError("population " + pop_name(p) + " absent in " + label_name(l));
    if (major.lq.dim() != d0) throw DimensionError("minor extended system: major dimension mismatch");
    if (!Pi0) throw DimensionError("minor extended system needs the major Riccati solution");
    const ModeSpec& K = aut.minor_spec(p);
    const Mat PK = pi_kron(aut.fractions(l), K.F);
    const Mat G = K.G;
    TimeMatrix Ak = K.A;
    LqSystem maj = major.lq;
    auto A0 = std::make_shared<Mat>(d0, d0);
    auto A = [=](double t, Mat& out) {
        out.setZero(d, d);
        Ak.eval_into(t, out.topLeftCorner(n, n));
        out.block(0, n, n, n) = G;
        if (w > 0) out.block(0, 2 * n, n, w) = PK;
        maj.A(t, *A0);
        out.bottomRightCorner(d0, d0) = *A0;
        out.bottomRightCorner(d0, d0).noalias() -= maj.S * Pi0(t);
    };
    Mat B = Mat::Zero(d, K.B.cols());
    B.topRows(n) = K.B;
    return {LqSystem(A, B, aut.running_weight(l, idx(p)), K.R), Vec::Zero(d), aut.diffusion(l, idx(p)),
            aut.terminal_weight(l, idx(p))};
}

int SegmentLaw::samples() const {
    for (const auto& v : Abar)
        if (!v.empty()) return int(v.size());
    return 0;
}

void SegmentLaw::stacked(double t, Mat& A, Mat& G) const {
    int active = 0;
    for (const auto& v : Abar) active += !v.empty();
    const int w = n * active;
    A.resize(w, w);
    G.resize(w, n);
    if (w == 0) return;
    const int S = samples();
    double x = half > 0 ? (t - t0) / half : 0.0;
    int j = std::clamp(int(std::floor(x + 1e-9)), 0, S - 1);
    double s = std::clamp(x - j, 0.0, 1.0);
    if (j == S - 1 || s < 1e-9) s = 0.0;
    int row = 0;
    for (int p = 0; p < 2; ++p) {
        if (Abar[p].empty()) continue;
        if (s == 0.0) {
            A.middleRows(row, n) = Abar[p][j];
            G.middleRows(row, n) = Gbar[p][j];
        } else {
            A.middleRows(row, n) = (1 - s) * Abar[p][j] + s * Abar[p][j + 1];
            G.middleRows(row, n) = (1 - s) * Gbar[p][j] + s * Gbar[p][j + 1];
        }
        row += n;
    }
}

LawFn SegmentLaw::fn() const {
    auto self = std::make_shared<SegmentLaw>(*this);
    return [self](double t, Mat& A, Mat& G) { self->stacked(t, A, G); };
}

std::pair<Mat, Mat> law_from_minor(const Automaton& aut, Label l, Pop p, double t, const Mat& Pi) {
    const int n = aut.n(), w = aut.major_dim(l) - n;
    require_dims(Pi, 2 * n + w, 2 * n + w, "law_from_minor: Pi");
    const ModeSpec& K = aut.minor_spec(p);
    const Mat SK = K.B * K.R.llt().solve(K.B.transpose());
    Mat Abar = (K.A(t) - SK * Pi.topLeftCorner(n, n)) * selector(aut, l, p);
    Abar += pi_kron(aut.fractions(l), K.F);
    Abar.noalias() -= SK * Pi.block(0, 2 * n, n, w);
    Mat Gbar = K.G - SK * Pi.block(0, n, n, n);
    return {Abar, Gbar};
}

ExtendedSystem SegmentSolution::major_system(const Automaton& aut) const {
    return build_major_extended(aut, label, law.fn());
}

ExtendedSystem SegmentSolution::minor_system(const Automaton& aut, Pop p) const {
    auto seg = std::make_shared<RiccatiSegment>(major);
    return build_minor_extended(aut, label, p, major_system(aut), [seg](double t) { return seg->at(t); });
}

namespace {

double law_distance(const SegmentLaw& a, const SegmentLaw& b, int j) {
    double r = 0.0;
    for (int p = 0; p < 2; ++p) {
        if (a.Abar[p].empty()) continue;
        r = std::max(r, (a.Abar[p][j] - b.Abar[p][j]).norm() + (a.Gbar[p][j] - b.Gbar[p][j]).norm());
    }
    return r;
}

}  // namespace

SegmentSolution solve_segment(const Automaton& aut, const Grid& grid, Label l, int k0, int k1,
                              const Mat& Pi0_end, const std::array<Mat, 2>& Pik_end,
                              const ConsistencyOptions& opt, const SegmentLaw* init) {
    if (k0 < 0 || k1 > grid.K || k0 > k1) throw Error("solve_segment: bad node range");
    const int n = aut.n();
    const auto st = state_of(l);
    const double ta = grid.t(k0), tb = grid.t(k1);
    const int S = 2 * (k1 - k0) + 1;
    auto sample_t = [&](int j) { return j == S - 1 ? tb : ta + j * 0.5 * grid.dt; };

    SegmentSolution sol;
    sol.label = l;
    sol.k0 = k0;
    sol.k1 = k1;

    SegmentLaw law;
    law.label = l;
    law.t0 = ta;
    law.half = 0.5 * grid.dt;
    law.n = n;
    for (Pop p : kPops) {
        if (!st.has(p)) continue;
        law.mbar[idx(p)] = Vec::Zero(n);
        if (init) {
            law.Abar[idx(p)] = init->Abar[idx(p)];
            law.Gbar[idx(p)] = init->Gbar[idx(p)];
            continue;
        }
        // decoupled start: each minor solves its own LQR, ignoring major and mean field
        const ModeSpec& K = aut.minor_spec(p);
        TimeMatrix Ak = K.A;
        LqSystem solo([Ak](double t, Mat& out) { out = Ak(t); }, K.B, K.P, K.R);
        IntegrateOptions io;
        io.label = "decoupled minor " + pop_name(p) + " in " + label_name(l);
        auto seg = integrate_riccati(solo, tb, Pik_end[idx(p)].topLeftCorner(n, n), ta, grid.dt, io);
        const Mat e = selector(aut, l, p), PK = pi_kron(aut.fractions(l), K.F);
        for (int j = 0; j < S; ++j) {
            const double t = sample_t(j);
            law.Abar[idx(p)].push_back((K.A(t) - solo.S * seg.at(t)) * e + PK);
            law.Gbar[idx(p)].push_back(K.G);
        }
    }

    for (int it = 1; it <= opt.max_iter; ++it) {
        ExtendedSystem maj = build_major_extended(aut, l, law.fn());
        IntegrateOptions io;
        io.label = "major in " + label_name(l);
        RiccatiSegment major = integrate_riccati(maj.lq, tb, Pi0_end, ta, grid.dt, io);
        std::array<std::optional<RiccatiSegment>, 2> minors;
        SegmentLaw next = law;
        for (Pop p : kPops) {
            if (!st.has(p)) continue;
            ExtendedSystem mk = build_minor_extended(aut, l, p, maj, [&major](double t) { return major.at(t); });
            io.label = "minor " + pop_name(p) + " in " + label_name(l);
            minors[idx(p)] = integrate_riccati(mk.lq, tb, Pik_end[idx(p)], ta, grid.dt, io);
            for (int j = 0; j < S; ++j) {
                const double t = sample_t(j);
                auto [A, G] = law_from_minor(aut, l, p, t, minors[idx(p)]->at(t));
                next.Abar[idx(p)][j] = std::move(A);
                next.Gbar[idx(p)][j] = std::move(G);
            }
        }
        double res = 0.0;
        if (st.num_active() > 0) res = law_distance(law, next, S / 2);
        if (res < opt.tol) {
            for (int j = 0; j < S; ++j) res = std::max(res, law_distance(law, next, j));
        }
        sol.history.push_back(res);
        if (res < opt.tol) {
            sol.major = std::move(major);
            sol.minor = std::move(minors);
            sol.law = std::move(law);
            sol.iterations = it;
            sol.residual = res;
            return sol;
        }
        for (int p = 0; p < 2; ++p)
            for (int j = 0; j < int(law.Abar[p].size()); ++j) {
                law.Abar[p][j] = (1 - opt.theta) * law.Abar[p][j] + opt.theta * next.Abar[p][j];
                law.Gbar[p][j] = (1 - opt.theta) * law.Gbar[p][j] + opt.theta * next.Gbar[p][j];
            }
    }
    throw ConvergenceError("mean-field consistency did not converge in " + label_name(l) + " after " +
                               std::to_string(opt.max_iter) + " iterations (residual " +
                               std::to_string(sol.history.back()) + ")",
                           sol.history);
}

const SegmentSolution& PathSolution::segment_at(int k) const {
    for (const auto& s : segments)
        if (k >= s.k0 && k < s.k1) return s;
    return segments.back();
}

TerminalValues final_terminal(const Automaton& aut, Label last) {
    TerminalValues tv;
    tv.major = aut.terminal_weight(last, kMajor);
    for (Pop p : kPops)
        if (state_of(last).has(p)) tv.minor[idx(p)] = aut.terminal_weight(last, idx(p));
    return tv;
}

TerminalValues jump_terminal(const Automaton& aut, const JumpTransition& e, const SegmentSolution& after) {
    TerminalValues tv;
    tv.major = apply_jump_condition(after.major.node(0), e, kMajor);
    for (Pop p : kPops) {
        if (!state_of(e.from).has(p)) continue;
        if (!state_of(e.to).has(p)) {
            tv.minor[idx(p)] = e.cost_minor[idx(p)];
        } else {
            tv.minor[idx(p)] = apply_jump_condition(after.minor[idx(p)]->node(0), e, idx(p));
        }
    }
    (void)aut;
    return tv;
}

PathSolution solve_consistency(const Automaton& aut, const Grid& grid, const PathHypothesis& path,
                               const ConsistencyOptions& opt) {
    const auto& S = path.states;
    if (S.empty() || path.events.size() + 1 != S.size())
        throw Error("path hypothesis needs one event node per transition");
    for (std::size_t j = 0; j + 1 < S.size(); ++j) {
        aut.edge(S[j], S[j + 1]);
        const int lo = j == 0 ? 0 : path.events[j - 1];
        if (path.events[j] <= lo || path.events[j] >= grid.K)
            throw Error("event nodes must be strictly increasing inside (0, K)");
    }
    PathSolution out;
    out.path = path;
    out.segments.resize(S.size());
    for (int j = int(S.size()) - 1; j >= 0; --j) {
        const int k0 = j == 0 ? 0 : path.events[j - 1];
        const int k1 = j + 1 == int(S.size()) ? grid.K : path.events[j];
        TerminalValues tv = j + 1 == int(S.size())
                                ? final_terminal(aut, S[j])
                                : jump_terminal(aut, aut.edge(S[j], S[j + 1]), out.segments[j + 1]);
        out.segments[j] = solve_segment(aut, grid, S[j], k0, k1, tv.major, tv.minor, opt);
        out.residual = std::max(out.residual, out.segments[j].residual);
        out.iterations += out.segments[j].iterations;
    }
    return out;
}

void write_meanfield_csv(const SegmentLaw& law, const Grid& grid, int k0, int k1, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    Mat A, G;
    law.stacked(grid.t(k0), A, G);
    f << "t";
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) f << ",abar_" << i + 1 << '_' << j + 1;
    for (int i = 0; i < G.rows(); ++i)
        for (int j = 0; j < G.cols(); ++j) f << ",gbar_" << i + 1 << '_' << j + 1;
    f << '\n';
    char buf[32];
    for (int k = k0; k <= k1; ++k) {
        law.stacked(grid.t(k), A, G);
        std::snprintf(buf, sizeof buf, "%.10g", grid.t(k));
        f << buf;
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", A(i, j));
                f << ',' << buf;
            }
        for (int i = 0; i < G.rows(); ++i)
            for (int j = 0; j < G.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", G(i, j));
                f << ',' << buf;
            }
        f << '\n';
    }
}

}  // namespace hmfg
