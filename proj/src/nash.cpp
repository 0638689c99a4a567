#include "hmfg/nash.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace hmfg {

namespace {

struct Layout {
    int n;
    Mat E(int block) const {
        Mat e = Mat::Zero(n, 6 * n);
        e.middleCols(block * n, n).setIdentity();
        return e;
    }
    Mat xi() const { return E(0); }
    Mat x0() const { return E(1); }
    Mat s(int p) const { return E(2 + p); }
    Mat xbar(int p) const { return E(4 + p); }
};

struct ProbeMaps {
    std::array<Mat, 2> mean;  // empirical average of each type seen in costs
    Mat xN;                   // average over all agents present
    Mat ext;                  // probe extended state [x_i; x0; means of present types]
    Mat xbar_act;             // stacked xbar of present types
};

ProbeMaps probe_maps(const Automaton& aut, Label l, const Layout& L, int q, std::array<int, 2> Np, bool exact) {
    const int n = L.n;
    const auto st = state_of(l);
    ProbeMaps m;
    for (int p = 0; p < 2; ++p) {
        if (exact) m.mean[p] = L.xbar(p);
        else if (p == q) m.mean[p] = (L.xi() + double(Np[p] - 1) * L.s(p)) / double(Np[p]);
        else m.mean[p] = L.s(p);
    }
    m.xN = Mat::Zero(n, 6 * n);
    if (exact) {
        const auto pl = aut.fractions(l);
        for (Pop p : kPops)
            if (st.has(p)) m.xN += pl[p] * L.xbar(idx(p));
    } else {
        int cnt = 0;
        for (Pop p : kPops)
            if (st.has(p)) m.xN += double(Np[idx(p)]) * m.mean[idx(p)], cnt += Np[idx(p)];
        if (cnt > 0) m.xN /= cnt;
    }
    const int w = n * st.num_active();
    m.ext = Mat::Zero(2 * n + w, 6 * n);
    m.xbar_act = Mat::Zero(w, 6 * n);
    m.ext.topRows(n) = L.xi();
    m.ext.middleRows(n, n) = L.x0();
    int r = 0;
    for (Pop p : kPops) {
        if (!st.has(p)) continue;
        m.ext.middleRows(2 * n + r, n) = m.mean[idx(p)];
        m.xbar_act.middleRows(r, n) = L.xbar(idx(p));
        r += n;
    }
    return m;
}

}  // namespace

Vec ProbeModel::state(const StepView& v, int agent) const {
    const int q = idx(probe), o = 1 - q;
    const Mat& Xq = (*v.X)[q];
    const Mat& Xo = (*v.X)[o];
    Vec z(6 * n);
    const Vec xi = Xq.col(agent);
    const Vec sq = Xq.cols() > 1 ? Vec((Xq.rowwise().sum() - xi) / double(Xq.cols() - 1)) : Vec::Zero(n);
    z.segment(0, n) = xi;
    z.segment(n, n) = *v.x0;
    z.segment((2 + q) * n, n) = sq;
    z.segment((2 + o) * n, n) = Xo.rowwise().mean();
    z.segment(4 * n, 2 * n) = *v.xbar;
    return z;
}

const RiccatiSegment& ProbeModel::segment_at(int k) const {
    for (std::size_t j = 0; j + 1 < segments.size(); ++j)
        if (k < k0[j + 1]) return segments[j];
    return segments.back();
}

Mat ProbeModel::gain(int k) const {
    for (std::size_t j = 0; j < segments.size(); ++j)
        if (j + 1 == segments.size() || k < k0[j + 1]) return segments[j].gain_node(k - k0[j]);
    throw Error("probe gain: node outside the model");
}

ProbeModel build_probe_model(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule, int Na,
                             int Nb, Pop probe, bool exact_mean) {
    if (!schedule.solution) throw Error("probe model: schedule carries no solution");
    auto sol = schedule.solution;
    const int n = aut.n(), q = idx(probe);
    const std::array<int, 2> Np = {Na, Nb};
    SimConfig dummy;
    dummy.Na = Na;
    dummy.Nb = Nb;
    const Automaton costs(n, aut.specs(), dummy.fractions());
    const Layout L{n};
    const auto& S = sol->path.states;

    ProbeModel pm;
    pm.probe = probe;
    pm.Na = Na;
    pm.Nb = Nb;
    pm.exact_mean = exact_mean;
    pm.n = n;
    pm.R = aut.minor_spec(probe).R;
    pm.k_end = grid.K;
    int last = int(S.size()) - 1;
    for (int j = 0; j + 1 < int(S.size()); ++j)
        if (aut.edge(S[j], S[j + 1]).event == stop_event(probe)) {
            pm.k_end = sol->path.events[j];
            last = j;
            break;
        }

    Mat Pi_end;
    {
        const ProbeMaps m = probe_maps(aut, S[last], L, q, Np, exact_mean);
        const Mat C = last + 1 < int(S.size()) ? costs.edge(S[last], S[last + 1]).cost_minor[q]
                                               : costs.terminal_weight(S[last], q);
        Pi_end = m.ext.transpose() * C * m.ext;
    }
    pm.segments.resize(last + 1);
    pm.k0.resize(last + 1);
    const ModeSpec& Kq = aut.minor_spec(probe);
    for (int j = last; j >= 0; --j) {
        const SegmentSolution* seg = &sol->segments[j];
        const Label l = seg->label;
        const auto st = state_of(l);
        const ProbeMaps m = probe_maps(aut, l, L, q, Np, exact_mean);
        const ModeSpec& M0 = aut.major_spec(l);
        const int d0 = aut.major_dim(l);
        Mat R0(d0, 6 * n);
        R0 << L.x0(), m.xbar_act;
        auto A = [=, &aut](double t, Mat& out) {
            out.setZero(6 * n, 6 * n);
            const Mat K0 = seg->major.gain(t);
            out.middleRows(n, n) = M0.A(t) * L.x0() + M0.B * (K0 * R0);
            if (st.num_active() > 0) out.middleRows(n, n) += M0.F * m.xN;
            out.middleRows(0, n) = Kq.A(t) * L.xi() + Kq.G * L.x0() + Kq.F * m.xN;
            for (Pop p : kPops) {
                if (!st.has(p)) continue;
                const ModeSpec& Mp = aut.minor_spec(p);
                const Mat Kp = seg->minor[idx(p)]->gain(t);
                out.middleRows((2 + idx(p)) * n, n) = Mp.A(t) * L.s(idx(p)) +
                                                      Mp.B * (Kp.leftCols(n) * L.s(idx(p)) + Kp.rightCols(d0) * R0) +
                                                      Mp.G * L.x0() + Mp.F * m.xN;
            }
            Mat Ab, Gb;
            seg->law.stacked(t, Ab, Gb);
            if (Ab.rows() > 0) {
                const Mat dxb = Ab * m.xbar_act + Gb * L.x0();
                int r = 0;
                for (Pop p : kPops)
                    if (st.has(p)) out.middleRows((4 + idx(p)) * n, n) = dxb.middleRows(r, n), r += n;
            }
        };
        Mat B = Mat::Zero(6 * n, Kq.B.cols());
        B.topRows(n) = Kq.B;
        const Mat Q = m.ext.transpose() * costs.running_weight(l, q) * m.ext;
        LqSystem sys(A, B, Q, Kq.R);
        const int k1 = std::min(seg->k1, pm.k_end);
        IntegrateOptions io;
        io.label = "probe in " + label_name(l);
        pm.segments[j] = integrate_riccati(sys, grid.t(k1), Pi_end, grid.t(seg->k0), grid.dt, io);
        pm.k0[j] = seg->k0;
        if (j > 0) {
            const Label from = S[j - 1];
            const ProbeMaps mf = probe_maps(aut, from, L, q, Np, exact_mean);
            Pi_end = pm.segments[j].node(0) + mf.ext.transpose() * costs.edge(from, l).cost_minor[q] * mf.ext;
        }
    }
    return pm;
}

NashRow nash_gap(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule, const SimConfig& cfg,
                 bool exact_mean) {
    const ProbeModel pm = build_probe_model(aut, grid, schedule, cfg.Na, cfg.Nb, cfg.probe_type, exact_mean);
    SimConfig c = cfg;
    c.exact_mean = exact_mean;
    c.record_first = false;
    const int q = idx(cfg.probe_type);
    const int Nq = q == 0 ? cfg.Na : cfg.Nb;
    // every agent of the probe type is an admissible deviator on the same equilibrium path
    std::vector<double> eps(cfg.runs, 0.0);
    auto obs = [&](const StepView& v) {
        if (v.k >= pm.k_end) return;
        const Mat K = pm.gain(v.k);
        for (int i = 0; i < Nq; ++i) {
            const Vec du = (*v.U)[q].col(i) - K * pm.state(v, i);
            eps[v.run] += grid.dt * du.dot(pm.R * du) / Nq;
        }
    };
    const SimResult res = simulate(aut, grid, schedule, c, obs);

    NashRow row;
    row.N = cfg.N();
    row.Na = cfg.Na;
    row.Nb = cfg.Nb;
    row.runs = cfg.runs;
    double se = 0, sj = 0, se2 = 0, sj2 = 0;
    for (int r = 0; r < cfg.runs; ++r) {
        double J = 0.0;
        for (double c : res.cost_minor[q][r]) J += c / Nq;
        se += eps[r];
        se2 += eps[r] * eps[r];
        sj += J;
        sj2 += J * J;
    }
    const double R = cfg.runs;
    row.epsilon = se / R;
    row.J_eq = sj / R;
    row.J_dev = row.J_eq - row.epsilon;
    if (cfg.runs > 1) {
        row.stderr_eps = std::sqrt(std::max(0.0, (se2 - se * se / R) / (R - 1)) / R);
        row.stderr_J = std::sqrt(std::max(0.0, (sj2 - sj * sj / R) / (R - 1)) / R);
    }
    return row;
}

NashReport nash_ladder(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule,
                       const SimConfig& base, const std::vector<int>& Ns) {
    NashReport rep;
    for (int N : Ns) {
        SimConfig c = base;
        c.Na = N / 2;
        c.Nb = N - c.Na;
        rep.rows.push_back(nash_gap(aut, grid, schedule, c));
    }
    return rep;
}

void write_nash_csv(const NashReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << "N,J_eq,J_dev,epsilon,stderr\n";
    char buf[160];
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g\n", r.N, r.J_eq, r.J_dev, r.epsilon,
                      r.stderr_eps);
        f << buf;
    }
}

}  // namespace hmfg
