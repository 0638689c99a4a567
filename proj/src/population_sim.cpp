#include "hmfg/population_sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace hmfg {

PopulationFractions SimConfig::fractions() const {
    if (Na < 1 || Nb < 1) throw ConfigError("both minor types need at least one agent");
    return PopulationFractions::both(double(Na) / N(), double(Nb) / N());
}

std::uint64_t run_seed(std::uint64_t seed, int run) {
    // splitmix64 applied to seed + (run + 1) * golden gamma
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(run + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

Mat psd_sqrt(const Mat& C) {
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

// Sum over columns of x' Q x + 2 x' q + c, with z = [x; r] and Q_full = [[Q, .], [., .]].
Eigen::RowVectorXd quad_cols(const Mat& Qfull, int n, const Mat& X, const Vec& r) {
    const Mat Q11 = Qfull.topLeftCorner(n, n);
    const Vec q = Qfull.topRightCorner(n, r.size()) * r;
    const double c = r.dot(Qfull.bottomRightCorner(r.size(), r.size()) * r);
    Eigen::RowVectorXd out = (X.cwiseProduct(Q11 * X)).colwise().sum();
    out += 2.0 * q.transpose() * X;
    out.array() += c;
    return out;
}

struct Segments {
    const PathSolution* sol;
    int index(int k) const {
        for (int i = 0; i < int(sol->segments.size()); ++i)
            if (k >= sol->segments[i].k0 && k < sol->segments[i].k1) return i;
        return int(sol->segments.size()) - 1;
    }
};

}  // namespace

SimResult simulate(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule, const SimConfig& cfg,
                   const StepObserver& observer) {
    if (!schedule.solution) throw Error("simulate: schedule carries no solution");
    const PathSolution& sol = *schedule.solution;
    const int n = aut.n(), K = grid.K;
    const std::array<int, 2> Np = {cfg.Na, cfg.Nb};
    const Automaton costs(n, aut.specs(), cfg.fractions());
    require_dims(cfg.x0, n, 1, "initial major state");
    for (int p = 0; p < 2; ++p) {
        require_dims(cfg.xi_mean[p], n, 1, "minor initial mean");
        require_dims(cfg.xi_cov[p], n, n, "minor initial covariance");
    }
    if (sol.segments.back().k1 != K) throw Error("simulate: schedule does not cover the grid");
    Segments segs{&sol};

    const ModeSpec& Ma = aut.minor_spec(Pop::a);
    const ModeSpec& Mb = aut.minor_spec(Pop::b);
    const std::array<const ModeSpec*, 2> MS = {&Ma, &Mb};
    const std::array<Mat, 2> Lcov = {psd_sqrt(cfg.xi_cov[0]), psd_sqrt(cfg.xi_cov[1])};
    const double sdt = std::sqrt(grid.dt);

    SimResult res;
    res.runs = cfg.runs;
    res.m2_major.assign(K + 1, 0.0);
    for (int p = 0; p < 2; ++p) {
        res.m2_minor[p].assign(Np[p], std::vector<double>(K + 1, 0.0));
        res.cost_minor[p].assign(cfg.runs, std::vector<double>(Np[p], 0.0));
    }
    res.cost_major.assign(cfg.runs, 0.0);
    res.mf_rms.assign(cfg.runs, 0.0);

    Mat A0(n, n), Ak(n, n), Abar, Gbar;
    for (int run = 0; run < cfg.runs; ++run) {
        std::mt19937_64 rng(run_seed(cfg.seed, run));
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto draw = [&](int rows, int cols) {
            Mat Z(rows, cols);
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i) Z(i, j) = gauss(rng);
            return Z;
        };

        Vec x0 = cfg.x0, u0;
        std::array<Mat, 2> X, U;
        for (int p = 0; p < 2; ++p) {
            X[p] = (Lcov[p] * draw(n, Np[p])).colwise() + cfg.xi_mean[p];
            U[p] = Mat::Zero(MS[p]->B.cols(), Np[p]);
        }
        Vec xbar(2 * n);
        xbar << cfg.xi_mean[0], cfg.xi_mean[1];
        std::array<bool, 2> active = {true, true};
        double& Jmajor = res.cost_major[run];
        auto& Jminor = res.cost_minor;
        double mf_acc = 0.0;
        int seg_prev = -1;

        for (int k = 0; k <= K; ++k) {
            const double t = grid.t(k);
            const int si = segs.index(k);
            const SegmentSolution& seg = sol.segments[si];
            const Label l = seg.label;
            const auto st = state_of(l);

            std::array<Vec, 2> mean;
            for (int p = 0; p < 2; ++p) mean[p] = X[p].rowwise().mean();
            auto stack_active = [&](const std::array<Vec, 2>& v, Label lab) {
                Vec out(n * state_of(lab).num_active());
                int r = 0;
                for (Pop p : kPops)
                    if (state_of(lab).has(p)) out.segment(r, n) = v[idx(p)], r += n;
                return out;
            };
            // with exact_mean the costs also see the mean field
            std::array<Vec, 2> seen = mean;
            if (cfg.exact_mean)
                for (int p = 0; p < 2; ++p) seen[p] = xbar.segment(n * p, n);
            auto ext_major = [&](Label lab) {
                Vec z(aut.major_dim(lab));
                z << x0, stack_active(seen, lab);
                return z;
            };

            // jump at the start of a new segment: charge switching costs on the pre-jump state
            if (si != seg_prev && seg_prev >= 0 && cfg.costs) {
                const Label from = sol.segments[seg_prev].label;
                const JumpTransition& e = costs.edge(from, l);
                const Vec z0 = ext_major(from);
                Jmajor += z0.dot(e.cost_major * z0);
                for (Pop p : kPops) {
                    if (!state_of(from).has(p)) continue;
                    const Eigen::RowVectorXd c = quad_cols(e.cost_minor[idx(p)], n, X[idx(p)], z0);
                    for (int i = 0; i < Np[idx(p)]; ++i) Jminor[idx(p)][run][i] += c(i);
                }
            }
            seg_prev = si;
            active = st.active;

            const Vec xbar_act = stack_active({xbar.head(n), xbar.tail(n)}, l);
            const int i0 = k - seg.k0;
            if (k < K) {
                Vec r0(aut.major_dim(l));
                r0 << x0, xbar_act;
                u0 = seg.major.gain_node(i0) * r0;
                for (Pop p : kPops) {
                    if (!st.has(p)) {
                        U[idx(p)].setZero();
                        continue;
                    }
                    const Mat Kp = seg.minor[idx(p)]->gain_node(i0);
                    U[idx(p)] = Kp.leftCols(n) * X[idx(p)];
                    U[idx(p)].colwise() += Kp.rightCols(r0.size()) * r0;
                }
            } else {
                u0 = Vec::Zero(aut.major_spec(l).B.cols());
                for (auto& u : U) u.setZero();
            }

            StepView view;
            view.run = run;
            view.k = k;
            view.t = t;
            view.label = l;
            view.x0 = &x0;
            view.u0 = &u0;
            view.X = &X;
            view.U = &U;
            view.xbar = &xbar;
            view.active = active;
            if (cfg.probe_control && k < K && st.has(cfg.probe_type))
                U[idx(cfg.probe_type)].col(0) = cfg.probe_control(view);

            double gap2 = 0.0;
            for (Pop p : kPops)
                if (st.has(p)) gap2 += (mean[idx(p)] - xbar.segment(n * idx(p), n)).squaredNorm();
            mf_acc += gap2;

            res.m2_major[k] += x0.squaredNorm();
            for (int p = 0; p < 2; ++p)
                for (int i = 0; i < Np[p]; ++i) res.m2_minor[p][i][k] += X[p].col(i).squaredNorm();

            if (run == 0 && cfg.record_first) {
                auto& rec = res.first;
                rec.t.push_back(t);
                rec.x0.push_back(x0);
                rec.u0.push_back(u0);
                for (int p = 0; p < 2; ++p) {
                    rec.X[p].push_back(X[p]);
                    rec.U[p].push_back(U[p]);
                }
                rec.active.push_back(active);
                Vec em(2 * n);
                em << mean[0], mean[1];
                rec.empirical.push_back(em);
                rec.xbar.push_back(xbar);
            }
            if (observer) observer(view);

            const Vec z0 = ext_major(l);
            if (k == K) {
                if (cfg.costs) {
                    Jmajor += z0.dot(costs.terminal_weight(l, kMajor) * z0);
                    for (Pop p : kPops) {
                        if (!st.has(p)) continue;
                        const Eigen::RowVectorXd c =
                            quad_cols(costs.terminal_weight(l, idx(p)), n, X[idx(p)], z0);
                        for (int i = 0; i < Np[idx(p)]; ++i) Jminor[idx(p)][run][i] += c(i);
                    }
                }
                break;
            }

            if (cfg.costs) {
                const ModeSpec& M0 = aut.major_spec(l);
                Jmajor += grid.dt * (z0.dot(costs.running_weight(l, kMajor) * z0) + u0.dot(M0.R * u0));
                for (Pop p : kPops) {
                    if (!st.has(p)) continue;
                    const int q = idx(p);
                    Eigen::RowVectorXd c = quad_cols(costs.running_weight(l, q), n, X[q], z0);
                    c += (U[q].cwiseProduct(MS[q]->R * U[q])).colwise().sum();
                    for (int i = 0; i < Np[q]; ++i) Jminor[q][run][i] += grid.dt * c(i);
                }
            }

            // coupling term seen by every agent: the average over agents still present
            Vec xN = Vec::Zero(n);
            if (cfg.exact_mean) {
                const auto pl = aut.fractions(l);
                for (Pop p : kPops)
                    if (st.has(p)) xN += pl[p] * xbar.segment(n * idx(p), n);
            } else {
                int cnt = 0;
                for (Pop p : kPops)
                    if (st.has(p)) xN += double(Np[idx(p)]) * mean[idx(p)], cnt += Np[idx(p)];
                if (cnt > 0) xN /= cnt;
            }

            const ModeSpec& M0 = aut.major_spec(l);
            M0.A.eval_into(t, A0);
            const Mat dW0 = draw(M0.D.cols(), 1);
            Vec x0_next = x0 + grid.dt * (A0 * x0 + M0.B * u0) + sdt * (M0.D * dW0);
            if (st.num_active() > 0) x0_next += grid.dt * (M0.F * xN);

            for (int p = 0; p < 2; ++p) {
                const ModeSpec& M = *MS[p];
                const Mat dW = draw(M.D.cols(), Np[p]);
                if (!active[p]) continue;
                M.A.eval_into(t, Ak);
                Mat drift = Ak * X[p] + M.B * U[p];
                drift.colwise() += M.G * x0 + M.F * xN;
                X[p] += grid.dt * drift + sdt * (M.D * dW);
            }

            seg.law.stacked(t, Abar, Gbar);
            if (Abar.rows() > 0) {
                const Vec dxb = Abar * xbar_act + Gbar * x0;
                int r = 0;
                for (Pop p : kPops)
                    if (st.has(p)) xbar.segment(n * idx(p), n) += grid.dt * dxb.segment(r, n), r += n;
            }
            x0 = x0_next;

            if (!x0.allFinite() || x0.norm() > 1e12)
                throw InstabilityError("major state diverged at step " + std::to_string(k + 1));
            for (int p = 0; p < 2; ++p) {
                if (!active[p]) continue;
                for (int i = 0; i < Np[p]; ++i)
                    if (!X[p].col(i).allFinite() || X[p].col(i).norm() > 1e12)
                        throw InstabilityError("minor agent " + pop_name(Pop(p)) + std::to_string(i) +
                                               " diverged at step " + std::to_string(k + 1));
            }
        }
        res.mf_rms[run] = std::sqrt(mf_acc / (K + 1));
    }

    const double inv = 1.0 / cfg.runs;
    for (double& v : res.m2_major) v *= inv;
    for (auto& agents : res.m2_minor)
        for (auto& series : agents)
            for (double& v : series) v *= inv;
    return res;
}

bool StabilityReport::pass() const {
    auto ok = [&](double v) { return std::isfinite(v) && v < bound; };
    return ok(major) && ok(minor_worst[0]) && ok(minor_worst[1]);
}

StabilityReport stability_check(const SimResult& res, double bound) {
    StabilityReport r;
    r.bound = bound;
    for (double v : res.m2_major) r.major = std::max(r.major, v);
    for (int p = 0; p < 2; ++p) {
        r.minor_worst[p] = 0.0;
        for (const auto& series : res.m2_minor[p]) {
            double m = 0.0;
            for (double v : series) m = std::max(m, v);
            r.per_agent[p].push_back(m);
            r.minor_worst[p] = std::max(r.minor_worst[p], m);
        }
    }
    return r;
}

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    if (rec.t.empty()) return;
    const int n = int(rec.x0.front().size());
    const int m0 = int(rec.u0.front().size());
    int m = m0;
    for (const auto& U : rec.U) m = std::max(m, int(U.front().rows()));
    f << "t,agent_id,type,active";
    for (int i = 0; i < n; ++i) f << ",x_" << i + 1;
    for (int i = 0; i < m; ++i) f << ",u_" << i + 1;
    f << '\n';
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        f << ',' << buf;
    };
    for (std::size_t k = 0; k < rec.t.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10g", rec.t[k]);
        const std::string t = buf;
        f << t << ",0,major,1";
        for (int i = 0; i < n; ++i) num(rec.x0[k](i));
        for (int i = 0; i < m; ++i) num(i < m0 ? rec.u0[k](i) : 0.0);
        f << '\n';
        int id = 1;
        for (int p = 0; p < 2; ++p) {
            const Mat& X = rec.X[p][k];
            const Mat& U = rec.U[p][k];
            for (int a = 0; a < X.cols(); ++a, ++id) {
                f << t << ',' << id << ',' << pop_name(Pop(p)) << ',' << int(rec.active[k][p]);
                for (int i = 0; i < n; ++i) num(X(i, a));
                for (int i = 0; i < m; ++i) num(i < U.rows() ? U(i, a) : 0.0);
                f << '\n';
            }
        }
    }
}

}  // namespace hmfg
