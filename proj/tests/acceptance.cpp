// Acceptance run: one PASS/FAIL line per criterion. Exit 0 iff the failures match --expect-fail.
#include "hmfg/pipeline.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace hmfg;
using namespace hmfg::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::set<int> failed;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) failed.insert(id);
}

template <typename F>
void guarded(int id, const std::string& title, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, title, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(const char* f, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void riccati_oracle() {
    const auto t0 = Clock::now();
    const double T = 2.0;
    LqSystem sys = LqSystem::constant(scalar(0), scalar(1), scalar(1), scalar(1));
    const RiccatiSegment seg = integrate_riccati(sys, T, scalar(0), 0.0, 0.01);
    double err = 0.0;
    for (int i = 0; i < seg.nodes(); ++i)
        err = std::max(err, std::abs(seg.node(i)(0, 0) - std::tanh(T - i * 0.01)));
    const double secs = seconds_since(t0);
    report(1, "Riccati oracle", err < 1e-6 && secs < 1.0, fmt("max |Pi - tanh(T-t)| = %.3e, %.3f s", err, secs));
}

void boundary_condition() {
    const Automaton aut = paper_sec4_scenario().automaton();
    Mat X = Mat::Random(6, 6);
    const Mat Pi = X * X.transpose();
    const Mat cont = apply_jump_condition(Pi, Mat::Identity(6, 6), Mat::Zero(6, 6));
    const double r_cont = (cont - Pi).cwiseAbs().maxCoeff();

    const JumpTransition& e = aut.edge(Label::q1ab, Label::q1a);
    Mat Y = Mat::Random(4, 4);
    const Mat Pa = Y * Y.transpose();
    const Mat& Psi = e.psi_major;
    const Mat& C = e.cost_major;
    // triple loop oracle for Psi' Pa Psi + C
    Mat oracle = Mat::Zero(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double s = C(i, j);
            for (int k = 0; k < 4; ++k)
                for (int l = 0; l < 4; ++l) s += Psi(k, i) * Pa(k, l) * Psi(l, j);
            oracle(i, j) = s;
        }
    const double r_drop = (apply_jump_condition(Pa, e, kMajor) - oracle).cwiseAbs().maxCoeff();
    report(2, "Boundary condition", r_cont == 0.0 && r_drop <= 1e-14,
           fmt("continuity residual %.1e, q1ab->q1a residual %.1e", r_cont, r_drop));
}

void diffusion_compat() {
    const Automaton aut = paper_sec4_scenario().automaton();
    const auto checks = check_diffusion_compat(aut);
    double worst = 0.0;
    int passed = 0;
    for (const auto& c : checks) {
        worst = std::max(worst, c.residual());
        passed += c.pass();
    }
    report(3, "Diffusion compatibility", checks.size() == 12 && passed == 12,
           fmt("%d/%zu edges exact, worst residual %.1e", passed, checks.size(), worst));
}

void stopping_time() {
    const auto t0 = Clock::now();
    // A = 0, B = R = P = 1, stopping weight C(t) = 1.5 - 0.05 t, no noise
    auto C = [](double t) { return 1.5 - 0.05 * t; };
    const double h = 0.01, T = 18.0, d = 0.0;
    LqSystem sys = LqSystem::constant(scalar(0), scalar(1), scalar(1), scalar(1));
    const GapFunction gap = stopping_gap(sys, [&](double t) { return scalar(C(t)); },
                                         [](double) { return scalar(-0.05); });
    EventOptions eo;
    eo.h = h;
    const EventSearch found = find_event_time(gap, 0.0, T, eo);

    // brute force: expected cost of stopping at each grid time, x0 = 1
    double best_t = 0.0, best_v = 1e300;
    for (int i = 0; i <= 1800; ++i) {
        const double tau = i * h;
        const ScalarValue v = scalar_riccati(0, 1, 1, 1, d, C(tau), 0.0, tau, h);
        if (v.p0 + v.trace < best_v) best_v = v.p0 + v.trace, best_t = tau;
    }
    const double secs = seconds_since(t0);
    const bool ok = found.time && std::abs(*found.time - best_t) <= h + 1e-12 && secs < 10.0;
    report(4, "Stopping time", ok,
           fmt("gap root %.6f, brute force %.2f, %.2f s", found.time ? *found.time : -1.0, best_t, secs));
}

std::string schedule_key(const SwitchSchedule& s) {
    std::ostringstream os;
    os << s.describe() << " nodes";
    for (int k : s.nodes()) os << ' ' << k;
    return os.str();
}

void invariance() {
    // bundled scenario: selected schedule over seeds and initial states
    Scenario sc = paper_sec4_scenario();
    std::vector<std::string> keys;
    const std::string dir = (std::filesystem::temp_directory_path() / "hmfg_acc_inv").string();
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        Scenario s = sc;
        s.seed = seed;
        PipelineOptions opt;
        opt.stages = {Stage::sequence};
        opt.out_dir = dir;
        std::ostringstream log;
        keys.push_back(run_pipeline(s, opt, log).schedule);
    }
    const std::vector<Vec> x0s = {(Vec(2) << 1, -1).finished(), (Vec(2) << -3, 2).finished(),
                                  (Vec(2) << 0.5, 4).finished()};
    for (const Vec& x0 : x0s) {
        Scenario s = sc;
        s.x0 = x0;
        const auto res = enumerate_schedules(s.automaton(), s.grid(), s.x0_ext(), s.solver);
        keys.push_back(select_optimal(res.schedules).describe());
    }
    bool same = true;
    for (const auto& k : keys) same &= k == keys.front();

    // synthetic problem with realized stops: the candidate schedules and their times
    Scenario st = stopping_scenario();
    std::vector<std::string> cands;
    std::string picked;
    for (double x0 : {1.0, -2.0, 5.0}) {
        st.x0(0) = x0;
        const auto res = enumerate_schedules(st.automaton(), st.grid(), st.x0_ext(), st.solver);
        picked += fmt(" x0=%g: %s;", x0, select_optimal(res.schedules).describe().c_str());
        std::string all;
        for (const auto& s : res.schedules) all += schedule_key(s) + "; ";
        cands.push_back(all);
    }
    const bool same_times = cands[0] == cands[1] && cands[1] == cands[2];
    report(5, "State invariance", same && same_times,
           fmt("bundled: %s over 5 seeds x 3 initial states; synthetic event times %s over 3 initial states "
               "(selected:%s)",
               same ? ("'" + keys.front() + "' identical").c_str() : "differs", same_times ? "identical" : "differ",
               picked.c_str()));
}

void consistency() {
    const Scenario sc = paper_sec4_scenario();
    const PathSolution sol = solve_consistency(sc.automaton(), sc.grid(), {{Label::q1ab}, {}}, sc.solver.consistency);
    const bool ok4 = sol.residual < 1e-9 && sol.iterations <= 200;

    const Scenario zc = zero_coupling_scenario();
    const Automaton aut = zc.automaton();
    const Grid grid = zc.grid();
    const PathSolution z = solve_consistency(aut, grid, {{Label::q1ab}, {}}, zc.solver.consistency);
    const SegmentSolution& seg = z.segments.front();
    // decoupled law: standalone LQR per type, Abar = (A - S Pi) e_k, Gbar = 0
    double err = 0.0;
    for (Pop p : kPops) {
        const ModeSpec& K = aut.minor_spec(p);
        const Mat A = K.A(0.0);
        LqSystem solo = LqSystem::constant(A, K.B, K.P, K.R);
        const RiccatiSegment r = integrate_riccati(solo, grid.T, K.Pbar, 0.0, grid.dt);
        const Mat e = selector(aut, Label::q1ab, p);
        for (int k = 0; k <= grid.K; ++k) {
            Mat Ab, Gb;
            seg.law.stacked(grid.t(k), Ab, Gb);
            const int row = idx(p) * zc.n;
            const Mat expect = (A - solo.S * r.node(k)) * e;
            err = std::max(err, (Ab.middleRows(row, zc.n) - expect).cwiseAbs().maxCoeff());
            err = std::max(err, Gb.middleRows(row, zc.n).cwiseAbs().maxCoeff());
        }
    }
    const bool ok0 = z.iterations == 1 && err < 1e-12;
    report(6, "Consistency fixed point", ok4 && ok0,
           fmt("scenario: %d iterations, residual %.2e; zero coupling: %d iteration(s), law error %.1e",
               sol.iterations, sol.residual, z.iterations, err));
}

struct Solved {
    Scenario sc;
    Automaton aut;
    Grid grid;
    SequencerResult seq;
    SwitchSchedule chosen;
};

Solved solve_bundled() {
    Scenario sc = paper_sec4_scenario();
    Automaton aut = sc.automaton();
    Grid grid = sc.grid();
    SequencerResult seq = enumerate_schedules(aut, grid, sc.x0_ext(), sc.solver);
    SwitchSchedule chosen = select_optimal(seq.schedules);
    return {sc, aut, grid, seq, chosen};
}

void mean_field_convergence(const Solved& s) {
    const auto t0 = Clock::now();
    std::vector<double> lx, ly;
    std::string detail;
    for (int N : {10, 100, 1000}) {
        SimConfig cfg = s.sc.sim_config();
        cfg.Na = N / 2;
        cfg.Nb = N - cfg.Na;
        cfg.runs = 100;
        cfg.costs = false;
        cfg.record_first = false;
        const SimResult res = simulate(s.aut, s.grid, s.chosen, cfg);
        double m = 0.0;
        for (double v : res.mf_rms) m += v;
        m /= res.runs;
        lx.push_back(std::log(double(N)));
        ly.push_back(std::log(m));
        detail += fmt("N=%d rms %.4g; ", N, m);
    }
    const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    const double alpha = -sxy / sxx;
    const double secs = seconds_since(t0);
    report(7, "Mean-field convergence", alpha >= 0.3 && alpha <= 0.7 && secs < 120.0,
           detail + fmt("alpha %.3f, %.1f s", alpha, secs));
}

void epsilon_nash(const Solved& s) {
    const auto t0 = Clock::now();
    SimConfig base = s.sc.sim_config();
    base.runs = 100;
    base.record_first = false;
    const NashReport rep = nash_ladder(s.aut, s.grid, s.chosen, base, {10, 50, 100});
    bool dec = true;
    std::string detail;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        detail += fmt("N=%d eps %.3e+-%.1e; ", r.N, r.epsilon, 2 * r.stderr_eps);
        if (i > 0) {
            const auto& q = rep.rows[i - 1];
            dec &= r.epsilon + 2 * r.stderr_eps < q.epsilon - 2 * q.stderr_eps;
        }
    }
    SimConfig ex = base;
    ex.Na = ex.Nb = 50;
    const NashRow proxy = nash_gap(s.aut, s.grid, s.chosen, ex, true);
    // the exact-mean deviation differs from the mean-field law only by the fixed-point residual
    const bool zero = proxy.epsilon <= std::max(2 * proxy.stderr_eps, s.sc.solver.consistency.tol);
    const double secs = seconds_since(t0);
    report(8, "epsilon-Nash trend", dec && zero && secs < 300.0,
           detail + fmt("exact mean eps %.1e+-%.1e, %.1f s", proxy.epsilon, 2 * proxy.stderr_eps, secs));
}

void stability(const Solved& s) {
    SimConfig cfg = s.sc.sim_config();
    cfg.runs = 100;
    cfg.record_first = false;
    const StabilityReport st = stability_check(simulate(s.aut, s.grid, s.chosen, cfg));
    report(9, "Second-order stability", st.pass(),
           fmt("max_t E|x|^2: major %.3g, type a %.3g, type b %.3g (bound %.0e)", st.major, st.minor_worst[0],
               st.minor_worst[1], st.bound));
}

void end_to_end() {
    const std::string src = HMFG_SOURCE_DIR;
    const Scenario sc = load_scenario(src + "/scenarios/paper_sec4.json");
    PipelineOptions opt;
    opt.stages = {Stage::solve, Stage::sequence, Stage::simulate};
    opt.out_dir = (std::filesystem::temp_directory_path() / "hmfg_acc_e2e").string();
    std::filesystem::remove_all(opt.out_dir);
    const auto t0 = Clock::now();
    std::ostringstream log;
    const Manifest man = run_pipeline(sc, opt, log);
    const double secs = seconds_since(t0);
    bool present = true;
    for (const char* f : {"riccati_major_q1ab.csv", "riccati_minor_a_q1ab.csv", "riccati_minor_b_q1ab.csv",
                          "meanfield_q1ab.csv", "schedule.txt", "trajectories.csv", "fig_states.csv",
                          "fig_controls.csv", "plot.gp", "manifest.txt"})
        present &= std::filesystem::exists(std::filesystem::path(opt.out_dir) / f);
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(man.hash()));
    std::string golden;
    std::ifstream(src + "/tests/golden/paper_sec4.hash") >> golden;
    report(10, "End-to-end", present && secs < 60.0 && golden == hash,
           fmt("%.1f s, artifacts %s, hash %s (golden %s), N=%d", secs, present ? "complete" : "missing", hash,
               golden.empty() ? "unset" : golden.c_str(), sc.Na + sc.Nb + 1));
}

}  // namespace

// --expect-fail 8,... names criteria known to fail; the exit status is then zero only when
// exactly those fail.
int main(int argc, char** argv) {
    std::set<int> expected;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--expect-fail") {
            std::stringstream ss(argv[i + 1]);
            std::string item;
            while (std::getline(ss, item, ',')) expected.insert(std::stoi(item));
        }

    guarded(1, "Riccati oracle", riccati_oracle);
    guarded(2, "Boundary condition", boundary_condition);
    guarded(3, "Diffusion compatibility", diffusion_compat);
    guarded(4, "Stopping time", stopping_time);
    guarded(5, "State invariance", invariance);
    guarded(6, "Consistency fixed point", consistency);
    std::optional<Solved> solved;
    try {
        solved = solve_bundled();
    } catch (const std::exception& e) {
        std::printf("bundled scenario failed to solve: %s\n", e.what());
    }
    if (solved) {
        guarded(7, "Mean-field convergence", [&] { mean_field_convergence(*solved); });
        guarded(8, "epsilon-Nash trend", [&] { epsilon_nash(*solved); });
        guarded(9, "Second-order stability", [&] { stability(*solved); });
    } else {
        for (int id : {7, 8, 9}) report(id, "needs the bundled schedule", false, "not solved");
    }
    guarded(10, "End-to-end", end_to_end);
    std::printf("%zu of 10 criteria failed", failed.size());
    if (!expected.empty()) {
        std::printf(" (expected to fail:");
        for (int id : expected) std::printf(" %d", id);
        std::printf(")");
    }
    std::printf("\n");
    return failed == expected ? 0 : 1;
}
