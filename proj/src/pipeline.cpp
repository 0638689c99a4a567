#include "hmfg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace hmfg {

namespace fs = std::filesystem;

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::solve: return "solve";
        case Stage::sequence: return "sequence";
        case Stage::simulate: return "simulate";
        case Stage::verify: return "verify";
    }
    return "?";
}

std::vector<Stage> parse_stages(const std::string& list) {
    if (list == "all") return {Stage::solve, Stage::sequence, Stage::simulate, Stage::verify};
    std::vector<Stage> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        bool found = false;
        for (Stage s : {Stage::solve, Stage::sequence, Stage::simulate, Stage::verify})
            if (stage_name(s) == item) {
                if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
                found = true;
            }
        if (!found) throw ConfigError("unknown stage '" + item + "'");
    }
    if (out.empty()) throw ConfigError("no stages requested");
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return fnv1a(ss.str());
}

std::uint64_t Manifest::hash() const {
    auto sorted = files;
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[64];
    for (const auto& [name, fh] : sorted) {
        std::snprintf(buf, sizeof buf, " %016llx\n", static_cast<unsigned long long>(fh));
        h = fnv1a(name + buf, h);
    }
    return h;
}

namespace {

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_segment_riccati(const SegmentSolution& seg, const fs::path& dir, std::vector<std::string>& written) {
    const std::string l = label_name(seg.label);
    std::string name = "riccati_major_" + l + ".csv";
    write_riccati_csv(seg.major, (dir / name).string());
    written.push_back(name);
    for (Pop p : kPops) {
        if (!seg.minor[idx(p)]) continue;
        name = "riccati_minor_" + pop_name(p) + "_" + l + ".csv";
        write_riccati_csv(*seg.minor[idx(p)], (dir / name).string());
        written.push_back(name);
    }
}

// States and controls of the major and the first `per_type` agents of each type.
void write_figure(const TrajectoryRecord& rec, int per_type, bool controls, const fs::path& path,
                  const std::vector<Label>& labels) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    const int n = int(rec.x0.front().size());
    const int w = controls ? int(rec.u0.front().size()) : n;
    const char* sym = controls ? "u" : "x";
    std::array<int, 2> cnt;
    for (int p = 0; p < 2; ++p) cnt[p] = std::min<int>(per_type, int(rec.X[p].front().cols()));
    f << "t,state";
    for (int i = 0; i < w; ++i) f << ",major_" << sym << i + 1;
    for (int p = 0; p < 2; ++p) {
        const int wp = controls ? int(rec.U[p].front().rows()) : n;
        for (int a = 0; a < cnt[p]; ++a)
            for (int i = 0; i < wp; ++i) f << ',' << pop_name(Pop(p)) << a << '_' << sym << i + 1;
    }
    f << '\n';
    char buf[32];
    for (std::size_t k = 0; k < rec.t.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10g", rec.t[k]);
        f << buf << ',' << label_name(labels[k]);
        const Vec& m = controls ? rec.u0[k] : rec.x0[k];
        for (int i = 0; i < w; ++i) {
            std::snprintf(buf, sizeof buf, "%.10g", m(i));
            f << ',' << buf;
        }
        for (int p = 0; p < 2; ++p) {
            const Mat& M = controls ? rec.U[p][k] : rec.X[p][k];
            for (int a = 0; a < cnt[p]; ++a)
                for (int i = 0; i < M.rows(); ++i) {
                    std::snprintf(buf, sizeof buf, "%.10g", M(i, a));
                    f << ',' << buf;
                }
        }
        f << '\n';
    }
}

void write_plot_script(const fs::path& path, int n, int per_type) {
    std::ofstream f(path);
    f << "# gnuplot: states and controls of the major and sample minors per discrete state\n";
    f << "set datafile separator ','\nset key off\nset xlabel 't'\n";
    f << "set terminal pngcairo size 1200,800\n";
    f << "set output 'fig_states.png'\nset multiplot layout " << n << ",1\n";
    for (int i = 1; i <= n; ++i) {
        f << "set ylabel 'x" << i << "'\nplot 'fig_states.csv' every ::1 using 1:" << 2 + i << " w l lw 2";
        for (int p = 0; p < 2; ++p)
            for (int a = 0; a < per_type; ++a)
                f << ", '' every ::1 using 1:" << 2 + n + (p * per_type + a) * n + i << " w l";
        f << '\n';
    }
    f << "unset multiplot\n";
    f << "set output 'fig_controls.png'\nset ylabel 'u'\n";
    f << "plot 'fig_controls.csv' every ::1 using 1:3 w l lw 2";
    for (int c = 0; c < 2 * per_type; ++c) f << ", '' every ::1 using 1:" << 4 + c << " w l";
    f << '\n';
}

}  // namespace

Manifest run_pipeline(const Scenario& sc, const PipelineOptions& opt, std::ostream& log) {
    auto wants = [&](Stage s) { return std::find(opt.stages.begin(), opt.stages.end(), s) != opt.stages.end(); };
    Stage last = Stage::solve;
    for (Stage s : opt.stages) last = std::max(last, s);
    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    std::vector<std::string> written;

    const Automaton aut = sc.automaton();
    const Grid grid = sc.grid();
    SequencerOptions so = sc.solver;
    so.strict = opt.strict;
    Manifest man;

    if (wants(Stage::solve)) {
        log << "solve: consistency on " << label_name(Label::q1ab) << " over [0, " << grid.T << "]\n";
        const PathSolution sol = solve_consistency(aut, grid, {{Label::q1ab}, {}}, so.consistency);
        log << "  iterations " << sol.iterations << ", residual " << sol.residual << '\n';
        write_segment_riccati(sol.segments.front(), dir, written);
    }

    SequencerResult seq;
    const SwitchSchedule* chosen = nullptr;
    if (last >= Stage::sequence) {
        seq = enumerate_schedules(aut, grid, sc.x0_ext(), so);
        chosen = &select_optimal(seq.schedules);
        man.schedule = chosen->describe();
        log << "sequence: " << seq.schedules.size() << " feasible schedules, " << seq.rejected.size()
            << " rejected\n  selected " << man.schedule << "\n  value " << chosen->value << '\n';
        if (wants(Stage::sequence)) {
            write_schedule_report(seq, *chosen, grid, (dir / "schedule.txt").string());
            written.push_back("schedule.txt");
            for (const auto& seg : chosen->solution->segments) {
                const std::string name = "meanfield_" + label_name(seg.label) + ".csv";
                write_meanfield_csv(seg.law, grid, seg.k0, seg.k1, (dir / name).string());
                written.push_back(name);
                write_segment_riccati(seg, dir, written);
            }
        }
    }

    if (last >= Stage::simulate && wants(Stage::simulate)) {
        SimConfig cfg = sc.sim_config();
        const SimResult res = simulate(aut, grid, *chosen, cfg);
        write_trajectory_csv(res.first, (dir / "trajectories.csv").string());
        written.push_back("trajectories.csv");
        std::vector<Label> labels;
        for (int k = 0; k <= grid.K; ++k) labels.push_back(chosen->solution->segment_at(std::min(k, grid.K - 1)).label);
        const int per_type = 10;
        write_figure(res.first, per_type, false, dir / "fig_states.csv", labels);
        write_figure(res.first, per_type, true, dir / "fig_controls.csv", labels);
        write_plot_script(dir / "plot.gp", sc.n, std::min({per_type, sc.Na, sc.Nb}));
        written.insert(written.end(), {"fig_states.csv", "fig_controls.csv", "plot.gp"});
        const StabilityReport st = stability_check(res);
        std::ofstream f(dir / "stability.txt");
        f.precision(10);
        f << "runs " << res.runs << "\nmax E|x0|^2 " << st.major << "\nmax E|xi|^2 a " << st.minor_worst[0]
          << "\nmax E|xi|^2 b " << st.minor_worst[1] << "\nbound " << st.bound << "\npass " << st.pass() << '\n';
        written.push_back("stability.txt");
        log << "simulate: " << res.runs << " runs, N = " << cfg.N() << ", max second moments " << st.major << " / "
            << st.minor_worst[0] << " / " << st.minor_worst[1] << '\n';
        if (!st.pass()) throw InstabilityError("second moments exceed the bound");
    }

    if (wants(Stage::verify)) {
        SimConfig base = sc.sim_config();
        base.runs = sc.nash_runs;
        base.record_first = false;
        const NashReport rep = nash_ladder(aut, grid, *chosen, base, sc.nash_ladder);
        write_nash_csv(rep, (dir / "nash_report.csv").string());
        written.push_back("nash_report.csv");
        for (const auto& r : rep.rows)
            log << "verify: N = " << r.N << " epsilon " << r.epsilon << " +- " << r.stderr_eps << '\n';
    }

    std::sort(written.begin(), written.end());
    written.erase(std::unique(written.begin(), written.end()), written.end());
    for (const auto& name : written) man.files.push_back({name, file_hash((dir / name).string())});
    std::ofstream mf(dir / "manifest.txt");
    for (const auto& [name, h] : man.files) mf << hex(h) << "  " << name << '\n';
    mf << "hash " << hex(man.hash()) << '\n';
    log << "manifest hash " << hex(man.hash()) << '\n';
    return man;
}

}  // namespace hmfg
