#include "hmfg/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace hmfg {

std::vector<double> SwitchSchedule::times(const Grid& grid) const {
    std::vector<double> out;
    for (const auto& e : events) out.push_back(grid.t(e.node));
    return out;
}

std::vector<int> SwitchSchedule::nodes() const {
    std::vector<int> out;
    for (const auto& e : events) out.push_back(e.node);
    return out;
}

std::string SwitchSchedule::describe() const {
    std::ostringstream os;
    os << label_name(path.front());
    for (std::size_t j = 0; j < events.size(); ++j)
        os << " -[" << event_name(events[j].event) << " t=" << events[j].t_raw << "]-> " << label_name(path[j + 1]);
    return os.str();
}

SegmentSolution slice_segment(const SegmentSolution& s, const Grid& grid, int k) {
    if (k < s.k0 || k > s.k1) throw Error("slice_segment: node outside segment");
    SegmentSolution out = s;
    const int drop = k - s.k0;
    out.k0 = k;
    auto cut = [&](RiccatiSegment& r) {
        r.Pi.erase(r.Pi.begin(), r.Pi.begin() + drop);
        r.dPi.erase(r.dPi.begin(), r.dPi.begin() + drop);
        r.t0 = grid.t(k);
    };
    cut(out.major);
    for (auto& m : out.minor)
        if (m) cut(*m);
    for (int p = 0; p < 2; ++p) {
        if (out.law.Abar[p].empty()) continue;
        out.law.Abar[p].erase(out.law.Abar[p].begin(), out.law.Abar[p].begin() + 2 * drop);
        out.law.Gbar[p].erase(out.law.Gbar[p].begin(), out.law.Gbar[p].begin() + 2 * drop);
    }
    out.law.t0 = grid.t(k);
    return out;
}

namespace {

// Quantities of the pre-jump state, obtained pointwise from the post-jump solution through
// the jump conditions. One cached instant, since every gap evaluation asks for the same t.
struct BeforeState {
    const Automaton* aut;
    const JumpTransition* e;
    std::shared_ptr<const SegmentSolution> after;
    double t = std::numeric_limits<double>::quiet_NaN();
    Mat Pi0;
    std::array<Mat, 2> Pik;
    Mat A, G;

    void at(double s) {
        if (s == t) return;
        Pi0 = apply_jump_condition(after->major.at(s), *e, kMajor);
        const int n = aut->n(), w = aut->major_dim(e->from) - n;
        A.resize(w, w);
        G.resize(w, n);
        int row = 0;
        for (Pop p : kPops) {
            if (!state_of(e->from).has(p)) continue;
            if (state_of(e->to).has(p))
                Pik[idx(p)] = apply_jump_condition(after->minor[idx(p)]->at(s), *e, idx(p));
            else
                Pik[idx(p)] = e->cost_minor[idx(p)];
            auto [Ab, Gb] = law_from_minor(*aut, e->from, p, s, Pik[idx(p)]);
            A.middleRows(row, n) = Ab;
            G.middleRows(row, n) = Gb;
            row += n;
        }
        t = s;
    }
};

struct Condition {
    std::string name;
    GapFunction gap;
};

std::vector<Condition> edge_conditions(const Automaton& aut, const JumpTransition& e,
                                       std::shared_ptr<const SegmentSolution> after, int& deciding) {
    auto ctx = std::make_shared<BeforeState>();
    ctx->aut = &aut;
    ctx->e = &e;
    ctx->after = after;
    ExtendedSystem maj_b = build_major_extended(aut, e.from, [ctx](double t, Mat& A, Mat& G) {
        ctx->at(t);
        A = ctx->A;
        G = ctx->G;
    });
    ExtendedSystem maj_a = after->major_system(aut);
    std::vector<Condition> out;
    out.push_back({"major_continuity",
                   switch_gap(maj_b.lq, maj_a.lq, [after](double t) { return after->major.at(t); },
                              e.psi_major, e.cost_major)});
    deciding = 0;
    for (Pop p : kPops) {
        if (!state_of(e.from).has(p)) continue;
        ExtendedSystem min_b = build_minor_extended(aut, e.from, p, maj_b, [ctx](double t) {
            ctx->at(t);
            return ctx->Pi0;
        });
        const Mat C = e.cost_minor[idx(p)];
        if (state_of(e.to).has(p)) {
            ExtendedSystem min_a = after->minor_system(aut, p);
            const int k = idx(p);
            out.push_back({"minor_" + pop_name(p) + "_continuity",
                           switch_gap(min_b.lq, min_a.lq, [after, k](double t) { return after->minor[k]->at(t); },
                                      e.psi_minor[k], C)});
        } else {
            out.push_back({"minor_" + pop_name(p) + "_stopping",
                           stopping_gap(min_b.lq, [C](double) { return C; })});
            if (e.event == stop_event(p)) deciding = int(out.size()) - 1;
        }
    }
    return out;
}

std::string path_string(const std::vector<Label>& path) {
    std::string s;
    for (std::size_t i = 0; i < path.size(); ++i) s += (i ? "->" : "") + label_name(path[i]);
    return s;
}

}  // namespace

std::vector<EdgeOutcome> backward_step(const Automaton& aut, const Grid& grid, const PathSolution& suffix,
                                       const SequencerOptions& opt) {
    const SegmentSolution& first = suffix.segments.front();
    if (first.k0 != 0) throw Error("backward_step: suffix must start at node 0");
    auto after = std::make_shared<const SegmentSolution>(first);
    const double h = grid.dt;
    std::vector<EdgeOutcome> out;
    for (const JumpTransition* e : aut.incoming(first.label)) {
        EdgeOutcome oc;
        oc.edge = e;
        if (first.k1 < 2) {
            oc.reason = "no room for an event before the next one";
            out.push_back(oc);
            continue;
        }
        int deciding = 0;
        auto conds = edge_conditions(aut, *e, after, deciding);
        const double t_lo = grid.t(1), t_hi = grid.t(first.k1 - 1);
        EventOptions eo;
        eo.h = h;
        eo.tol_def = opt.tol_def;
        eo.tol_root = opt.tol_root;
        eo.allow_fallback = !opt.strict;

        EventSearch found;
        try {
            found = find_event_time(conds[deciding].gap, t_lo, t_hi, eo);
        } catch (const AmbiguityError& err) {
            std::vector<Label> p = {e->from};
            p.insert(p.end(), suffix.path.states.begin(), suffix.path.states.end());
            if (opt.strict)
                throw AmbiguityError("path " + path_string(p) + ", " + conds[deciding].name + ": " + err.what(),
                                     err.candidates);
            oc.reason = conds[deciding].name + " ambiguous: " + err.what();
            out.push_back(oc);
            continue;
        }
        if (!found.time) {
            oc.reason = conds[deciding].name + ": " + found.reason;
            out.push_back(oc);
            continue;
        }
        const double ts = *found.time;
        EventRecord rec{e->from, e->to, e->event, ts, std::clamp(grid.node(ts), 1, first.k1 - 1), found.fallback, {}};
        const double tol_match = opt.tol_match_steps * h;
        bool all_held = true;
        for (int i = 0; i < int(conds.size()); ++i) {
            ConditionCheck cc;
            cc.name = conds[i].name;
            if (i == deciding) {
                cc.deciding = true;
                cc.held = true;
                cc.root = ts;
                cc.note = found.reason;
            } else {
                EventOptions local = eo;
                local.allow_fallback = false;
                try {
                    const double a = std::max(t_lo, ts - tol_match - h), b = std::min(t_hi, ts + tol_match + h);
                    auto r = find_event_time(conds[i].gap, a, b, local);
                    cc.root = r.time;
                    cc.held = r.identically_zero || (r.time && std::abs(*r.time - ts) <= tol_match);
                    cc.note = r.reason;
                } catch (const AmbiguityError& err) {
                    cc.note = err.what();
                }
            }
            all_held &= cc.held;
            rec.conditions.push_back(cc);
        }
        if (opt.strict && !all_held) {
            std::string missing;
            for (const auto& c : rec.conditions)
                if (!c.held) missing += " " + c.name;
            oc.reason = "conditions without a common root:" + missing;
            out.push_back(oc);
            continue;
        }
        oc.event = rec;
        oc.reason = found.reason;
        out.push_back(oc);
    }
    return out;
}

double schedule_value(const Automaton& aut, const Grid& grid, const PathSolution& sol, const Vec& x0_ext,
                      double* quadratic, double* trace) {
    const Mat& P0 = sol.segments.front().major.node(0);
    if (x0_ext.size() != P0.rows()) throw DimensionError("initial extended state has wrong dimension");
    const double q = x0_ext.dot(P0 * x0_ext);
    double tr = 0.0;
    for (const auto& seg : sol.segments) {
        const Mat D = aut.diffusion(seg.label, kMajor);
        const Mat DDt = D * D.transpose();
        const int N = seg.major.nodes();
        for (int i = 0; i + 1 < N; ++i)
            tr += 0.5 * grid.dt * ((seg.major.node(i) * DDt).trace() + (seg.major.node(i + 1) * DDt).trace());
    }
    if (quadratic) *quadratic = q;
    if (trace) *trace = tr;
    return q + tr;
}

SequencerResult enumerate_schedules(const Automaton& aut, const Grid& grid, const Vec& x0_ext,
                                    const SequencerOptions& opt) {
    struct Suffix {
        std::shared_ptr<const PathSolution> sol;
        std::vector<EventRecord> events;
    };
    SequencerResult res;
    std::vector<Suffix> stack;
    for (auto it = kAllLabels.rbegin(); it != kAllLabels.rend(); ++it) {
        try {
            auto sol = std::make_shared<PathSolution>(solve_consistency(aut, grid, {{*it}, {}}, opt.consistency));
            ++res.suffixes_solved;
            stack.push_back({sol, {}});
        } catch (const SolverError& err) {
            res.rejected.push_back({{*it}, std::string("consistency failed: ") + err.what()});
        }
    }
    while (!stack.empty()) {
        Suffix cur = std::move(stack.back());
        stack.pop_back();
        const auto& states = cur.sol->path.states;
        if (states.front() == Label::q1ab) {
            SwitchSchedule s;
            s.path = states;
            s.events = cur.events;
            s.solution = cur.sol;
            s.value = schedule_value(aut, grid, *cur.sol, x0_ext, &s.quadratic, &s.trace);
            res.schedules.push_back(std::move(s));
        }
        for (auto& oc : backward_step(aut, grid, *cur.sol, opt)) {
            std::vector<Label> p = {oc.edge->from};
            p.insert(p.end(), states.begin(), states.end());
            if (!oc.event) {
                res.rejected.push_back({p, oc.reason});
                continue;
            }
            const int k = oc.event->node;
            try {
                SegmentSolution sliced = slice_segment(cur.sol->segments.front(), grid, k);
                TerminalValues tv = jump_terminal(aut, *oc.edge, sliced);
                auto next = std::make_shared<PathSolution>();
                next->path.states = p;
                next->path.events = {k};
                next->path.events.insert(next->path.events.end(), cur.sol->path.events.begin(),
                                         cur.sol->path.events.end());
                next->segments.push_back(
                    solve_segment(aut, grid, oc.edge->from, 0, k, tv.major, tv.minor, opt.consistency));
                next->segments.push_back(std::move(sliced));
                next->segments.insert(next->segments.end(), cur.sol->segments.begin() + 1, cur.sol->segments.end());
                for (const auto& sg : next->segments) {
                    next->residual = std::max(next->residual, sg.residual);
                    next->iterations += sg.iterations;
                }
                ++res.suffixes_solved;
                std::vector<EventRecord> ev = {*oc.event};
                ev.insert(ev.end(), cur.events.begin(), cur.events.end());
                stack.push_back({next, ev});
            } catch (const SolverError& err) {
                res.rejected.push_back({p, std::string("consistency failed: ") + err.what()});
            }
        }
    }
    std::stable_sort(res.schedules.begin(), res.schedules.end(), [](const auto& a, const auto& b) {
        if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
        return a.path < b.path;
    });
    return res;
}

const SwitchSchedule& select_optimal(const std::vector<SwitchSchedule>& schedules) {
    if (schedules.empty()) throw Error("select_optimal: no schedules");
    const SwitchSchedule* best = &schedules.front();
    for (const auto& s : schedules) {
        const double scale = std::max({1.0, std::abs(s.value), std::abs(best->value)});
        const double diff = s.value - best->value;
        if (diff < -1e-10 * scale || (std::abs(diff) <= 1e-10 * scale && s.events.size() < best->events.size()))
            best = &s;
    }
    return *best;
}

int count_root_paths(const Automaton& aut) {
    std::function<int(Label)> walk = [&](Label l) {
        int c = 1;
        for (const auto* e : aut.outgoing(l)) c += walk(e->to);
        return c;
    };
    return walk(Label::q1ab);
}

void write_schedule_report(const SequencerResult& res, const SwitchSchedule& chosen, const Grid& grid,
                           const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f.precision(12);
    auto write_one = [&](const SwitchSchedule& s, const char* indent) {
        f << indent << "path: " << path_string(s.path) << '\n';
        f << indent << "times:";
        for (double t : s.times(grid)) f << ' ' << t;
        if (s.events.empty()) f << " none";
        f << '\n' << indent << "value: " << s.value << " (quadratic " << s.quadratic << ", noise " << s.trace << ")\n";
        for (const auto& e : s.events) {
            f << indent << "event " << label_name(e.from) << "->" << label_name(e.to) << " " << event_name(e.event)
              << " root=" << e.t_raw << " node=" << e.node << (e.fallback ? " fallback" : "") << '\n';
            for (const auto& c : e.conditions)
                f << indent << "  " << c.name << (c.deciding ? " [deciding]" : "") << ": "
                  << (c.held ? "held" : "not held") << (c.root ? " root=" + std::to_string(*c.root) : "")
                  << " (" << c.note << ")\n";
        }
    };
    f << "selected:\n";
    write_one(chosen, "  ");
    f << "candidates: " << res.schedules.size() << '\n';
    for (const auto& s : res.schedules) write_one(s, "  ");
    f << "rejected: " << res.rejected.size() << '\n';
    for (const auto& r : res.rejected) f << "  " << path_string(r.path) << ": " << r.reason << '\n';
}

}  // namespace hmfg
