#pragma once

#include "hmfg/mean_field.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hmfg {

struct SequencerOptions {
    ConsistencyOptions consistency;
    double tol_def = 1e-8;
    double tol_root = 1e-10;
    double tol_match_steps = 2.0;  // "same instant" tolerance in grid steps
    // Strict: every applicable condition must share the root and indefinite gaps never
    // produce events. Otherwise only the deciding agent's condition is required.
    bool strict = false;
};

struct ConditionCheck {
    std::string name;
    bool deciding = false;
    bool held = false;
    std::optional<double> root;
    std::string note;
};

struct EventRecord {
    Label from, to;
    Event event;
    double t_raw = 0.0;  // refined root
    int node = 0;        // snapped grid node
    bool fallback = false;
    std::vector<ConditionCheck> conditions;
};

struct SwitchSchedule {
    std::vector<Label> path;
    std::vector<EventRecord> events;  // events[j] separates path[j] and path[j+1]
    double value = 0.0;
    double quadratic = 0.0;  // x0' Pi0(0) x0 part of value
    double trace = 0.0;      // noise part of value
    std::shared_ptr<const PathSolution> solution;

    std::vector<double> times(const Grid& grid) const;
    std::vector<int> nodes() const;
    std::string describe() const;
};

struct RejectedEdge {
    std::vector<Label> path;  // the extended path that was tested
    std::string reason;
};

struct EdgeOutcome {
    const JumpTransition* edge = nullptr;
    std::optional<EventRecord> event;
    std::string reason;
};

// Tests every transition into the first state of `suffix` (which must start at node 0).
std::vector<EdgeOutcome> backward_step(const Automaton& aut, const Grid& grid, const PathSolution& suffix,
                                       const SequencerOptions& opt = {});

// Restriction of a segment solution to nodes [k, k1].
SegmentSolution slice_segment(const SegmentSolution& s, const Grid& grid, int k);

struct SequencerResult {
    std::vector<SwitchSchedule> schedules;  // all feasible root paths with values
    std::vector<RejectedEdge> rejected;
    int suffixes_solved = 0;
};

SequencerResult enumerate_schedules(const Automaton& aut, const Grid& grid, const Vec& x0_ext,
                                    const SequencerOptions& opt = {});

double schedule_value(const Automaton& aut, const Grid& grid, const PathSolution& sol, const Vec& x0_ext,
                      double* quadratic = nullptr, double* trace = nullptr);

// Smallest value; ties within 1e-10 relative go to fewer events.
const SwitchSchedule& select_optimal(const std::vector<SwitchSchedule>& schedules);

// Number of paths starting at the initial state (including the one-state path).
int count_root_paths(const Automaton& aut);

void write_schedule_report(const SequencerResult& res, const SwitchSchedule& chosen, const Grid& grid,
                           const std::string& path);

}  // namespace hmfg
