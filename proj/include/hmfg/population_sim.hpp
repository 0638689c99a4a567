#pragma once

#include "hmfg/sequencer.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hmfg {

struct StepView;

struct SimConfig {
    int Na = 50, Nb = 50;
    std::uint64_t seed = 1;
    int runs = 1;
    Vec x0;                          // initial major state
    std::array<Vec, 2> xi_mean;      // minor initial distribution per type
    std::array<Mat, 2> xi_cov;
    bool costs = true;               // realized cost accounting
    bool record_first = true;        // keep full trajectories of run 0
    bool exact_mean = false;         // dynamics and costs see the mean field instead of the empirical mean
    // Replaces the control of agent 0 of probe_type while its type is present.
    Pop probe_type = Pop::a;
    std::function<Vec(const StepView&)> probe_control;

    int N() const { return Na + Nb; }
    PopulationFractions fractions() const;
};

// Everything an observer may read at node k, before the step to k+1 is taken.
struct StepView {
    int run = 0, k = 0;
    double t = 0.0;
    Label label = Label::q1ab;
    const Vec* x0 = nullptr;
    const Vec* u0 = nullptr;
    const std::array<Mat, 2>* X = nullptr;  // n x N_p, frozen columns for stopped agents
    const std::array<Mat, 2>* U = nullptr;
    const Vec* xbar = nullptr;              // [xbar_a; xbar_b], entries of absent types frozen
    std::array<bool, 2> active = {true, true};
};

// Full record of one run, stored for run 0 only.
struct TrajectoryRecord {
    std::vector<double> t;
    std::vector<Vec> x0, u0;
    std::array<std::vector<Mat>, 2> X, U;
    std::vector<std::array<bool, 2>> active;
    std::vector<Vec> empirical, xbar;  // stacked per type, 2n each
};

struct SimResult {
    int runs = 0;
    TrajectoryRecord first;
    // realized costs per run: major, and per agent of each type
    std::vector<double> cost_major;
    std::array<std::vector<std::vector<double>>, 2> cost_minor;
    // Monte Carlo mean of |x(t)|^2 per node: major and per agent of each type
    std::vector<double> m2_major;
    std::array<std::vector<std::vector<double>>, 2> m2_minor;  // [agent][node]
    // per run, RMS over nodes of |empirical - xbar| on the active types
    std::vector<double> mf_rms;
};

using StepObserver = std::function<void(const StepView&)>;

// Euler-Maruyama over the grid under the schedule's feedback laws. aut is the mean-field
// automaton the schedule was solved on; realized costs use weights rebuilt with the
// finite-population fractions.
SimResult simulate(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule, const SimConfig& cfg,
                   const StepObserver& observer = {});

struct StabilityReport {
    double major = 0.0;                  // max_t E|x0|^2
    std::array<double, 2> minor_worst;   // max over agents of max_t E|xi|^2
    std::array<std::vector<double>, 2> per_agent;
    double bound = 1e6;
    bool pass() const;
};

StabilityReport stability_check(const SimResult& res, double bound = 1e6);

// Columns t, agent_id, type, active, x_1..x_n, u_1..u_m; agent 0 is the major.
void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path);

// Per-run RNG stream.
std::uint64_t run_seed(std::uint64_t seed, int run);

}  // namespace hmfg
