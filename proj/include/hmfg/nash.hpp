#pragma once

#include "hmfg/population_sim.hpp"

#include <string>
#include <vector>

namespace hmfg {

// Finite-population problem of one probe minor agent of a given type while everybody
// else keeps the mean-field feedback. The state is
//   z = [x_i; x0; s_a; s_b; xbar_a; xbar_b],
// s_p being the average of the other agents of type p. With exact_mean the probe sees
// xbar in place of the empirical averages, which is the infinite-population problem.
struct ProbeModel {
    Pop probe = Pop::a;
    int Na = 0, Nb = 0;
    bool exact_mean = false;
    int n = 0;
    int k_end = 0;  // node where the probe leaves (its stopping node or K)
    std::vector<RiccatiSegment> segments;
    std::vector<int> k0;
    Mat R;

    int dim() const { return 6 * n; }
    Vec state(const StepView& v, int agent = 0) const;  // agent of the probe type
    Mat gain(int k) const;  // -R^{-1} B' Pi_z at node k
    const RiccatiSegment& segment_at(int k) const;
};

ProbeModel build_probe_model(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule, int Na,
                             int Nb, Pop probe = Pop::a, bool exact_mean = false);

struct NashRow {
    int N = 0, Na = 0, Nb = 0, runs = 0;
    double J_eq = 0.0, J_dev = 0.0, epsilon = 0.0;
    double stderr_eps = 0.0, stderr_J = 0.0;
};

struct NashReport {
    std::vector<NashRow> rows;
};

// Simulates cfg under the mean-field laws and integrates, per run,
// eps = int (u_mf - u_dev)' R (u_mf - u_dev) dt, where u_dev is the optimal response of an
// agent of the probe type. Each run averages over all agents of that type. J_dev = J_eq - eps.
NashRow nash_gap(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule, const SimConfig& cfg,
                 bool exact_mean = false);

// Splits each N into Na = N/2, Nb = N - Na.
NashReport nash_ladder(const Automaton& aut, const Grid& grid, const SwitchSchedule& schedule,
                       const SimConfig& base, const std::vector<int>& Ns);

void write_nash_csv(const NashReport& rep, const std::string& path);

}  // namespace hmfg
