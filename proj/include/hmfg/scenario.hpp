#pragma once

#include "hmfg/nash.hpp"
#include "hmfg/sequencer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hmfg {

inline constexpr int kSchemaVersion = 1;

struct Scenario {
    std::string name = "scenario";
    int n = 1, m = 1, r = 1;
    double T = 1.0, dt = 0.01;
    int Na = 50, Nb = 50;
    HybridSpecs specs;
    Vec x0;
    std::array<Vec, 2> xi_mean;
    std::array<Mat, 2> xi_cov;
    std::uint64_t seed = 1;
    int runs = 10;
    std::vector<int> nash_ladder = {10, 50, 100};
    int nash_runs = 100;
    SequencerOptions solver;

    PopulationFractions fractions() const;
    Grid grid() const { return Grid(T, dt); }
    Automaton automaton() const { return Automaton(n, specs, fractions()); }
    SimConfig sim_config() const;
    Vec x0_ext() const;  // [x0; xbar_a(0); xbar_b(0)]
};

// Strict: unknown keys, missing required keys and bad shapes raise ConfigError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string dump_scenario(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

// Edges with their jump maps and switching costs, same matrix encoding as the config.
std::string dump_automaton(const Automaton& aut);

// Bundled two-dimensional example: time-varying dynamics for all classes, 50 + 50 minors,
// T = 18, unit default weights.
Scenario paper_sec4_scenario();

// Scalar-per-block decoupled problem: no major/mean-field coupling, identical major modes.
Scenario zero_coupling_scenario(int n = 2, double T = 2.0, double dt = 0.01);

}  // namespace hmfg
