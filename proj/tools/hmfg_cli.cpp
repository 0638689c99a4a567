#include "hmfg/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Hybrid major-minor LQG mean field game solver"};
    std::string config, stages = "all", out, agents;
    std::uint64_t seed = 0;
    int runs = 0;
    bool strict = false;
    app.add_option("--config", config, "scenario file (JSON)")->required();
    app.add_option("--stages", stages, "comma list of solve,sequence,simulate,verify, or all");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
    auto* runs_opt = app.add_option("--runs", runs, "Monte Carlo runs for simulate")->check(CLI::PositiveNumber);
    app.add_option("--agents", agents, "minor agent counts \"Na,Nb\"");
    app.add_option("--out", out, "output directory");
    app.add_flag("--strict", strict, "reject events that rely on fallbacks");
    CLI11_PARSE(app, argc, argv);

    try {
        hmfg::Scenario sc = hmfg::load_scenario(config);
        if (*seed_opt) sc.seed = seed;
        if (*runs_opt) sc.runs = runs;
        if (!agents.empty()) {
            const auto comma = agents.find(',');
            if (comma == std::string::npos) throw hmfg::ConfigError("--agents expects \"Na,Nb\"");
            try {
                sc.Na = std::stoi(agents.substr(0, comma));
                sc.Nb = std::stoi(agents.substr(comma + 1));
            } catch (const std::exception&) {
                throw hmfg::ConfigError("--agents expects \"Na,Nb\"");
            }
        }
        hmfg::PipelineOptions opt;
        opt.stages = hmfg::parse_stages(stages);
        opt.out_dir = out.empty() ? "out_" + sc.name : out;
        opt.strict = strict;
        const auto man = hmfg::run_pipeline(sc, opt, std::cout);
        if (!man.schedule.empty()) std::cout << "schedule: " << man.schedule << '\n';
        return 0;
    } catch (const hmfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const hmfg::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 3;
    } catch (const hmfg::AmbiguityError& e) {
        std::cerr << "ambiguous event: " << e.what() << '\n';
        return 4;
    } catch (const hmfg::InstabilityError& e) {
        std::cerr << "simulation unstable: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
