#pragma once

#include "hmfg/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hmfg {

enum class Stage { solve, sequence, simulate, verify };

std::vector<Stage> parse_stages(const std::string& list);  // "solve,sequence" or "all"
std::string stage_name(Stage s);

struct PipelineOptions {
    std::vector<Stage> stages = {Stage::solve, Stage::sequence, Stage::simulate, Stage::verify};
    std::string out_dir = "out";
    bool strict = false;
};

struct Manifest {
    std::vector<std::pair<std::string, std::uint64_t>> files;  // name, FNV-1a of contents
    std::string schedule;                                       // one-line summary when sequenced
    std::uint64_t hash() const;                                 // over the sorted file list
};

// Runs the requested stages in dependency order. Stages that are needed but not requested
// are computed without writing their artifacts.
Manifest run_pipeline(const Scenario& sc, const PipelineOptions& opt, std::ostream& log);

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t file_hash(const std::string& path);

}  // namespace hmfg
