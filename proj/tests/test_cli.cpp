#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmfg/pipeline.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace hmfg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hmfg_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(HMFG_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_json(const fs::path& dir, const nlohmann::json& j) {
    const fs::path p = dir / "scenario.json";
    std::ofstream(p) << j.dump(2);
    return p.string();
}

nlohmann::json as_json(const Scenario& s) { return nlohmann::json::parse(dump_scenario(s)); }

}  // namespace

TEST_CASE("scenario round trip") {
    for (const Scenario& s : {paper_sec4_scenario(), zero_coupling_scenario()}) {
        const Scenario back = parse_scenario(dump_scenario(s));
        CHECK(back.name == s.name);
        CHECK(back.T == s.T);
        CHECK(back.dt == s.dt);
        CHECK(back.Na == s.Na);
        CHECK(back.seed == s.seed);
        CHECK(back.x0 == s.x0);
        CHECK(back.xi_cov[1] == s.xi_cov[1]);
        for (int i = 0; i < 2; ++i) {
            CHECK(back.specs.major[i] == s.specs.major[i]);
            CHECK(back.specs.minor[i] == s.specs.minor[i]);
        }
        CHECK(back.solver.consistency.tol == s.solver.consistency.tol);
        CHECK(dump_scenario(back) == dump_scenario(s));
    }
}

TEST_CASE("bundled files match the built-in scenarios") {
    const std::string dir = std::string(HMFG_SOURCE_DIR) + "/scenarios/";
    CHECK(dump_scenario(load_scenario(dir + "paper_sec4.json")) == dump_scenario(paper_sec4_scenario()));
    CHECK(dump_scenario(load_scenario(dir + "zero_coupling.json")) == dump_scenario(zero_coupling_scenario()));
}

TEST_CASE("time-varying entries") {
    nlohmann::json j = as_json(paper_sec4_scenario());
    j["minor"]["a"]["A"][0][0] = nlohmann::json::array({{{"coef", -1.0}}, {{"coef", 0.5}, {"rate", -0.1}, {"trig", "cos"}, {"freq", 2.0}}});
    const Scenario s = parse_scenario(j.dump());
    const double t = 1.7;
    CHECK(s.specs.minor[0].A(t)(0, 0) == doctest::Approx(-1.0 + 0.5 * std::exp(-0.1 * t) * std::cos(2.0 * t)));
}

TEST_CASE("strict parsing") {
    const nlohmann::json good = as_json(zero_coupling_scenario());
    nlohmann::json j = good;
    j["extra"] = 1;
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);
    j = good;
    j["major"][0]["Q"] = 1;
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);
    j = good;
    j.erase("dt");
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);
    j = good;
    j["schema_version"] = 99;
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);
    j = good;
    j["major"][0]["B"] = nlohmann::json::array({{1.0, 2.0, 3.0}});
    CHECK_THROWS(parse_scenario(j.dump()));
    CHECK_THROWS_AS(parse_scenario("{not json"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("stage parsing") {
    CHECK(parse_stages("all").size() == 4);
    CHECK(parse_stages("simulate,solve") == std::vector<Stage>{Stage::solve, Stage::simulate});
    CHECK_THROWS_AS(parse_stages("solve,plot"), ConfigError);
}

TEST_CASE("solve stage only writes Riccati solutions") {
    const fs::path dir = scratch("solve");
    const std::string cfg = write_json(dir, as_json(zero_coupling_scenario()));
    REQUIRE(run_cli("--config " + cfg + " --stages solve --out " + (dir / "out").string()) == 0);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir / "out")) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    CHECK(files == std::vector<std::string>{"manifest.txt", "riccati_major_q1ab.csv", "riccati_minor_a_q1ab.csv",
                                            "riccati_minor_b_q1ab.csv"});
    std::ifstream f(dir / "out" / "riccati_major_q1ab.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header.rfind("t,p_1_1,", 0) == 0);
}

TEST_CASE("manifest hash is stable for a fixed seed") {
    const fs::path dir = scratch("hash");
    const std::string cfg = write_json(dir, as_json(zero_coupling_scenario()));
    const std::string base = "--config " + cfg + " --stages solve,sequence,simulate --seed 5 --runs 2 --agents 3,4";
    REQUIRE(run_cli(base + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run_cli(base + " --out " + (dir / "b").string()) == 0);
    REQUIRE(run_cli("--config " + cfg + " --stages solve,sequence,simulate --seed 6 --runs 2 --agents 3,4 --out " +
                    (dir / "c").string()) == 0);
    auto hash_line = [](const fs::path& p) {
        std::ifstream f(p / "manifest.txt");
        std::string line, last;
        while (std::getline(f, line)) last = line;
        return last;
    };
    CHECK(hash_line(dir / "a") == hash_line(dir / "b"));
    CHECK(hash_line(dir / "a") != hash_line(dir / "c"));
    std::ifstream tr(dir / "a" / "trajectories.csv");
    std::string header;
    std::getline(tr, header);
    CHECK(header == "t,agent_id,type,active,x_1,x_2,u_1");
}

TEST_CASE("exit codes") {
    const fs::path dir = scratch("codes");
    const nlohmann::json good = as_json(zero_coupling_scenario());

    nlohmann::json bad = good;
    bad["unknown"] = true;
    CHECK(run_cli("--config " + write_json(dir, bad) + " --stages solve --out " + (dir / "o").string()) == 2);
    CHECK(run_cli("--config " + (dir / "missing.json").string()) == 2);
    CHECK(run_cli("--config " + write_json(dir, good) + " --agents 3 --out " + (dir / "o").string()) == 2);

    // consistency cannot settle in a single iteration on the coupled scenario
    nlohmann::json slow = as_json(paper_sec4_scenario());
    slow["solver"]["max_iter"] = 1;
    CHECK(run_cli("--config " + write_json(dir, slow) + " --stages solve --out " + (dir / "o").string()) == 3);

    // an uncontrolled, strongly unstable type blows up the second moments
    nlohmann::json wild = good;
    wild["minor"]["b"]["A"] = nlohmann::json::array({{5.0, 0.0}, {0.0, 5.0}});
    wild["minor"]["b"]["B"] = nlohmann::json::array({{0.0}, {0.0}});
    CHECK(run_cli("--config " + write_json(dir, wild) + " --stages simulate --out " + (dir / "o").string()) == 5);
}
