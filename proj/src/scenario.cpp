#include "hmfg/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace hmfg {

using nlohmann::json;

namespace {

std::string compact(const json& v) {
    if (v.is_object()) {
        std::string out = "{";
        for (auto it = v.begin(); it != v.end(); ++it)
            out += (it == v.begin() ? "" : ", ") + json(it.key()).dump() + ": " + compact(it.value());
        return out + "}";
    }
    if (v.is_array()) {
        std::string out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + compact(v[i]);
        return out + "]";
    }
    return v.dump();
}

// dump(2) layout, except that anything fitting on a line of 100 columns is written inline
void pretty(const json& v, std::string& out, int indent) {
    const std::string line = compact(v);
    if ((!v.is_structured() || indent > 0) && indent + line.size() <= 100) {
        out += line;
        return;
    }
    const std::string pad(indent + 2, ' ');
    const bool obj = v.is_object();
    out += obj ? "{\n" : "[\n";
    std::size_t i = 0;
    for (auto it = v.begin(); it != v.end(); ++it, ++i) {
        out += pad;
        if (obj) out += json(it.key()).dump() + ": ";
        pretty(it.value(), out, indent + 2);
        out += i + 1 < v.size() ? ",\n" : "\n";
    }
    out += std::string(indent, ' ') + (obj ? "}" : "]");
}

std::string pretty(const json& v) {
    std::string out;
    pretty(v, out, 0);
    return out + "\n";
}

}  // namespace

PopulationFractions Scenario::fractions() const {
    SimConfig c;
    c.Na = Na;
    c.Nb = Nb;
    return c.fractions();
}

SimConfig Scenario::sim_config() const {
    SimConfig c;
    c.Na = Na;
    c.Nb = Nb;
    c.seed = seed;
    c.runs = runs;
    c.x0 = x0;
    c.xi_mean = xi_mean;
    c.xi_cov = xi_cov;
    return c;
}

Vec Scenario::x0_ext() const {
    Vec z(3 * n);
    z << x0, xi_mean[0], xi_mean[1];
    return z;
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed,
                std::initializer_list<const char*> required = {}) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    for (const char* k : required)
        if (!j.contains(k)) throw ConfigError(where + ": missing key '" + std::string(k) + "'");
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<int>();
}

Mat matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Mat M(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(where + ": ragged matrix");
        for (std::size_t c = 0; c < cols; ++c) M(i, c) = number(j[i][c], where);
    }
    return M;
}

Vec vector(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = number(j[i], where);
    return v;
}

TimeFunction time_function(const json& j, const std::string& where) {
    if (j.is_number()) return TimeFunction::constant(j.get<double>());
    if (!j.is_array()) throw ConfigError(where + ": expected a number or a list of terms");
    TimeFunction f;
    for (const auto& t : j) {
        check_keys(t, where, {"coef", "rate", "trig", "freq"}, {"coef"});
        ExpTrigTerm term;
        term.coef = number(t["coef"], where + ".coef");
        if (t.contains("rate")) term.rate = number(t["rate"], where + ".rate");
        if (t.contains("freq")) term.freq = number(t["freq"], where + ".freq");
        if (t.contains("trig")) {
            const std::string s = t["trig"].get<std::string>();
            if (s == "cos") term.trig = ExpTrigTerm::Trig::cos;
            else if (s == "sin") term.trig = ExpTrigTerm::Trig::sin;
            else if (s != "none") throw ConfigError(where + ": trig must be none, cos or sin");
        }
        f.terms.push_back(term);
    }
    return f;
}

TimeMatrix time_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(where + ": expected an array of rows");
    TimeMatrix M(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != j[0].size()) throw ConfigError(where + ": ragged matrix");
        for (std::size_t c = 0; c < j[i].size(); ++c)
            M.at(i, c) = time_function(j[i][c], where + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
    }
    return M;
}

json to_json(const Mat& M) {
    json j = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(i, c));
        j.push_back(row);
    }
    return j;
}

json to_json_vec(const Vec& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

json to_json(const TimeFunction& f) {
    if (f.terms.empty()) return 0.0;
    const auto& t0 = f.terms.front();
    if (f.terms.size() == 1 && t0.rate == 0.0 && t0.trig == ExpTrigTerm::Trig::none && t0.freq == 0.0)
        return t0.coef;
    json j = json::array();
    for (const auto& t : f.terms) {
        json o = {{"coef", t.coef}};
        if (t.rate != 0.0) o["rate"] = t.rate;
        if (t.trig != ExpTrigTerm::Trig::none) o["trig"] = t.trig == ExpTrigTerm::Trig::cos ? "cos" : "sin";
        if (t.freq != 0.0) o["freq"] = t.freq;
        j.push_back(o);
    }
    return j;
}

json to_json(const TimeMatrix& M) {
    json j = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(to_json(M.at(i, c)));
        j.push_back(row);
    }
    return j;
}

ModeSpec mode_spec(const json& j, const std::string& where, bool major) {
    if (major)
        check_keys(j, where, {"A", "B", "D", "F", "P", "R", "Pbar", "H"}, {"A", "B", "D", "P", "R"});
    else
        check_keys(j, where, {"A", "B", "D", "G", "F", "P", "R", "Pbar", "H1", "H2"}, {"A", "B", "D", "P", "R"});
    ModeSpec s;
    s.A = time_matrix(j["A"], where + ".A");
    auto opt = [&](const char* k, Mat& M) {
        if (j.contains(k)) M = matrix(j[k], where + "." + k);
    };
    opt("B", s.B);
    opt("D", s.D);
    opt("G", s.G);
    opt("F", s.F);
    opt("P", s.P);
    opt("R", s.R);
    opt("Pbar", s.Pbar);
    opt("H", s.H);
    opt("H1", s.H1);
    opt("H2", s.H2);
    return s;
}

json to_json(const ModeSpec& s, bool major) {
    json j;
    j["A"] = to_json(s.A);
    auto put = [&](const char* k, const Mat& M) {
        if (M.size() > 0) j[k] = to_json(M);
    };
    put("B", s.B);
    put("D", s.D);
    if (!major) put("G", s.G);
    put("F", s.F);
    put("P", s.P);
    put("R", s.R);
    put("Pbar", s.Pbar);
    if (major) put("H", s.H);
    else {
        put("H1", s.H1);
        put("H2", s.H2);
    }
    return j;
}

void check_dims(const Scenario& s) {
    auto cls = [&](const ModeSpec& M, const std::string& who) {
        if (M.A.rows() != s.n || M.A.cols() != s.n) throw ConfigError(who + ".A must be n x n");
        if (M.B.rows() != s.n || M.B.cols() != s.m) throw ConfigError(who + ".B must be n x m");
        if (M.D.rows() != s.n || M.D.cols() != s.r) throw ConfigError(who + ".D must be n x r");
    };
    cls(s.specs.major[0], "major[1]");
    cls(s.specs.major[1], "major[2]");
    cls(s.specs.minor[0], "minor.a");
    cls(s.specs.minor[1], "minor.b");
    if (s.x0.size() != s.n) throw ConfigError("initial.x0 must have n entries");
    for (int p = 0; p < 2; ++p) {
        if (s.xi_mean[p].size() != s.n) throw ConfigError("initial minor mean must have n entries");
        if (s.xi_cov[p].rows() != s.n || s.xi_cov[p].cols() != s.n)
            throw ConfigError("initial minor covariance must be n x n");
    }
    if (s.runs < 1 || s.nash_runs < 1) throw ConfigError("run counts must be positive");
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    try {
        check_keys(j, "scenario",
                   {"schema_version", "name", "n", "m", "r", "T", "dt", "population", "major", "minor", "initial",
                    "simulation", "solver"},
                   {"schema_version", "n", "m", "r", "T", "dt", "population", "major", "minor", "initial"});
        if (integer(j["schema_version"], "schema_version") != kSchemaVersion)
            throw ConfigError("unsupported schema_version");
        Scenario s;
        if (j.contains("name")) s.name = j["name"].get<std::string>();
        s.n = integer(j["n"], "n");
        s.m = integer(j["m"], "m");
        s.r = integer(j["r"], "r");
        s.T = number(j["T"], "T");
        s.dt = number(j["dt"], "dt");
        if (s.n < 1 || s.m < 1 || s.r < 1) throw ConfigError("dimensions must be positive");
        const json& pop = j["population"];
        check_keys(pop, "population", {"Na", "Nb"}, {"Na", "Nb"});
        s.Na = integer(pop["Na"], "population.Na");
        s.Nb = integer(pop["Nb"], "population.Nb");
        const json& maj = j["major"];
        if (!maj.is_array() || maj.size() != 2) throw ConfigError("major: expected two mode specs");
        s.specs.major[0] = mode_spec(maj[0], "major[1]", true);
        s.specs.major[1] = mode_spec(maj[1], "major[2]", true);
        check_keys(j["minor"], "minor", {"a", "b"}, {"a", "b"});
        s.specs.minor[0] = mode_spec(j["minor"]["a"], "minor.a", false);
        s.specs.minor[1] = mode_spec(j["minor"]["b"], "minor.b", false);
        const json& ini = j["initial"];
        check_keys(ini, "initial", {"x0", "mean_a", "mean_b", "cov_a", "cov_b"}, {"x0", "mean_a", "mean_b"});
        s.x0 = vector(ini["x0"], "initial.x0");
        s.xi_mean[0] = vector(ini["mean_a"], "initial.mean_a");
        s.xi_mean[1] = vector(ini["mean_b"], "initial.mean_b");
        s.xi_cov[0] = ini.contains("cov_a") ? matrix(ini["cov_a"], "initial.cov_a") : Mat::Zero(s.n, s.n);
        s.xi_cov[1] = ini.contains("cov_b") ? matrix(ini["cov_b"], "initial.cov_b") : Mat::Zero(s.n, s.n);
        if (j.contains("simulation")) {
            const json& sim = j["simulation"];
            check_keys(sim, "simulation", {"seed", "runs", "nash_ladder", "nash_runs"});
            if (sim.contains("seed")) s.seed = sim["seed"].get<std::uint64_t>();
            if (sim.contains("runs")) s.runs = integer(sim["runs"], "simulation.runs");
            if (sim.contains("nash_ladder")) s.nash_ladder = sim["nash_ladder"].get<std::vector<int>>();
            if (sim.contains("nash_runs")) s.nash_runs = integer(sim["nash_runs"], "simulation.nash_runs");
        }
        if (j.contains("solver")) {
            const json& so = j["solver"];
            check_keys(so, "solver", {"theta", "tol", "max_iter", "tol_def", "tol_root", "tol_match_steps"});
            if (so.contains("theta")) s.solver.consistency.theta = number(so["theta"], "solver.theta");
            if (so.contains("tol")) s.solver.consistency.tol = number(so["tol"], "solver.tol");
            if (so.contains("max_iter")) s.solver.consistency.max_iter = integer(so["max_iter"], "solver.max_iter");
            if (so.contains("tol_def")) s.solver.tol_def = number(so["tol_def"], "solver.tol_def");
            if (so.contains("tol_root")) s.solver.tol_root = number(so["tol_root"], "solver.tol_root");
            if (so.contains("tol_match_steps"))
                s.solver.tol_match_steps = number(so["tol_match_steps"], "solver.tol_match_steps");
        }
        check_dims(s);
        s.grid();
        s.automaton();  // weight checks
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad scenario: ") + e.what());
    } catch (const DimensionError& e) {
        throw ConfigError(e.what());
    }
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scenario " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

std::string dump_scenario(const Scenario& s) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = s.name;
    j["n"] = s.n;
    j["m"] = s.m;
    j["r"] = s.r;
    j["T"] = s.T;
    j["dt"] = s.dt;
    j["population"] = {{"Na", s.Na}, {"Nb", s.Nb}};
    j["major"] = json::array({to_json(s.specs.major[0], true), to_json(s.specs.major[1], true)});
    j["minor"] = {{"a", to_json(s.specs.minor[0], false)}, {"b", to_json(s.specs.minor[1], false)}};
    j["initial"] = {{"x0", to_json_vec(s.x0)},
                    {"mean_a", to_json_vec(s.xi_mean[0])},
                    {"mean_b", to_json_vec(s.xi_mean[1])},
                    {"cov_a", to_json(s.xi_cov[0])},
                    {"cov_b", to_json(s.xi_cov[1])}};
    j["simulation"] = {{"seed", s.seed}, {"runs", s.runs}, {"nash_ladder", s.nash_ladder}, {"nash_runs", s.nash_runs}};
    j["solver"] = {{"theta", s.solver.consistency.theta},
                   {"tol", s.solver.consistency.tol},
                   {"max_iter", s.solver.consistency.max_iter},
                   {"tol_def", s.solver.tol_def},
                   {"tol_root", s.solver.tol_root},
                   {"tol_match_steps", s.solver.tol_match_steps}};
    return pretty(j);
}

void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << dump_scenario(s);
}

std::string dump_automaton(const Automaton& aut) {
    json j;
    j["n"] = aut.n();
    j["pi"] = {aut.pi().pi_a, aut.pi().pi_b};
    json states = json::array();
    for (Label l : kAllLabels) {
        const auto st = state_of(l);
        states.push_back({{"label", label_name(l)},
                          {"stage", st.stage},
                          {"major_mode", st.major_mode},
                          {"a", st.has(Pop::a)},
                          {"b", st.has(Pop::b)},
                          {"major_dim", aut.major_dim(l)}});
    }
    j["states"] = states;
    json edges = json::array();
    for (const auto& e : aut.edges()) {
        json o = {{"from", label_name(e.from)},
                  {"to", label_name(e.to)},
                  {"event", event_name(e.event)},
                  {"psi_major", to_json(e.psi_major)},
                  {"cost_major", to_json(e.cost_major)}};
        for (Pop p : kPops) {
            if (!state_of(e.from).has(p)) continue;
            o["psi_minor_" + pop_name(p)] = to_json(e.psi_minor[idx(p)]);
            o["cost_minor_" + pop_name(p)] = to_json(e.cost_minor[idx(p)]);
        }
        edges.push_back(o);
    }
    j["edges"] = edges;
    return pretty(j);
}

Scenario paper_sec4_scenario() {
    using Trig = ExpTrigTerm::Trig;
    auto ex = [](double c, double rate, Trig trig = Trig::none, double freq = 0.0) {
        return TimeFunction{{ExpTrigTerm{c, rate, trig, freq}}};
    };
    Scenario s;
    s.name = "paper_sec4";
    s.n = 2;
    s.m = 1;
    s.r = 2;
    s.T = 18.0;
    s.dt = 0.01;
    s.Na = 50;
    s.Nb = 50;
    const Mat I = Mat::Identity(2, 2);

    TimeMatrix A0(2, 2), Aa(2, 2), Ab(2, 2);
    A0.at(0, 0) = ex(2, -1);
    A0.at(0, 1) = ex(1, -1);
    A0.at(1, 0) = ex(1, -0.5);
    A0.at(1, 1) = ex(2, -0.5);
    Aa.at(0, 0) = ex(2, -1);
    Aa.at(0, 1) = ex(1, -0.5);
    Aa.at(1, 0) = ex(1, -0.5);
    Aa.at(1, 1) = ex(2, -1);
    Ab.at(0, 0) = ex(5, -1.5, Trig::cos, 1);
    Ab.at(0, 1) = ex(5, -2);
    Ab.at(1, 0) = ex(5, -2, Trig::sin, 1);
    Ab.at(1, 1) = ex(5, -1.5);

    ModeSpec major;
    major.A = A0;
    major.B = (Mat(2, 1) << 0.1, 0.1).finished();
    major.D = 0.015 * I;
    major.F = 0.1 * I;
    major.P = I;
    major.R = Mat::Identity(1, 1);
    major.Pbar = I;
    major.H = 0.6 * I;
    s.specs.major = {major, major};

    ModeSpec a;
    a.A = Aa;
    a.B = (Mat(2, 1) << 1.0, 0.1).finished();
    a.D = 0.05 * I;
    a.G = Mat::Zero(2, 2);
    a.F = 0.1 * I;
    a.P = I;
    a.R = Mat::Identity(1, 1);
    a.Pbar = I;
    a.H1 = 0.2 * I;
    a.H2 = 0.02 * I;
    ModeSpec b = a;
    b.A = Ab;
    b.B = (Mat(2, 1) << 0.0, 0.1).finished();
    s.specs.minor = {a, b};

    s.x0 = (Vec(2) << 1.0, -1.0).finished();
    s.xi_mean[0] = (Vec(2) << 2.0, 1.0).finished();
    s.xi_mean[1] = (Vec(2) << -1.0, 2.0).finished();
    s.xi_cov = {0.25 * I, 0.25 * I};
    s.seed = 2024;
    s.runs = 10;
    return s;
}

Scenario zero_coupling_scenario(int n, double T, double dt) {
    Scenario s;
    s.name = "zero_coupling";
    s.n = n;
    s.m = 1;
    s.r = n;
    s.T = T;
    s.dt = dt;
    const Mat I = Mat::Identity(n, n);
    Mat B = Mat::Constant(n, 1, 0.5);
    B(0, 0) = 1.0;
    ModeSpec major;
    major.A = TimeMatrix(Mat(-0.5 * I));
    major.B = B;
    major.D = 0.02 * I;
    major.P = I;
    major.R = Mat::Identity(1, 1);
    major.Pbar = I;
    s.specs.major = {major, major};
    ModeSpec a;
    a.A = TimeMatrix(Mat(-0.3 * I));
    a.B = B;
    a.D = 0.05 * I;
    a.P = I;
    a.R = Mat::Identity(1, 1);
    a.Pbar = I;
    ModeSpec b = a;
    b.A = TimeMatrix(Mat(0.2 * I));
    b.P = 2.0 * I;
    s.specs.minor = {a, b};
    s.x0 = Vec::Ones(n);
    s.xi_mean = {Vec::Constant(n, 0.5), Vec::Constant(n, -0.5)};
    s.xi_cov = {0.1 * I, 0.1 * I};
    return s;
}

}  // namespace hmfg
