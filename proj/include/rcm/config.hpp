#pragma once

// Flat text configuration for the experiment runner.
//
// Format: one "key = value" per line, '#' starts a comment, blank lines are
// skipped, and a "[section]" header prefixes the keys that follow with
// "section." (one level only, so "[clt]" + "paths = 100" means "clt.paths").
// Dotted keys may also be written inline. Values are numbers, booleans
// (true/false), names, or comma-separated lists.
//
// Parsing is strict and total: every violation in the file is collected and
// reported at once (unknown key, duplicate key, malformed number, value out
// of its documented range, parameter that does not belong to the chosen
// experiment or law). A config that parses cleanly is fully populated with
// documented defaults for everything it left unset.
//
// canonical() re-serializes the scientific content (everything that affects
// produced numbers: experiment, lattice, law, seeds, per-experiment knobs)
// as sorted "key = value" lines with round-trip number formatting. The hash
// of that text identifies the experiment; output directory, thread count,
// and the deterministic flag are operational and deliberately excluded, so
// re-running a record elsewhere or with a different thread count still
// matches its hash.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "rcm/lattice.hpp"
#include "rcm/law.hpp"

namespace rcm {

enum class ExperimentKind { percolation, corrector, clt, heatkernel, nash, distances };

inline const char* experiment_name(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::percolation: return "percolation";
    case ExperimentKind::corrector: return "corrector";
    case ExperimentKind::clt: return "clt";
    case ExperimentKind::heatkernel: return "heatkernel";
    case ExperimentKind::nash: return "nash";
    case ExperimentKind::distances: return "distances";
    }
    return "?";
}

inline bool experiment_from_name(const std::string& s, ExperimentKind& out) {
    for (ExperimentKind k :
         {ExperimentKind::percolation, ExperimentKind::corrector, ExperimentKind::clt,
          ExperimentKind::heatkernel, ExperimentKind::nash, ExperimentKind::distances}) {
        if (s == experiment_name(k)) {
            out = k;
            return true;
        }
    }
    return false;
}

struct ConfigError : std::runtime_error {
    std::vector<std::string> violations;

    explicit ConfigError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}

    static std::string join(const std::vector<std::string>& v) {
        std::string m = "config: " + std::to_string(v.size()) +
                        (v.size() == 1 ? " violation:" : " violations:");
        for (const std::string& s : v) m += "\n  - " + s;
        return m;
    }
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::percolation;

    // Lattice, law, and seeding, shared by every experiment.
    int dim = 2;
    int side = 16;
    Boundary boundary = Boundary::periodic;
    ConductanceLaw law = ConductanceLaw::constant(1.0);
    double alpha = 0.5;       // strong-edge threshold
    std::uint64_t seed = 1;   // base seed; environment k draws with seed + 1 + k
    std::int64_t envs = 1;    // independent environments
    bool dump_field = false;  // write environment 0 as field.bin

    // Operational knobs, recorded but excluded from the config hash.
    std::string out = "out";
    int threads = 1;
    bool deterministic = false;

    // percolation
    bool dump_labeling = true; // write environment 0's strong labeling table

    // corrector (the clt experiment shares the solver knobs)
    double tolerance = 1e-8;
    std::int64_t max_iterations = 50000;
    std::vector<double> eps = {0.05, 0.1, 0.2};

    // clt
    std::string clt_mode = "quenched"; // or "annealed"
    std::int64_t paths = 1000;
    std::int64_t steps = 1000;
    std::vector<double> grid = {0.5, 1.0};

    // heatkernel
    std::vector<std::int64_t> times = {100, 300, 1000};
    std::int64_t samples = 100000;

    // nash
    double t_min = 0.5;
    double t_max = 8.0;
    int points = 9;

    // distances
    double rho = 0.1;
    int min_abs = 1;
    int max_abs = 0; // 0 means the half-box cap side / 4

    std::vector<std::pair<std::string, std::string>> canonical() const;
    std::string canonical_text() const;
    std::string hash() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline bool parse_double_token(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

inline bool parse_int_token(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

inline bool parse_u64_token(const std::string& s, std::uint64_t& out) {
    if (s.empty() || s[0] == '-') return false;
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = s.find(',', start);
        parts.push_back(trim(s.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return parts;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Every key the parser knows, used to tell "unknown key" apart from "known
// key that does not belong to this experiment or law".
inline const std::set<std::string>& all_config_keys() {
    static const std::set<std::string> keys = {
        "experiment", "dim", "side", "boundary", "alpha", "seed", "envs", "dump_field",
        "out", "threads", "deterministic",
        "law.kind", "law.c", "law.p", "law.gamma", "law.p_strong", "law.p_weak", "law.alpha",
        "percolation.dump_labeling",
        "corrector.tolerance", "corrector.max_iterations", "corrector.eps",
        "clt.mode", "clt.paths", "clt.steps", "clt.grid",
        "heatkernel.times", "heatkernel.samples",
        "nash.t_min", "nash.t_max", "nash.points",
        "distances.rho", "distances.min_abs", "distances.max_abs"};
    return keys;
}

} // namespace detail

// Parses config text. cli_experiment, when nonempty, supplies or cross-checks
// the experiment key (the command line names the experiment positionally and
// the file may repeat it, but they must agree). Throws ConfigError carrying
// every violation found.
inline ExperimentConfig parse_config(const std::string& text,
                                     const std::string& cli_experiment = "") {
    using detail::trim;
    std::vector<std::string> bad;

    struct RawEntry {
        std::string value;
        int line = 0;
        bool used = false;
    };
    std::map<std::string, RawEntry> raw;

    // Pass 1: lines to (key, value) entries.
    {
        std::istringstream is(text);
        std::string line;
        std::string prefix;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            std::size_t hash_pos = line.find('#');
            if (hash_pos != std::string::npos) line.resize(hash_pos);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']' || line.size() < 3) {
                    bad.push_back("line " + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
                    continue;
                }
                std::string name = trim(line.substr(1, line.size() - 2));
                if (name.empty() || name.find('.') != std::string::npos) {
                    bad.push_back("line " + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
                    continue;
                }
                prefix = name + ".";
                continue;
            }
            std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                bad.push_back("line " + std::to_string(line_no) + ": expected key = value, got '" +
                              line + "'");
                continue;
            }
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                bad.push_back("line " + std::to_string(line_no) + ": empty key");
                continue;
            }
            if (value.empty()) {
                bad.push_back("line " + std::to_string(line_no) + ": empty value for key '" +
                              key + "'");
                continue;
            }
            std::string full = key.find('.') != std::string::npos ? key : prefix + key;
            auto [it, inserted] = raw.emplace(full, RawEntry{value, line_no});
            if (!inserted)
                bad.push_back("duplicate key '" + full + "' (lines " +
                              std::to_string(it->second.line) + " and " +
                              std::to_string(line_no) + "), refusing to pick one");
        }
    }

    ExperimentConfig cfg;

    auto take = [&](const std::string& key) -> RawEntry* {
        auto it = raw.find(key);
        if (it == raw.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    };
    auto take_string = [&](const char* key, std::string& out) {
        if (RawEntry* e = take(key)) out = e->value;
    };
    auto take_bool = [&](const char* key, bool& out) {
        RawEntry* e = take(key);
        if (!e) return;
        if (e->value == "true") out = true;
        else if (e->value == "false") out = false;
        else bad.push_back(std::string(key) + ": expected true or false, got '" + e->value + "'");
    };
    auto take_int = [&](const char* key, std::int64_t lo, std::int64_t hi, auto& out) {
        RawEntry* e = take(key);
        if (!e) return;
        std::int64_t v = 0;
        if (!detail::parse_int_token(e->value, v)) {
            bad.push_back(std::string(key) + ": not an integer, got '" + e->value + "'");
            return;
        }
        if (v < lo || v > hi) {
            bad.push_back(std::string(key) + ": must lie in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "], got " + e->value);
            return;
        }
        out = static_cast<std::decay_t<decltype(out)>>(v);
    };
    auto take_double = [&](const char* key, double& out, const std::function<bool(double)>& ok,
                           const char* range) {
        RawEntry* e = take(key);
        if (!e) return;
        double v = 0;
        if (!detail::parse_double_token(e->value, v)) {
            bad.push_back(std::string(key) + ": not a number, got '" + e->value + "'");
            return;
        }
        if (!ok(v)) {
            bad.push_back(std::string(key) + ": must lie in " + range + ", got " + e->value);
            return;
        }
        out = v;
    };
    auto take_double_list = [&](const char* key, std::vector<double>& out,
                                const std::function<bool(double)>& ok, const char* range) {
        RawEntry* e = take(key);
        if (!e) return;
        std::vector<double> vals;
        for (const std::string& tok : detail::split_list(e->value)) {
            double v = 0;
            if (!detail::parse_double_token(tok, v)) {
                bad.push_back(std::string(key) + ": not a number in list, got '" + tok + "'");
                return;
            }
            if (!ok(v)) {
                bad.push_back(std::string(key) + ": list values must lie in " + range + ", got " +
                              tok);
                return;
            }
            vals.push_back(v);
        }
        out = std::move(vals);
    };
    auto take_int_list = [&](const char* key, std::vector<std::int64_t>& out, std::int64_t lo,
                             std::int64_t hi) {
        RawEntry* e = take(key);
        if (!e) return;
        std::vector<std::int64_t> vals;
        for (const std::string& tok : detail::split_list(e->value)) {
            std::int64_t v = 0;
            if (!detail::parse_int_token(tok, v)) {
                bad.push_back(std::string(key) + ": not an integer in list, got '" + tok + "'");
                return;
            }
            if (v < lo || v > hi) {
                bad.push_back(std::string(key) + ": list values must lie in [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "], got " + tok);
                return;
            }
            vals.push_back(v);
        }
        out = std::move(vals);
    };

    // Experiment first: it scopes which other keys are admissible.
    bool experiment_known = false;
    {
        std::string exp_str = cli_experiment;
        if (RawEntry* e = take("experiment")) {
            if (!cli_experiment.empty() && e->value != cli_experiment)
                bad.push_back("experiment: config file says '" + e->value +
                              "' but the command line says '" + cli_experiment + "'");
            exp_str = e->value;
        }
        if (exp_str.empty()) {
            bad.push_back("missing required key: experiment");
        } else if (!experiment_from_name(exp_str, cfg.experiment)) {
            bad.push_back(
                "experiment: unknown experiment '" + exp_str +
                "' (one of percolation, corrector, clt, heatkernel, nash, distances)");
        } else {
            experiment_known = true;
        }
    }

    // Shared keys.
    take_int("dim", 1, BoxLattice::max_dim, cfg.dim);
    take_int("side", 2, 65536, cfg.side);
    if (RawEntry* e = take("boundary")) {
        if (e->value == "periodic") cfg.boundary = Boundary::periodic;
        else if (e->value == "free") cfg.boundary = Boundary::free_box;
        else bad.push_back("boundary: expected periodic or free, got '" + e->value + "'");
    }
    take_double("alpha", cfg.alpha, [](double v) { return v > 0.0 && v < 1.0; }, "(0, 1)");
    if (RawEntry* e = take("seed")) {
        if (!detail::parse_u64_token(e->value, cfg.seed))
            bad.push_back("seed: not an unsigned integer, got '" + e->value + "'");
    }
    take_int("envs", 1, 1000000, cfg.envs);
    take_bool("dump_field", cfg.dump_field);
    take_string("out", cfg.out);
    take_int("threads", 1, 1024, cfg.threads);
    take_bool("deterministic", cfg.deterministic);

    // Law: the kind decides which parameter keys belong.
    {
        std::string kind_str = "constant";
        take_string("law.kind", kind_str);
        double c = 1.0, p = 0.5, gamma = 2.0, p_strong = 0.7, p_weak = 0.2;
        double band = cfg.alpha; // mixture band split defaults to the strong threshold
        bool kind_ok = true;
        ConductanceLaw::Kind kind = ConductanceLaw::Kind::constant;
        try {
            kind = ConductanceLaw::kind_from_name(kind_str);
        } catch (const std::invalid_argument&) {
            bad.push_back("law.kind: unknown conductance law '" + kind_str +
                          "' (one of constant, bernoulli, uniform_open, heavy_tail, mixture)");
            kind_ok = false;
        }
        if (kind_ok) {
            auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
            switch (kind) {
            case ConductanceLaw::Kind::constant:
                take_double("law.c", c, in_unit, "[0, 1]");
                cfg.law = ConductanceLaw::constant(c);
                break;
            case ConductanceLaw::Kind::bernoulli:
                take_double("law.p", p, in_unit, "[0, 1]");
                cfg.law = ConductanceLaw::bernoulli(p);
                break;
            case ConductanceLaw::Kind::uniform_open:
                cfg.law = ConductanceLaw::uniform_open();
                break;
            case ConductanceLaw::Kind::heavy_tail:
                take_double("law.gamma", gamma, [](double v) { return v > 0.0; }, "(0, inf)");
                cfg.law = ConductanceLaw::heavy_tail(gamma);
                break;
            case ConductanceLaw::Kind::mixture:
                take_double("law.p_strong", p_strong, in_unit, "[0, 1]");
                take_double("law.p_weak", p_weak, in_unit, "[0, 1]");
                take_double("law.alpha", band, [](double v) { return v > 0.0 && v < 1.0; },
                            "(0, 1)");
                if (p_strong + p_weak > 1.0) {
                    bad.push_back("law.p_strong + law.p_weak: must not exceed 1, got " +
                                  detail::fmt_double(p_strong + p_weak));
                } else {
                    cfg.law = ConductanceLaw::mixture(p_strong, p_weak, band);
                }
                break;
            }
        }
    }

    // Per-experiment keys. Solver knobs are shared by corrector and clt.
    const bool wants_solver = experiment_known && (cfg.experiment == ExperimentKind::corrector ||
                                                   cfg.experiment == ExperimentKind::clt);
    if (!experiment_known || wants_solver) {
        take_double("corrector.tolerance", cfg.tolerance,
                    [](double v) { return v > 0.0 && v <= 1e-2; }, "(0, 1e-2]");
        take_int("corrector.max_iterations", 1, 100000000, cfg.max_iterations);
    }
    if (!experiment_known || cfg.experiment == ExperimentKind::percolation)
        take_bool("percolation.dump_labeling", cfg.dump_labeling);
    if (!experiment_known || cfg.experiment == ExperimentKind::corrector)
        take_double_list("corrector.eps", cfg.eps, [](double v) { return v > 0.0 && v < 1.0; },
                         "(0, 1)");
    if (!experiment_known || cfg.experiment == ExperimentKind::clt) {
        if (RawEntry* e = take("clt.mode")) {
            if (e->value == "quenched" || e->value == "annealed") cfg.clt_mode = e->value;
            else bad.push_back("clt.mode: expected quenched or annealed, got '" + e->value + "'");
        }
        take_int("clt.paths", 1, 100000000, cfg.paths);
        take_int("clt.steps", 1, 100000000, cfg.steps);
        take_double_list("clt.grid", cfg.grid, [](double v) { return v >= 0.0 && v <= 1.0; },
                         "[0, 1]");
        if (cfg.grid.empty()) bad.push_back("clt.grid: list must not be empty");
    }
    if (!experiment_known || cfg.experiment == ExperimentKind::heatkernel) {
        take_int_list("heatkernel.times", cfg.times, 1, 100000000);
        if (cfg.times.empty()) bad.push_back("heatkernel.times: list must not be empty");
        take_int("heatkernel.samples", 100, 1000000000, cfg.samples);
    }
    if (!experiment_known || cfg.experiment == ExperimentKind::nash) {
        take_double("nash.t_min", cfg.t_min, [](double v) { return v > 0.0; }, "(0, inf)");
        take_double("nash.t_max", cfg.t_max, [](double v) { return v > 0.0 && v <= 256.0; },
                    "(0, 256] (exact heat curves overflow past that)");
        take_int("nash.points", 3, 4096, cfg.points);
        if (cfg.t_max <= cfg.t_min)
            bad.push_back("nash.t_max: must exceed nash.t_min, got " +
                          detail::fmt_double(cfg.t_max) + " <= " + detail::fmt_double(cfg.t_min));
    }
    if (!experiment_known || cfg.experiment == ExperimentKind::distances) {
        take_double("distances.rho", cfg.rho, [](double v) { return v > 0.0 && v <= 1.0; },
                    "(0, 1]");
        take_int("distances.min_abs", 1, 65536, cfg.min_abs);
        take_int("distances.max_abs", 0, 65536, cfg.max_abs);
    }

    // Cross-field checks that need several keys settled.
    if (experiment_known &&
        (cfg.experiment == ExperimentKind::corrector || cfg.experiment == ExperimentKind::clt) &&
        cfg.boundary != Boundary::periodic)
        bad.push_back(std::string("boundary: the ") + experiment_name(cfg.experiment) +
                      " experiment needs periodic (the corrector solve lives on the torus)");
    if (experiment_known && cfg.experiment == ExperimentKind::nash) {
        double n_sites = std::pow(static_cast<double>(cfg.side), cfg.dim);
        if (n_sites > 2000.0)
            bad.push_back("side: nash needs side^dim <= 2000 for exact kernel curves, got " +
                          detail::fmt_double(n_sites));
    }
    if (experiment_known && cfg.experiment == ExperimentKind::distances) {
        const int cap = cfg.max_abs > 0 ? cfg.max_abs : cfg.side / 4;
        if (cfg.boundary == Boundary::periodic && cfg.max_abs > cfg.side / 2)
            bad.push_back("distances.max_abs: exceeds half the torus side " +
                          std::to_string(cfg.side));
        else if (cap < cfg.min_abs)
            bad.push_back("distances.min_abs: side " + std::to_string(cfg.side) +
                          " leaves no annulus between min_abs and the half-box cap");
    }

    // Leftovers: known keys out of scope, or typos.
    for (const auto& [key, entry] : raw) {
        if (entry.used) continue;
        if (detail::all_config_keys().count(key)) {
            if (key.rfind("law.", 0) == 0)
                bad.push_back(key + ": not a parameter of law " +
                              ConductanceLaw::kind_name(cfg.law.kind) + " (line " +
                              std::to_string(entry.line) + ")");
            else
                bad.push_back(key + ": not a parameter of experiment " +
                              std::string(experiment_name(cfg.experiment)) + " (line " +
                              std::to_string(entry.line) + ")");
        } else {
            bad.push_back("unknown key '" + key + "' (line " + std::to_string(entry.line) + ")");
        }
    }

    if (cfg.deterministic) cfg.threads = 1;
    if (!bad.empty()) throw ConfigError(std::move(bad));
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path,
                                          const std::string& cli_experiment = "") {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str(), cli_experiment);
}

inline std::vector<std::pair<std::string, std::string>> ExperimentConfig::canonical() const {
    using detail::fmt_double;
    std::vector<std::pair<std::string, std::string>> kv;
    auto put = [&](const char* k, std::string v) { kv.emplace_back(k, std::move(v)); };
    auto put_list = [&](const char* k, const std::vector<double>& vals) {
        std::string s;
        for (std::size_t i = 0; i < vals.size(); ++i)
            s += (i ? "," : "") + fmt_double(vals[i]);
        kv.emplace_back(k, std::move(s));
    };

    put("experiment", experiment_name(experiment));
    put("dim", std::to_string(dim));
    put("side", std::to_string(side));
    put("boundary", boundary == Boundary::periodic ? "periodic" : "free");
    put("alpha", fmt_double(alpha));
    put("seed", std::to_string(seed));
    put("envs", std::to_string(envs));
    put("dump_field", dump_field ? "true" : "false");

    put("law.kind", ConductanceLaw::kind_name(law.kind));
    switch (law.kind) {
    case ConductanceLaw::Kind::constant: put("law.c", fmt_double(law.a)); break;
    case ConductanceLaw::Kind::bernoulli: put("law.p", fmt_double(law.a)); break;
    case ConductanceLaw::Kind::uniform_open: break;
    case ConductanceLaw::Kind::heavy_tail: put("law.gamma", fmt_double(law.a)); break;
    case ConductanceLaw::Kind::mixture:
        put("law.p_strong", fmt_double(law.a));
        put("law.p_weak", fmt_double(law.b));
        put("law.alpha", fmt_double(law.alpha));
        break;
    }

    switch (experiment) {
    case ExperimentKind::percolation:
        put("percolation.dump_labeling", dump_labeling ? "true" : "false");
        break;
    case ExperimentKind::corrector:
        put("corrector.tolerance", fmt_double(tolerance));
        put("corrector.max_iterations", std::to_string(max_iterations));
        put_list("corrector.eps", eps);
        break;
    case ExperimentKind::clt: {
        put("corrector.tolerance", fmt_double(tolerance));
        put("corrector.max_iterations", std::to_string(max_iterations));
        put("clt.mode", clt_mode);
        put("clt.paths", std::to_string(paths));
        put("clt.steps", std::to_string(steps));
        put_list("clt.grid", grid);
        break;
    }
    case ExperimentKind::heatkernel: {
        std::string s;
        for (std::size_t i = 0; i < times.size(); ++i)
            s += (i ? "," : "") + std::to_string(times[i]);
        put("heatkernel.times", std::move(s));
        put("heatkernel.samples", std::to_string(samples));
        break;
    }
    case ExperimentKind::nash:
        put("nash.t_min", fmt_double(t_min));
        put("nash.t_max", fmt_double(t_max));
        put("nash.points", std::to_string(points));
        break;
    case ExperimentKind::distances:
        put("distances.rho", fmt_double(rho));
        put("distances.min_abs", std::to_string(min_abs));
        put("distances.max_abs", std::to_string(max_abs));
        break;
    }

    std::sort(kv.begin(), kv.end());
    return kv;
}

inline std::string ExperimentConfig::canonical_text() const {
    std::string text;
    for (const auto& [k, v] : canonical()) text += k + " = " + v + "\n";
    return text;
}

inline std::string ExperimentConfig::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canonical_text())));
    return buf;
}

} // namespace rcm
