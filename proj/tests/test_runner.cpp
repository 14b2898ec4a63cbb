// Config parsing and validation, CSV round trips, the parallel index pool,
// experiment runs end to end (records, outputs, append-only discipline), and
// replay comparisons including deliberate tampering.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/config.hpp"
#include "rcm/csv.hpp"
#include "rcm/parallel.hpp"
#include "rcm/runner.hpp"

namespace fs = std::filesystem;
using rcm::ConfigError;
using rcm::ExperimentConfig;
using rcm::ExperimentKind;

namespace {

// Fresh scratch directory per test, cleaned of earlier leftovers.
fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "rcm_runner_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p);
    os << s;
}

std::string read_text(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

bool has_violation(const ConfigError& e, const std::string& needle) {
    for (const std::string& v : e.violations)
        if (v.find(needle) != std::string::npos) return true;
    return false;
}

std::string joined(const std::vector<std::string>& lines) {
    std::string out;
    for (const std::string& s : lines) out += s + "\n";
    return out;
}

} // namespace

TEST_CASE("minimal config parses with documented defaults", "[runner]") {
    auto cfg = rcm::parse_config("experiment = percolation\n");
    CHECK(cfg.experiment == ExperimentKind::percolation);
    CHECK(cfg.dim == 2);
    CHECK(cfg.side == 16);
    CHECK(cfg.boundary == rcm::Boundary::periodic);
    CHECK(cfg.law.kind == rcm::ConductanceLaw::Kind::constant);
    CHECK(cfg.law.a == 1.0);
    CHECK(cfg.alpha == 0.5);
    CHECK(cfg.seed == 1);
    CHECK(cfg.envs == 1);
    CHECK(cfg.threads == 1);
    CHECK_FALSE(cfg.deterministic);
    CHECK(cfg.dump_labeling);

    // The command line can supply the experiment instead of the file.
    auto cfg2 = rcm::parse_config("side = 32\n", "corrector");
    CHECK(cfg2.experiment == ExperimentKind::corrector);
    CHECK(cfg2.side == 32);
    CHECK(cfg2.tolerance == 1e-8);
}

TEST_CASE("config sections, comments, and lists", "[runner]") {
    const std::string text = "# comment line\n"
                             "experiment = clt   # trailing comment\n"
                             "side = 8\n"
                             "law.kind = mixture\n"
                             "law.p_strong = 0.8\n"
                             "law.p_weak = 0.1\n"
                             "\n"
                             "[clt]\n"
                             "paths = 50\n"
                             "grid = 0.25, 0.5, 1.0\n"
                             "[corrector]\n"
                             "tolerance = 1e-9\n";
    auto cfg = rcm::parse_config(text);
    CHECK(cfg.experiment == ExperimentKind::clt);
    CHECK(cfg.law.kind == rcm::ConductanceLaw::Kind::mixture);
    CHECK(cfg.law.a == 0.8);
    CHECK(cfg.law.b == 0.1);
    CHECK(cfg.law.alpha == 0.5); // mixture band defaults to the strong threshold
    CHECK(cfg.paths == 50);
    REQUIRE(cfg.grid.size() == 3);
    CHECK(cfg.grid[1] == 0.5);
    CHECK(cfg.tolerance == 1e-9);

    // deterministic = true forces a single-threaded run.
    auto det = rcm::parse_config("experiment = percolation\nthreads = 8\ndeterministic = true\n");
    CHECK(det.threads == 1);
}

TEST_CASE("config errors are collected, not reported one at a time", "[runner]") {
    const std::string text = "experiment = percolation\n"
                             "alpha = 1.5\n"
                             "side = nope\n"
                             "clt.paths = 5\n"
                             "law.p = 0.3\n"
                             "typo_key = 1\n"
                             "envs = 2\n"
                             "envs = 3\n";
    try {
        rcm::parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.violations.size() == 6);
        CHECK(has_violation(e, "alpha: must lie in (0, 1)"));
        CHECK(has_violation(e, "side: not an integer"));
        CHECK(has_violation(e, "clt.paths: not a parameter of experiment percolation"));
        CHECK(has_violation(e, "law.p: not a parameter of law constant"));
        CHECK(has_violation(e, "unknown key 'typo_key'"));
        CHECK(has_violation(e, "duplicate key 'envs'"));
        // Both problems of the duplicate pair land in one message.
        CHECK(std::string(e.what()).find("refusing to pick one") != std::string::npos);
    }
}

TEST_CASE("config rejects unknown experiments and disagreements", "[runner]") {
    CHECK_THROWS_AS(rcm::parse_config("experiment = osmosis\n"), ConfigError);
    CHECK_THROWS_AS(rcm::parse_config("side = 8\n"), ConfigError); // no experiment anywhere
    try {
        rcm::parse_config("experiment = clt\n", "percolation");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has_violation(e, "config file says 'clt' but the command line says 'percolation'"));
    }
    // A clt run with zero paths is a validation error before any compute.
    try {
        rcm::parse_config("experiment = clt\nclt.paths = 0\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has_violation(e, "clt.paths: must lie in [1,"));
    }
    // The corrector solve needs the torus.
    CHECK_THROWS_AS(rcm::parse_config("experiment = corrector\nboundary = free\n"), ConfigError);
    // Exact smoothing curves cap the graph size.
    CHECK_THROWS_AS(rcm::parse_config("experiment = nash\nside = 64\n"), ConfigError);
}

TEST_CASE("canonical config round-trips and hashes stably", "[runner]") {
    const std::string messy = "# heat kernel sweep\n"
                              "experiment = heatkernel\n"
                              "seed = 42\n"
                              "law.kind = bernoulli\n"
                              "law.p = 0.8\n"
                              "threads = 4\n"
                              "out = somewhere/else\n"
                              "[heatkernel]\n"
                              "times = 10, 30\n"
                              "samples = 5000\n";
    auto cfg = rcm::parse_config(messy);
    auto again = rcm::parse_config(cfg.canonical_text());
    CHECK(again.hash() == cfg.hash());
    CHECK(again.canonical_text() == cfg.canonical_text());

    // Operational knobs stay out of the hash; scientific ones land in it.
    auto moved = rcm::parse_config("deterministic = true\n" + messy);
    CHECK(moved.hash() == cfg.hash());
    auto reseeded = cfg;
    reseeded.seed = 43;
    CHECK(reseeded.hash() != cfg.hash());
}

TEST_CASE("csv tables round-trip exactly", "[runner]") {
    rcm::CsvTable t;
    t.header = {"name", "value", "count"};
    auto& r1 = t.add_row();
    r1 = {"a", rcm::csv_num(1.0 / 3.0), rcm::csv_num(std::int64_t(7))};
    auto& r2 = t.add_row();
    r2 = {"b", rcm::csv_num(-0.0), rcm::csv_num(std::int64_t(-1))};

    std::ostringstream os;
    rcm::write_csv(os, t);
    std::istringstream is(os.str());
    auto back = rcm::read_csv(is);
    CHECK(back.header == t.header);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0] == t.rows[0]);
    CHECK(back.rows[1] == t.rows[1]);
    CHECK(back.column("count") == 2);
    CHECK(back.column("absent") == -1);

    rcm::CsvTable ragged;
    ragged.header = {"a", "b"};
    ragged.add_row().push_back("only");
    std::ostringstream sink;
    CHECK_THROWS_AS(rcm::write_csv(sink, ragged), std::invalid_argument);
    std::istringstream badrow("a,b\n1,2,3\n");
    CHECK_THROWS_AS(rcm::read_csv(badrow), std::runtime_error);
}

TEST_CASE("index pool matches serial execution and propagates errors", "[runner]") {
    std::vector<std::int64_t> serial(100, 0), pooled(100, 0);
    rcm::run_indexed(100, 1, [&](std::int64_t i) { serial[i] = i * i; });
    rcm::run_indexed(100, 4, [&](std::int64_t i) { pooled[i] = i * i; });
    CHECK(pooled == serial);

    CHECK_THROWS_WITH(rcm::run_indexed(50, 4,
                                       [&](std::int64_t i) {
                                           if (i == 17) throw std::runtime_error("job 17 broke");
                                       }),
                      "job 17 broke");
    rcm::run_indexed(0, 4, [&](std::int64_t) { FAIL("no jobs expected"); });
}

TEST_CASE("corrector experiment produces a record, tables, and diagnostics", "[runner]") {
    fs::path od = scratch_dir("corrector_run");
    auto cfg = rcm::parse_config("experiment = corrector\n"
                                 "side = 8\n"
                                 "envs = 2\n"
                                 "seed = 5\n"
                                 "dump_field = true\n");
    cfg.out = (od / "a").string();
    auto rec = rcm::run_experiment(cfg);
    INFO(joined(rec.invariant_failures));
    CHECK(rec.ok());
    CHECK(rec.config_hash == cfg.hash());
    CHECK(fs::exists(od / "a" / "record.json"));
    CHECK(fs::exists(od / "a" / "corrector_field.csv"));
    CHECK(fs::exists(od / "a" / "diagnostics.json"));
    CHECK(fs::exists(od / "a" / "field.bin"));

    // Constant conductances make the corrector vanish identically.
    auto chi = rcm::read_csv((od / "a" / "corrector_field.csv").string());
    REQUIRE(chi.rows.size() == 64);
    for (const auto& row : chi.rows) {
        CHECK(std::abs(std::stod(row[1])) <= 1e-8);
        CHECK(std::abs(std::stod(row[2])) <= 1e-8);
    }
    auto diag = nlohmann::json::parse(read_text(od / "a" / "diagnostics.json"));
    REQUIRE(diag.at("environments").size() == 2);
    CHECK(diag.at("environments")[0].at("achieved").get<double>() <= 1e-8);
    // Energy of the full harmonic coordinates: one per edge at unit weight.
    CHECK(diag.at("environments")[0].at("dirichlet_energy").get<double>() ==
          Catch::Approx(128.0).margin(1e-9));

    // Same config into a fresh directory: identical hash, identical tables.
    cfg.out = (od / "b").string();
    auto rec2 = rcm::run_experiment(cfg);
    CHECK(rec2.config_hash == rec.config_hash);
    CHECK(read_text(od / "b" / "corrector_field.csv") ==
          read_text(od / "a" / "corrector_field.csv"));
    CHECK(read_text(od / "b" / "diagnostics.json") == read_text(od / "a" / "diagnostics.json"));

    // Records are append-only: running into a used directory refuses.
    cfg.out = (od / "a").string();
    CHECK_THROWS_WITH(rcm::run_experiment(cfg),
                      Catch::Matchers::ContainsSubstring("append-only"));
}

TEST_CASE("percolation experiment writes a monotone tail and a labeling", "[runner]") {
    fs::path od = scratch_dir("percolation_run");
    auto cfg = rcm::parse_config("experiment = percolation\n"
                                 "side = 16\n"
                                 "envs = 3\n"
                                 "seed = 11\n"
                                 "law.kind = mixture\n"
                                 "law.p_strong = 0.6\n"
                                 "law.p_weak = 0.3\n");
    cfg.out = (od / "run").string();
    auto rec = rcm::run_experiment(cfg);
    CHECK(rec.ok());

    auto tail = rcm::read_csv((od / "run" / "hole_diameter_tail.csv").string());
    REQUIRE(tail.header == std::vector<std::string>{"n", "tail_prob", "count"});
    REQUIRE(!tail.rows.empty());
    double prev = 1.0;
    for (const auto& row : tail.rows) {
        double p = std::stod(row[1]);
        CHECK(p <= prev + 1e-15);
        CHECK(p >= 0.0);
        prev = p;
    }
    auto lab = rcm::read_csv((od / "run" / "strong_labeling.csv").string());
    CHECK(lab.rows.size() == 256);
    CHECK(rec.summary.at("environments").get<std::int64_t>() == 3);
}

TEST_CASE("clt experiment records exact versus sampled diffusion", "[runner]") {
    fs::path od = scratch_dir("clt_run");
    auto cfg = rcm::parse_config("experiment = clt\n"
                                 "side = 8\n"
                                 "seed = 3\n"
                                 "clt.paths = 400\n"
                                 "clt.steps = 64\n"
                                 "clt.grid = 0.5, 1.0\n");
    cfg.out = (od / "run").string();
    auto rec = rcm::run_experiment(cfg);
    INFO(joined(rec.invariant_failures));
    CHECK(rec.ok());

    auto stats = rcm::read_csv((od / "run" / "statistics.csv").string());
    REQUIRE(stats.header ==
            std::vector<std::string>{"statistic", "value", "std_error", "n_samples"});
    bool saw_exact = false, saw_mc = false, saw_defect = false;
    for (const auto& row : stats.rows) {
        if (row[0] == "env0.d_exact_00") {
            saw_exact = true;
            CHECK(std::stod(row[1]) == Catch::Approx(0.5).margin(1e-9)); // constant law, d = 2
        }
        if (row[0] == "env0.d_mc_00") saw_mc = true;
        if (row[0] == "env0.identity_defect") {
            saw_defect = true;
            CHECK(std::stod(row[1]) <= 1e-10);
        }
    }
    CHECK(saw_exact);
    CHECK(saw_mc);
    CHECK(saw_defect);
    CHECK(rec.summary.at("isotropy_checked").get<bool>() == false); // 400 < 1000 paths

    auto manifest = nlohmann::json::parse(read_text(od / "run" / "manifest.json"));
    CHECK(manifest.at("mode") == "quenched");
    CHECK(manifest.at("field_seeds")[0].get<std::uint64_t>() == 4); // seed + 1 + 0
    CHECK(manifest.at("walk_seeds")[0].get<std::uint64_t>() == 5);  // seed + envs + 1 + 0
}

TEST_CASE("annealed clt experiment walks one environment per path", "[runner]") {
    fs::path od = scratch_dir("clt_annealed");
    auto cfg = rcm::parse_config("experiment = clt\n"
                                 "side = 6\n"
                                 "seed = 21\n"
                                 "law.kind = uniform_open\n"
                                 "clt.mode = annealed\n"
                                 "clt.paths = 60\n"
                                 "clt.steps = 40\n"
                                 "clt.grid = 1.0\n");
    cfg.out = (od / "run").string();
    auto rec = rcm::run_experiment(cfg);
    INFO(joined(rec.invariant_failures));
    CHECK(rec.ok());
    auto stats = rcm::read_csv((od / "run" / "statistics.csv").string());
    bool saw_sigma = false;
    for (const auto& row : stats.rows)
        if (row[0] == "annealed.sigma2_mc") {
            saw_sigma = true;
            CHECK(std::stod(row[1]) > 0.0);
        }
    CHECK(saw_sigma);
    auto manifest = nlohmann::json::parse(read_text(od / "run" / "manifest.json"));
    CHECK(manifest.at("environment_seed_rule") == "seed + 1 + path");
}

TEST_CASE("replay reproduces a run and pinpoints tampering", "[runner]") {
    fs::path od = scratch_dir("replay_corrector");
    auto cfg = rcm::parse_config("experiment = corrector\nside = 8\nenvs = 2\nseed = 9\n");
    cfg.out = (od / "run").string();
    auto rec = rcm::run_experiment(cfg);
    REQUIRE(rec.ok());
    const std::string record = (od / "run" / "record.json").string();

    auto clean = rcm::replay(record);
    INFO(joined(clean.diffs));
    CHECK(clean.clean());
    CHECK(clean.outputs_checked == 2);
    CHECK_FALSE(fs::exists(od / "run" / ".replay")); // scratch removed when clean

    // A replay with a different thread count must still match bit for bit.
    auto threaded = rcm::replay(record, 3);
    INFO(joined(threaded.diffs));
    CHECK(threaded.clean());

    // Tamper with a deterministic output: byte comparison catches it.
    fs::path diag = od / "run" / "diagnostics.json";
    std::string text = read_text(diag);
    text.replace(text.find("\"achieved\""), 10, "\"achieeved\"");
    write_text(diag, text);
    auto tampered = rcm::replay(record);
    REQUIRE_FALSE(tampered.clean());
    bool named = false;
    for (const std::string& d : tampered.diffs)
        if (d.find("diagnostics.json") != std::string::npos &&
            d.find("bytes differ") != std::string::npos)
            named = true;
    CHECK(named);
    CHECK(fs::exists(od / "run" / ".replay")); // kept for inspection on a diff
}

TEST_CASE("replay compares statistical tables within their errors", "[runner]") {
    fs::path od = scratch_dir("replay_distances");
    auto cfg = rcm::parse_config("experiment = distances\n"
                                 "side = 12\n"
                                 "envs = 3\n"
                                 "seed = 31\n"
                                 "law.kind = bernoulli\n"
                                 "law.p = 0.85\n");
    cfg.out = (od / "run").string();
    auto rec = rcm::run_experiment(cfg);
    INFO(joined(rec.invariant_failures));
    REQUIRE(rec.ok());
    const std::string record = (od / "run" / "record.json").string();
    REQUIRE(rcm::replay(record).clean());

    // Shift one violation frequency far past 3 standard errors: the diff
    // names the table, the row, and the column.
    fs::path binsp = od / "run" / "distance_bins.csv";
    auto bins = rcm::read_csv(binsp.string());
    const int freq_col = bins.column("violation_freq");
    REQUIRE(freq_col >= 0);
    REQUIRE(!bins.rows.empty());
    bins.rows[0][freq_col] = "0.75";
    rcm::write_csv(binsp.string(), bins);
    auto tampered = rcm::replay(record);
    REQUIRE_FALSE(tampered.clean());
    bool named = false;
    for (const std::string& d : tampered.diffs)
        if (d.find("distance_bins.csv") != std::string::npos &&
            d.find("violation_freq") != std::string::npos)
            named = true;
    CHECK(named);
}

TEST_CASE("replay refuses records from a different schema", "[runner]") {
    fs::path od = scratch_dir("replay_schema");
    auto cfg = rcm::parse_config("experiment = percolation\nside = 8\nseed = 2\n");
    cfg.out = (od / "run").string();
    rcm::run_experiment(cfg);
    fs::path record = od / "run" / "record.json";

    std::string text = read_text(record);
    text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
    write_text(record, text);
    CHECK_THROWS_WITH(rcm::replay(record.string()),
                      Catch::Matchers::ContainsSubstring("schema version mismatch"));
}

TEST_CASE("replay flags a record whose config hash was edited", "[runner]") {
    fs::path od = scratch_dir("replay_hash");
    auto cfg = rcm::parse_config("experiment = percolation\nside = 8\nseed = 12\n");
    cfg.out = (od / "run").string();
    auto rec = rcm::run_experiment(cfg);
    fs::path record = od / "run" / "record.json";

    std::string text = read_text(record);
    const std::string needle = "\"config_hash\": \"" + rec.config_hash + "\"";
    std::string swapped = rec.config_hash;
    swapped[0] = swapped[0] == '0' ? '1' : '0';
    text.replace(text.find(needle), needle.size(), "\"config_hash\": \"" + swapped + "\"");
    write_text(record, text);

    auto rep = rcm::replay(record.string());
    REQUIRE_FALSE(rep.clean());
    CHECK(rep.diffs[0].find("config hash mismatch") != std::string::npos);
}

TEST_CASE("heatkernel and nash and distances records carry their summaries", "[runner]") {
    fs::path od = scratch_dir("trio");

    auto hk = rcm::parse_config("experiment = heatkernel\n"
                                "side = 10\n"
                                "envs = 2\n"
                                "seed = 13\n"
                                "law.kind = bernoulli\n"
                                "law.p = 0.9\n"
                                "heatkernel.times = 4, 8\n"
                                "heatkernel.samples = 2000\n");
    hk.out = (od / "hk").string();
    auto hk_rec = rcm::run_experiment(hk);
    INFO(joined(hk_rec.invariant_failures));
    CHECK(hk_rec.ok());
    auto curve = rcm::read_csv((od / "hk" / "heat_lower_bound.csv").string());
    CHECK(curve.rows.size() == 4); // 2 environments x 2 times
    CHECK(hk_rec.summary.at("min_value_minus_3se").get<double>() > 0.0);

    auto nash = rcm::parse_config("experiment = nash\n"
                                  "side = 6\n"
                                  "envs = 3\n"
                                  "seed = 17\n"
                                  "law.kind = uniform_open\n");
    nash.out = (od / "nash").string();
    auto nash_rec = rcm::run_experiment(nash);
    INFO(joined(nash_rec.invariant_failures));
    CHECK(nash_rec.ok());
    CHECK(nash_rec.summary.at("usable_environments").get<std::int64_t>() >= 1);
    auto report = nlohmann::json::parse(read_text(od / "nash" / "nash_report.json"));
    CHECK(report.at("environments").size() == 3);

    auto dist = rcm::parse_config("experiment = distances\n"
                                  "side = 16\n"
                                  "envs = 2\n"
                                  "seed = 19\n"
                                  "law.kind = bernoulli\n"
                                  "law.p = 0.9\n");
    dist.out = (od / "dist").string();
    auto dist_rec = rcm::run_experiment(dist);
    INFO(joined(dist_rec.invariant_failures));
    CHECK(dist_rec.ok());
    auto bins = rcm::read_csv((od / "dist" / "distance_bins.csv").string());
    CHECK(bins.rows.size() == 4); // annulus 1..side/4
    CHECK(dist_rec.summary.at("environments_used").get<std::int64_t>() >= 1);
}
