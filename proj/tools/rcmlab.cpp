// Command-line front end: runs one experiment from a config file, or replays
// a previously written record. Exit status: 0 clean, 1 invariant failures or
// replay differences (or a run that died mid-flight), 2 usage and config
// errors.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rcm/config.hpp"
#include "rcm/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"random conductance lattice laboratory"};
    std::string what;
    std::string config_path;
    std::string record_path;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;

    app.add_option("experiment", what,
                   "one of percolation, corrector, clt, heatkernel, nash, distances, "
                   "or 'replay'")
        ->required();
    app.add_option("record", record_path, "record.json to check (replay only)");
    auto* config_opt = app.add_option("--config", config_path, "experiment config file");
    auto* seed_opt = app.add_option("--seed", seed, "override the base seed");
    auto* out_opt = app.add_option("--out", out, "override the output directory");
    auto* threads_opt =
        app.add_option("--threads", threads, "override the worker thread count")
            ->check(CLI::Range(1, 1024));
    app.add_flag("--deterministic", deterministic, "force a single-threaded run");

    CLI11_PARSE(app, argc, argv);

    try {
        if (what == "replay") {
            if (record_path.empty()) {
                std::fprintf(stderr, "rcmlab: replay needs the path of a record.json\n");
                return 2;
            }
            if (config_opt->count() || seed_opt->count() || out_opt->count()) {
                std::fprintf(stderr,
                             "rcmlab: replay reruns the recorded config; only --threads "
                             "applies\n");
                return 2;
            }
            rcm::ReplayReport rep =
                rcm::replay(record_path, threads_opt->count() ? threads : 0);
            if (rep.clean()) {
                std::printf("replay clean: %d outputs checked\n", rep.outputs_checked);
                return 0;
            }
            std::fprintf(stderr, "replay of %s differs:\n", rep.record_path.c_str());
            for (const std::string& d : rep.diffs)
                std::fprintf(stderr, "  - %s\n", d.c_str());
            return 1;
        }

        if (!record_path.empty()) {
            std::fprintf(stderr, "rcmlab: a record path only makes sense with 'replay'\n");
            return 2;
        }
        if (!config_opt->count()) {
            std::fprintf(stderr, "rcmlab: running an experiment needs --config FILE\n");
            return 2;
        }

        rcm::ExperimentConfig cfg = rcm::parse_config_file(config_path, what);
        if (seed_opt->count()) cfg.seed = seed;
        if (out_opt->count()) cfg.out = out;
        if (threads_opt->count()) cfg.threads = threads;
        if (deterministic) {
            cfg.deterministic = true;
            cfg.threads = 1;
        }

        rcm::ResultRecord rec = rcm::run_experiment(cfg);
        std::printf("%s: config %s, %.2f s, outputs in %s\n",
                    rcm::experiment_name(cfg.experiment), rec.config_hash.c_str(),
                    rec.wall_seconds, cfg.out.c_str());
        for (const rcm::RecordOutput& o : rec.outputs)
            std::printf("  %-13s %s (%s)\n", o.kind.c_str(), o.path.c_str(), o.name.c_str());
        if (!rec.ok()) {
            std::fprintf(stderr, "invariant failures:\n");
            for (const std::string& f : rec.invariant_failures)
                std::fprintf(stderr, "  - %s\n", f.c_str());
            return 1;
        }
        return 0;
    } catch (const rcm::ConfigError& e) {
        std::fprintf(stderr, "rcmlab: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rcmlab: %s\n", e.what());
        return 1;
    }
}
