#pragma once

// Experiment runner behind the rcmlab CLI. run_experiment takes a parsed
// config, runs one of the six experiments, writes its tables and diagnostics
// into the configured output directory, and finishes with a record.json that
// makes the run reproducible: the canonical config and its hash, the seeds,
// the output inventory, a summary, and every invariant violation observed.
//
// Conventions shared by all experiments:
//   - environment k draws its field with seed + 1 + k; experiments that also
//     walk use walk seeds seed + envs + 1 + k, so field and walk streams
//     never collide;
//   - environments run in parallel via an index pool, results land in
//     per-environment slots and are reduced in index order, so outputs are
//     identical for any thread count;
//   - a failure local to one environment (solver breakdown, empty cluster)
//     is caught and recorded as an invariant failure instead of aborting the
//     sweep;
//   - nothing is written outside the configured output directory, and an
//     existing record.json there aborts the run before any compute (records
//     are append-only).
//
// Outputs are tagged deterministic or statistical in the record. replay()
// re-runs the recorded config into a scratch subdirectory and compares:
// deterministic outputs byte for byte, statistical CSV tables cell-wise,
// allowing 3 standard errors where the table carries the error column
// (value/std_error, violation_freq/freq_se) and exact match elsewhere.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rcm/clt.hpp"
#include "rcm/cluster.hpp"
#include "rcm/config.hpp"
#include "rcm/corrector.hpp"
#include "rcm/csv.hpp"
#include "rcm/distance_compare.hpp"
#include "rcm/field.hpp"
#include "rcm/field_io.hpp"
#include "rcm/heat_kernel.hpp"
#include "rcm/induced_kernel.hpp"
#include "rcm/nash.hpp"
#include "rcm/parallel.hpp"
#include "rcm/rng.hpp"
#include "rcm/stats.hpp"

namespace rcm {

struct RecordOutput {
    std::string name; // short handle used in messages
    std::string path; // relative to the output directory
    std::string kind; // "deterministic" or "statistical"

    bool operator==(const RecordOutput& o) const {
        return name == o.name && path == o.path && kind == o.kind;
    }
};

struct ResultRecord {
    int schema_version = 1;
    ExperimentConfig config;
    std::string config_hash;
    double wall_seconds = 0.0;
    std::vector<RecordOutput> outputs;
    nlohmann::ordered_json summary;
    std::vector<std::string> invariant_failures;

    bool ok() const { return invariant_failures.empty(); }
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline std::uint64_t field_seed(const ExperimentConfig& cfg, std::int64_t k) {
    return cfg.seed + 1 + static_cast<std::uint64_t>(k);
}

inline std::uint64_t walk_seed(const ExperimentConfig& cfg, std::int64_t k) {
    return cfg.seed + static_cast<std::uint64_t>(cfg.envs) + 1 + static_cast<std::uint64_t>(k);
}

inline void write_json_file(const std::filesystem::path& path, const ojson& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("runner: cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("runner: write to " + path.string() + " failed");
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("runner: cannot open " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

inline void add_output(ResultRecord& rec, const std::string& name, const std::string& rel_path,
                       const char* kind) {
    rec.outputs.push_back({name, rel_path, kind});
}

inline void add_stat_row(CsvTable& t, const std::string& name, double value, double se,
                         std::int64_t n) {
    auto& r = t.add_row();
    r.push_back(name);
    r.push_back(csv_num(value));
    r.push_back(csv_num(se));
    r.push_back(csv_num(n));
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    return 0.5 * (v[mid - 1] + hi);
}

// ---------------------------------------------------------------------------
// percolation: cluster fractions, weak holes, hole-diameter tail

inline void run_percolation(const ExperimentConfig& cfg, ResultRecord& rec,
                            const std::filesystem::path& od) {
    BoxLattice lat(cfg.dim, cfg.side, cfg.boundary);

    struct EnvResult {
        std::int64_t largest_positive = 0;
        std::int64_t largest_strong = 0;
        std::vector<HoleComponent> holes;
        std::string error;
    };
    std::vector<EnvResult> envs(static_cast<std::size_t>(cfg.envs));

    run_indexed(cfg.envs, cfg.threads, [&](std::int64_t k) {
        EnvResult& slot = envs[static_cast<std::size_t>(k)];
        try {
            ConductanceField f = sample_field(lat, cfg.law, field_seed(cfg, k));
            auto positive = label_clusters(f, 0.0);
            auto strong = label_clusters(f, cfg.alpha);
            slot.largest_positive = positive.largest_size();
            slot.largest_strong = strong.largest_size();
            if (positive.largest >= 0 && strong.largest >= 0)
                slot.holes = hole_components(f, positive, strong);
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    DiameterTailAccumulator acc;
    double mean_pos = 0.0, mean_strong = 0.0;
    std::int64_t holes_total = 0;
    int max_diam = 0;
    for (std::int64_t k = 0; k < cfg.envs; ++k) {
        const EnvResult& e = envs[static_cast<std::size_t>(k)];
        if (!e.error.empty()) {
            rec.invariant_failures.push_back("environment " + std::to_string(k) + ": " + e.error);
            continue;
        }
        if (e.largest_strong > e.largest_positive)
            rec.invariant_failures.push_back(
                "environment " + std::to_string(k) +
                ": largest strong cluster exceeds the largest positive cluster");
        acc.add_environment(lat, e.holes);
        mean_pos += static_cast<double>(e.largest_positive);
        mean_strong += static_cast<double>(e.largest_strong);
        holes_total += static_cast<std::int64_t>(e.holes.size());
        for (const HoleComponent& h : e.holes) max_diam = std::max(max_diam, h.linf_diameter);
    }
    const double sites = static_cast<double>(lat.n_sites());
    mean_pos /= sites * static_cast<double>(cfg.envs);
    mean_strong /= sites * static_cast<double>(cfg.envs);

    CsvTable tail;
    tail.header = {"n", "tail_prob", "count"};
    for (std::size_t n = 0; n < acc.t.count.size(); ++n) {
        auto& r = tail.add_row();
        r.push_back(csv_num(static_cast<std::int64_t>(n)));
        r.push_back(csv_num(acc.t.tail(n)));
        r.push_back(csv_num(acc.t.count[n]));
    }
    write_csv((od / "hole_diameter_tail.csv").string(), tail);
    add_output(rec, "hole diameter tail", "hole_diameter_tail.csv", "statistical");

    // Log-tail slope over the well-populated part of the tail.
    std::vector<double> fx, fy;
    for (std::size_t n = 1; n < acc.t.count.size(); ++n)
        if (acc.t.count[n] >= 5 && acc.t.tail(n) > 0.0) {
            fx.push_back(static_cast<double>(n));
            fy.push_back(std::log(acc.t.tail(n)));
        }
    rec.summary["environments"] = cfg.envs;
    rec.summary["sites_per_environment"] = lat.n_sites();
    rec.summary["largest_positive_fraction_mean"] = mean_pos;
    rec.summary["largest_strong_fraction_mean"] = mean_strong;
    rec.summary["holes_total"] = holes_total;
    rec.summary["max_hole_diameter"] = max_diam;
    rec.summary["tail_trials"] = acc.t.trials;
    if (fx.size() >= 2) {
        LineFit fit = least_squares(fx, fy);
        rec.summary["log_tail_fit"] = {
            {"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}, {"points", fit.n}};
    } else {
        rec.summary["log_tail_fit"] = nullptr;
    }

    if (cfg.dump_labeling) {
        ConductanceField f0 = sample_field(lat, cfg.law, field_seed(cfg, 0));
        auto strong0 = label_clusters(f0, cfg.alpha);
        CsvTable lab;
        lab.header = {"site_index", "component_id"};
        for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
            auto& r = lab.add_row();
            r.push_back(csv_num(s));
            r.push_back(csv_num(strong0.component[static_cast<std::size_t>(s)]));
        }
        write_csv((od / "strong_labeling.csv").string(), lab);
        add_output(rec, "strong labeling of environment 0", "strong_labeling.csv",
                   "deterministic");
    }
    if (cfg.dump_field) {
        ConductanceField f0 = sample_field(lat, cfg.law, field_seed(cfg, 0));
        write_field(f0, (od / "field.bin").string());
        add_output(rec, "environment 0 field", "field.bin", "deterministic");
    }
}

// ---------------------------------------------------------------------------
// corrector: solve per environment, dump the field and diagnostics

inline void run_corrector(const ExperimentConfig& cfg, ResultRecord& rec,
                          const std::filesystem::path& od) {
    BoxLattice lat(cfg.dim, cfg.side, cfg.boundary);
    CorrectorOptions copts;
    copts.tolerance = cfg.tolerance;
    copts.max_iterations = cfg.max_iterations;

    struct EnvResult {
        double achieved = 0.0;
        std::int64_t iterations = 0;
        std::int64_t domain_sites = 0;
        bool multiple_components = false;
        ResidualStats residual;
        double energy = 0.0;
        double plaquette_defect = 0.0;
        SublinearityStats sub;
        std::optional<CorrectorField> chi0; // kept for environment 0 only
        std::string error;
    };
    std::vector<EnvResult> envs(static_cast<std::size_t>(cfg.envs));

    SublinearityOptions sopts;
    sopts.eps = cfg.eps;

    run_indexed(cfg.envs, cfg.threads, [&](std::int64_t k) {
        EnvResult& slot = envs[static_cast<std::size_t>(k)];
        try {
            ConductanceField f = sample_field(lat, cfg.law, field_seed(cfg, k));
            CorrectorField chi = solve_corrector_periodic(f, copts);
            slot.achieved = chi.achieved;
            slot.iterations = chi.iterations;
            slot.multiple_components = chi.multiple_components;
            for (std::uint8_t v : chi.in_domain) slot.domain_sites += v;
            slot.residual = harmonic_residual(f, chi);
            slot.energy = dirichlet_energy(f, chi);
            slot.plaquette_defect = max_plaquette_defect(f, chi);
            auto strong = label_clusters(f, cfg.alpha);
            if (strong.largest >= 0) slot.sub = sublinearity_stats(f, chi, strong, sopts);
            if (k == 0) slot.chi0 = std::move(chi);
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    ojson env_list = ojson::array();
    std::vector<double> final_ratios;
    for (std::int64_t k = 0; k < cfg.envs; ++k) {
        const EnvResult& e = envs[static_cast<std::size_t>(k)];
        if (!e.error.empty()) {
            rec.invariant_failures.push_back("environment " + std::to_string(k) + ": " + e.error);
            continue;
        }
        if (e.achieved > cfg.tolerance)
            rec.invariant_failures.push_back(
                "environment " + std::to_string(k) + ": corrector residual " +
                csv_num(e.achieved) + " missed the tolerance " + csv_num(cfg.tolerance));
        if (e.plaquette_defect > 1e-8)
            rec.invariant_failures.push_back("environment " + std::to_string(k) +
                                             ": corrector gradients fail to close plaquettes (" +
                                             csv_num(e.plaquette_defect) + ")");
        ojson j;
        j["seed"] = field_seed(cfg, k);
        j["achieved"] = e.achieved;
        j["iterations"] = e.iterations;
        j["domain_sites"] = e.domain_sites;
        j["multiple_components"] = e.multiple_components;
        j["residual_max"] = e.residual.max;
        j["residual_mean"] = e.residual.mean;
        j["dirichlet_energy"] = e.energy;
        j["plaquette_defect"] = e.plaquette_defect;
        j["sublinearity"] = {{"n", e.sub.n},
                             {"R", e.sub.R},
                             {"R_over_n", e.sub.R_over_n},
                             {"eps", e.sub.eps},
                             {"density", e.sub.density},
                             {"edge_energy_mean", e.sub.edge_energy_mean},
                             {"contraction",
                              {{"eps", e.sub.contraction_eps},
                               {"delta", e.sub.contraction_delta},
                               {"n", e.sub.contraction_n},
                               {"defect", e.sub.contraction_defect}}}};
        env_list.push_back(std::move(j));
        if (!e.sub.R_over_n.empty()) final_ratios.push_back(e.sub.R_over_n.back());
    }

    ojson diag;
    diag["environments"] = std::move(env_list);
    diag["median_R_over_n_final"] =
        final_ratios.empty() ? ojson(nullptr) : ojson(median_of(final_ratios));
    write_json_file(od / "diagnostics.json", diag);
    add_output(rec, "corrector diagnostics", "diagnostics.json", "deterministic");

    const EnvResult& e0 = envs.front();
    if (e0.chi0) {
        CsvTable chi_table;
        chi_table.header = {"site_index"};
        for (int i = 1; i <= cfg.dim; ++i) chi_table.header.push_back("chi_" + std::to_string(i));
        for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
            auto& r = chi_table.add_row();
            r.push_back(csv_num(s));
            const double* cs = e0.chi0->at(s);
            for (int i = 0; i < cfg.dim; ++i) r.push_back(csv_num(cs[i]));
        }
        write_csv((od / "corrector_field.csv").string(), chi_table);
        add_output(rec, "corrector field of environment 0", "corrector_field.csv",
                   "deterministic");
    }
    if (cfg.dump_field) {
        ConductanceField f0 = sample_field(lat, cfg.law, field_seed(cfg, 0));
        write_field(f0, (od / "field.bin").string());
        add_output(rec, "environment 0 field", "field.bin", "deterministic");
    }

    rec.summary["environments"] = cfg.envs;
    rec.summary["tolerance"] = cfg.tolerance;
    rec.summary["median_R_over_n_final"] =
        final_ratios.empty() ? ojson(nullptr) : ojson(median_of(final_ratios));
}

// ---------------------------------------------------------------------------
// clt: path ensembles, diffusion matrix, isotropy, variance identity

inline void run_clt(const ExperimentConfig& cfg, ResultRecord& rec,
                    const std::filesystem::path& od) {
    BoxLattice lat(cfg.dim, cfg.side, cfg.boundary);
    CorrectorOptions copts;
    copts.tolerance = cfg.tolerance;
    copts.max_iterations = cfg.max_iterations;
    const double t_iso = *std::max_element(cfg.grid.begin(), cfg.grid.end());

    CsvTable stats;
    stats.header = {"statistic", "value", "std_error", "n_samples"};

    ojson manifest;
    manifest["mode"] = cfg.clt_mode;
    manifest["paths"] = cfg.paths;
    manifest["steps"] = cfg.steps;
    manifest["grid"] = cfg.grid;
    manifest["corrector_tolerance"] = cfg.tolerance;

    auto emit_estimates = [&](const std::string& prefix, const DiffusionEstimate* exact,
                              const DiffusionEstimate& mc, const IsotropyNormality* iso,
                              const VarianceIdentity* vi) {
        const int d = cfg.dim;
        if (exact) {
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j)
                    add_stat_row(stats,
                                 prefix + "d_exact_" + std::to_string(i) + std::to_string(j),
                                 exact->entry(i, j), 0.0, exact->samples);
            add_stat_row(stats, prefix + "sigma2_exact", exact->sigma2, 0.0, exact->samples);
            add_stat_row(stats, prefix + "step2_exact", exact->step_second_moment, 0.0,
                         exact->samples);
        }
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                add_stat_row(stats, prefix + "d_mc_" + std::to_string(i) + std::to_string(j),
                             mc.entry(i, j), mc.se[static_cast<std::size_t>(i) * d + j],
                             mc.samples);
        add_stat_row(stats, prefix + "sigma2_mc", mc.sigma2, mc.sigma2_se, mc.samples);
        add_stat_row(stats, prefix + "step2_mc", mc.step_second_moment, mc.step_second_moment_se,
                     mc.samples);
        if (vi) {
            add_stat_row(stats, prefix + "identity_defect", vi->defect, 0.0, vi->domain_sites);
            add_stat_row(stats, prefix + "identity_inner_defect", vi->inner_defect, 0.0,
                         vi->domain_sites);
            add_stat_row(stats, prefix + "identity_chi_sq", vi->chi_sq, 0.0, vi->domain_sites);
        }
        if (iso) {
            for (int i = 0; i < d; ++i) {
                add_stat_row(stats, prefix + "b_mean_" + std::to_string(i), iso->mean[i],
                             std::sqrt(iso->var[i] / static_cast<double>(iso->n)), iso->n);
                add_stat_row(stats, prefix + "b_var_" + std::to_string(i), iso->var[i],
                             iso->var_se[i], iso->n);
                add_stat_row(stats, prefix + "skew_z_" + std::to_string(i), iso->skew_z[i], 1.0,
                             iso->n);
                add_stat_row(stats, prefix + "exkurt_z_" + std::to_string(i), iso->exkurt_z[i],
                             1.0, iso->n);
            }
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j)
                    add_stat_row(stats,
                                 prefix + "cov_z_" + std::to_string(i) + std::to_string(j),
                                 iso->cov_z[static_cast<std::size_t>(i) * d + j], 1.0, iso->n);
            add_stat_row(stats, prefix + "diag_z", iso->diag_z, 1.0, iso->n);
            add_stat_row(stats, prefix + "max_abs_z", iso->max_abs_z, 1.0, iso->n);
        }
    };

    if (cfg.clt_mode == "quenched") {
        struct EnvResult {
            DiffusionEstimate exact, mc;
            IsotropyNormality iso;
            bool iso_run = false;
            VarianceIdentity vi;
            std::string error;
        };
        std::vector<EnvResult> envs(static_cast<std::size_t>(cfg.envs));

        run_indexed(cfg.envs, cfg.threads, [&](std::int64_t k) {
            EnvResult& slot = envs[static_cast<std::size_t>(k)];
            try {
                ConductanceField f = sample_field(lat, cfg.law, field_seed(cfg, k));
                CorrectorField chi = solve_corrector_periodic(f, copts);
                EnsembleOptions eo;
                eo.n_paths = cfg.paths;
                eo.n_steps = cfg.steps;
                eo.t_grid = cfg.grid;
                eo.start = StartRule::uniform_cluster;
                eo.seed = walk_seed(cfg, k);
                eo.env_tag = static_cast<std::uint64_t>(k);
                PathEnsemble ens = sample_x_ensemble(f, &chi, eo);
                slot.exact = diffusion_matrix_exact(f, chi);
                slot.mc = diffusion_estimate(ens);
                slot.vi = variance_identity_check(f, chi);
                if (cfg.paths >= 1000) {
                    auto rng = make_engine(cfg.seed, 900000 + static_cast<std::uint64_t>(k));
                    slot.iso = isotropy_normality_test(ens, t_iso, rng);
                    slot.iso_run = true;
                }
            } catch (const std::exception& e) {
                slot.error = e.what();
            }
        });

        std::vector<std::uint64_t> fseeds, wseeds;
        for (std::int64_t k = 0; k < cfg.envs; ++k) {
            fseeds.push_back(field_seed(cfg, k));
            wseeds.push_back(walk_seed(cfg, k));
        }
        manifest["environments"] = cfg.envs;
        manifest["field_seeds"] = fseeds;
        manifest["walk_seeds"] = wseeds;
        manifest["isotropy_time"] = t_iso;

        for (std::int64_t k = 0; k < cfg.envs; ++k) {
            const EnvResult& e = envs[static_cast<std::size_t>(k)];
            const std::string tag = "environment " + std::to_string(k);
            if (!e.error.empty()) {
                rec.invariant_failures.push_back(tag + ": " + e.error);
                continue;
            }
            emit_estimates("env" + std::to_string(k) + ".", &e.exact, e.mc,
                           e.iso_run ? &e.iso : nullptr, &e.vi);
            for (int i = 0; i < cfg.dim; ++i)
                for (int j = i; j < cfg.dim; ++j) {
                    const double se = e.mc.se[static_cast<std::size_t>(i) * cfg.dim + j];
                    if (std::abs(e.exact.entry(i, j) - e.mc.entry(i, j)) > 3.0 * se + 1e-12)
                        rec.invariant_failures.push_back(
                            tag + ": sampled D(" + std::to_string(i) + "," + std::to_string(j) +
                            ") = " + csv_num(e.mc.entry(i, j)) +
                            " disagrees with the exact value " + csv_num(e.exact.entry(i, j)) +
                            " beyond 3 standard errors");
                }
            // The identity defect scales like the harmonicity residual times
            // the corrector magnitude; 1e4 x tolerance covers desk-size boxes.
            if (e.vi.defect > 1e4 * cfg.tolerance)
                rec.invariant_failures.push_back(tag + ": variance identity defect " +
                                                 csv_num(e.vi.defect) +
                                                 " is out of scale with the solver tolerance");
            if (!(e.exact.sigma2 > 0.0))
                rec.invariant_failures.push_back(tag + ": exact diffusion trace is not positive");
        }
    } else { // annealed: one fresh environment per path
        EnsembleOptions eo;
        eo.n_paths = cfg.paths;
        eo.n_steps = cfg.steps;
        eo.t_grid = cfg.grid;
        eo.start = StartRule::origin_site;
        eo.seed = cfg.seed;
        PathEnsemble ens = sample_annealed_ensemble(cfg.dim, cfg.side, cfg.boundary, cfg.law, eo,
                                                    &copts);
        DiffusionEstimate mc = diffusion_estimate(ens);
        IsotropyNormality iso;
        bool iso_run = false;
        if (cfg.paths >= 1000) {
            auto rng = make_engine(cfg.seed, 900000);
            iso = isotropy_normality_test(ens, t_iso, rng);
            iso_run = true;
        }
        emit_estimates("annealed.", nullptr, mc, iso_run ? &iso : nullptr, nullptr);
        manifest["environments"] = cfg.paths;
        manifest["base_seed"] = cfg.seed;
        manifest["environment_seed_rule"] = "seed + 1 + path";
        manifest["isotropy_time"] = t_iso;
        if (!(mc.sigma2 > 0.0))
            rec.invariant_failures.push_back("annealed diffusion trace is not positive");
        if (mc.sigma2 >
            mc.step_second_moment + 3.0 * (mc.sigma2_se + mc.step_second_moment_se))
            rec.invariant_failures.push_back(
                "annealed diffusion trace exceeds the first-step second moment");
    }

    write_json_file(od / "manifest.json", manifest);
    add_output(rec, "ensemble manifest", "manifest.json", "deterministic");
    write_csv((od / "statistics.csv").string(), stats);
    add_output(rec, "clt statistics", "statistics.csv", "statistical");

    rec.summary["mode"] = cfg.clt_mode;
    rec.summary["paths"] = cfg.paths;
    rec.summary["steps"] = cfg.steps;
    rec.summary["isotropy_checked"] = cfg.paths >= 1000;
}

// ---------------------------------------------------------------------------
// heatkernel: scaled return-probability lower bounds along a time list

inline void run_heatkernel(const ExperimentConfig& cfg, ResultRecord& rec,
                           const std::filesystem::path& od) {
    BoxLattice lat(cfg.dim, cfg.side, cfg.boundary);

    struct EnvResult {
        HeatLowerBound curve;
        std::int32_t x0 = -1;
        std::string error;
    };
    std::vector<EnvResult> envs(static_cast<std::size_t>(cfg.envs));

    run_indexed(cfg.envs, cfg.threads, [&](std::int64_t k) {
        EnvResult& slot = envs[static_cast<std::size_t>(k)];
        try {
            ConductanceField f = sample_field(lat, cfg.law, field_seed(cfg, k));
            auto positive = label_clusters(f, 0.0);
            if (positive.largest < 0) throw std::runtime_error("no positive cluster");
            std::int32_t x0 = -1;
            for (std::int32_t s = 0; s < lat.n_sites(); ++s)
                if (positive.in_largest(s)) {
                    x0 = s;
                    break;
                }
            slot.x0 = x0;
            auto rng = make_engine(cfg.seed, static_cast<std::uint64_t>(k));
            slot.curve = heat_lower_bound_curve(f, positive, x0, cfg.times, cfg.samples, rng);
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    CsvTable curve;
    curve.header = {"env", "n", "value", "std_error", "successes"};
    double global_min = std::numeric_limits<double>::infinity();
    ojson starts = ojson::array();
    for (std::int64_t k = 0; k < cfg.envs; ++k) {
        const EnvResult& e = envs[static_cast<std::size_t>(k)];
        const std::string tag = "environment " + std::to_string(k);
        if (!e.error.empty()) {
            rec.invariant_failures.push_back(tag + ": " + e.error);
            continue;
        }
        starts.push_back(e.x0);
        if (e.curve.indistinguishable_from_zero)
            rec.invariant_failures.push_back(
                tag + ": scaled return probability indistinguishable from zero at 3 sigma");
        for (std::size_t i = 0; i < e.curve.n.size(); ++i) {
            auto& r = curve.add_row();
            r.push_back(csv_num(k));
            r.push_back(csv_num(e.curve.n[i]));
            r.push_back(csv_num(e.curve.value[i]));
            r.push_back(csv_num(e.curve.std_error[i]));
            r.push_back(csv_num(e.curve.successes[i]));
            global_min = std::min(global_min, e.curve.value[i] - 3.0 * e.curve.std_error[i]);
        }
    }
    write_csv((od / "heat_lower_bound.csv").string(), curve);
    add_output(rec, "heat-kernel lower bounds", "heat_lower_bound.csv", "statistical");

    rec.summary["environments"] = cfg.envs;
    rec.summary["samples_per_point"] = cfg.samples;
    rec.summary["times"] = cfg.times;
    rec.summary["start_sites"] = std::move(starts);
    rec.summary["min_value_minus_3se"] =
        std::isfinite(global_min) ? ojson(global_min) : ojson(nullptr);
}

// ---------------------------------------------------------------------------
// nash: functional inequalities of the induced kernel, exact curves

inline void run_nash(const ExperimentConfig& cfg, ResultRecord& rec,
                     const std::filesystem::path& od) {
    BoxLattice lat(cfg.dim, cfg.side, cfg.boundary);
    NashInequalityOptions nopts;
    nopts.t_min = cfg.t_min;
    nopts.t_max = cfg.t_max;
    nopts.points = cfg.points;

    struct EnvResult {
        NashInequalityReport rep;
        NashCurves curves;
        std::int32_t x = -1;
        std::int64_t kernel_sites = 0;
        bool usable = false;
        std::string error;
    };
    std::vector<EnvResult> envs(static_cast<std::size_t>(cfg.envs));

    run_indexed(cfg.envs, cfg.threads, [&](std::int64_t k) {
        EnvResult& slot = envs[static_cast<std::size_t>(k)];
        try {
            ConductanceField f = sample_field(lat, cfg.law, field_seed(cfg, k));
            auto positive = label_clusters(f, 0.0);
            auto strong = label_clusters(f, cfg.alpha);
            if (strong.largest < 0) return; // nothing to test in this draw
            InducedKernel K = build_induced_kernel(f, positive, strong);
            slot.x = K.sites.front();
            slot.kernel_sites = K.n();
            slot.rep = check_nash_inequalities(K, slot.x, nopts);
            slot.curves = nash_curves_exact(K, slot.x, slot.rep.t);
            slot.usable = true;
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    ojson env_list = ojson::array();
    std::int64_t usable = 0;
    double worst2 = std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < cfg.envs; ++k) {
        const EnvResult& e = envs[static_cast<std::size_t>(k)];
        const std::string tag = "environment " + std::to_string(k);
        if (!e.error.empty()) {
            rec.invariant_failures.push_back(tag + ": " + e.error);
            continue;
        }
        if (!e.usable) {
            env_list.push_back({{"usable", false}});
            continue;
        }
        ++usable;
        worst2 = std::min(worst2, e.rep.worst2);
        if (!e.rep.ok1)
            rec.invariant_failures.push_back(
                tag + ": log-Moser slack went below tolerance somewhere on the grid");
        if (!e.rep.ok2)
            rec.invariant_failures.push_back(
                tag + ": energy slack Q' - M'^2 went below the differencing bound");
        ojson j;
        j["usable"] = true;
        j["x"] = e.x;
        j["kernel_sites"] = e.kernel_sites;
        j["ok1"] = e.rep.ok1;
        j["ok2"] = e.rep.ok2;
        j["worst2"] = e.rep.worst2;
        j["grid"] = e.rep.t;
        j["values"] = {{"M", e.curves.M},
                       {"Q", e.curves.Q},
                       {"M_prime", e.curves.M_prime},
                       {"Q_prime", e.curves.Q_prime}};
        j["std_errors"] = {{"M_se", e.curves.M_se}, {"Q_se", e.curves.Q_se}};
        j["slacks"] = {{"slack1", e.rep.slack1},
                       {"slack2", e.rep.slack2},
                       {"bound2", e.rep.bound2},
                       {"a_prime", e.rep.a_prime},
                       {"m_over_sqrt_t", e.rep.m_over_sqrt_t}};
        j["method"] = e.curves.method;
        j["caps"] = {{"exact_site_cap", exact_site_cap}, {"exact_time_cap", exact_time_cap}};
        env_list.push_back(std::move(j));
    }
    if (usable == 0)
        rec.invariant_failures.push_back("no environment produced a strong cluster to test");

    ojson report;
    report["environments"] = std::move(env_list);
    write_json_file(od / "nash_report.json", report);
    add_output(rec, "functional inequality report", "nash_report.json", "deterministic");

    for (std::int64_t k = 0; k < cfg.envs; ++k) {
        const EnvResult& e = envs[static_cast<std::size_t>(k)];
        if (!e.usable) continue;
        CsvTable t;
        t.header = {"t", "M", "Q", "M_prime", "Q_prime"};
        for (std::size_t i = 0; i < e.curves.t.size(); ++i) {
            auto& r = t.add_row();
            r.push_back(csv_num(e.curves.t[i]));
            r.push_back(csv_num(e.curves.M[i]));
            r.push_back(csv_num(e.curves.Q[i]));
            r.push_back(csv_num(e.curves.M_prime[i]));
            r.push_back(csv_num(e.curves.Q_prime[i]));
        }
        write_csv((od / "nash_curves.csv").string(), t);
        add_output(rec, "smoothing curves of the first usable environment", "nash_curves.csv",
                   "deterministic");
        break;
    }

    rec.summary["environments"] = cfg.envs;
    rec.summary["usable_environments"] = usable;
    rec.summary["worst_energy_slack"] =
        std::isfinite(worst2) ? ojson(worst2) : ojson(nullptr);
}

// ---------------------------------------------------------------------------
// distances: kernel metric versus ambient norm, pooled over environments

inline void run_distances(const ExperimentConfig& cfg, ResultRecord& rec,
                          const std::filesystem::path& od) {
    BoxLattice lat(cfg.dim, cfg.side, cfg.boundary);
    DistanceComparisonOptions dopts;
    dopts.rho = cfg.rho;
    dopts.min_abs = cfg.min_abs;
    dopts.max_abs = cfg.max_abs;

    struct EnvResult {
        DistanceComparison cmp;
        bool computed = false;
        std::string error;
    };
    std::vector<EnvResult> envs(static_cast<std::size_t>(cfg.envs));
    std::vector<int> zero(static_cast<std::size_t>(cfg.dim), 0);
    const std::int32_t origin = lat.coords_site(zero.data());

    run_indexed(cfg.envs, cfg.threads, [&](std::int64_t k) {
        EnvResult& slot = envs[static_cast<std::size_t>(k)];
        try {
            ConductanceField f = sample_field(lat, cfg.law, field_seed(cfg, k));
            auto positive = label_clusters(f, 0.0);
            auto strong = label_clusters(f, cfg.alpha);
            if (strong.largest < 0) return;
            InducedKernel K = build_induced_kernel(f, positive, strong);
            slot.cmp = distance_comparison(K, dopts);
            slot.computed = true;
            if (!slot.cmp.origin_in_kernel) return;
            // The jump graph contains every strong edge plus the cross-hole
            // jumps, so its metric can only be shorter than the chemical one.
            auto chem = chemical_distances(f, strong, origin);
            auto mdist = markov_distances_from(K, origin);
            for (std::size_t r = 0; r < K.sites.size(); ++r) {
                const std::int32_t y = K.sites[r];
                if (chem[static_cast<std::size_t>(y)] >= 0 &&
                    mdist[r] > chem[static_cast<std::size_t>(y)])
                    throw std::runtime_error(
                        "jump-graph distance exceeds the chemical distance at site " +
                        std::to_string(y));
            }
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    DistanceComparison total;
    std::int64_t skipped = 0;
    for (std::int64_t k = 0; k < cfg.envs; ++k) {
        const EnvResult& e = envs[static_cast<std::size_t>(k)];
        if (!e.error.empty()) {
            rec.invariant_failures.push_back("environment " + std::to_string(k) + ": " + e.error);
            continue;
        }
        if (!e.computed || !e.cmp.origin_in_kernel) {
            ++skipped;
            continue;
        }
        if (total.bins.empty()) total = e.cmp;
        else total.merge(e.cmp);
    }

    CsvTable bins;
    bins.header = {"abs_x",         "pairs",   "violations", "violation_freq",
                   "freq_se",       "unreachable", "min_ratio",  "mean_ratio"};
    ojson empty_list = ojson::array();
    for (const DistanceBin& b : total.bins) {
        BinomialEstimate viol{b.violations, b.pairs};
        auto& r = bins.add_row();
        r.push_back(csv_num(b.abs_x));
        r.push_back(csv_num(b.pairs));
        r.push_back(csv_num(b.violations));
        r.push_back(csv_num(viol.p_hat()));
        r.push_back(csv_num(viol.se()));
        r.push_back(csv_num(b.unreachable));
        r.push_back(csv_num(b.min_ratio));
        r.push_back(csv_num(b.mean_ratio()));
        if (b.pairs == 0) empty_list.push_back(b.abs_x);
    }
    write_csv((od / "distance_bins.csv").string(), bins);
    add_output(rec, "distance ratio bins", "distance_bins.csv", "statistical");

    double min_overall = std::numeric_limits<double>::infinity();
    for (const DistanceBin& b : total.bins) min_overall = std::min(min_overall, b.min_ratio);
    rec.summary["rho"] = cfg.rho;
    rec.summary["environments"] = cfg.envs;
    rec.summary["environments_used"] = total.environments;
    rec.summary["environments_skipped"] = skipped;
    rec.summary["empty_bins"] = std::move(empty_list);
    rec.summary["min_ratio_overall"] =
        std::isfinite(min_overall) ? ojson(min_overall) : ojson(nullptr);
}

// ---------------------------------------------------------------------------
// Record IO

inline void write_record_file(const ResultRecord& rec, const std::filesystem::path& path) {
    if (std::filesystem::exists(path))
        throw std::runtime_error("runner: " + path.string() +
                                 " already exists; records are append-only, use a fresh "
                                 "output directory");
    ojson j;
    j["schema_version"] = rec.schema_version;
    j["experiment"] = experiment_name(rec.config.experiment);
    j["config_hash"] = rec.config_hash;
    ojson cj;
    for (const auto& [k, v] : rec.config.canonical()) cj[k] = v;
    j["config"] = std::move(cj);
    j["out"] = rec.config.out;
    j["threads"] = rec.config.threads;
    j["deterministic"] = rec.config.deterministic;
    j["wall_seconds"] = rec.wall_seconds;
    ojson outs = ojson::array();
    for (const RecordOutput& o : rec.outputs)
        outs.push_back({{"name", o.name}, {"path", o.path}, {"kind", o.kind}});
    j["outputs"] = std::move(outs);
    j["summary"] = rec.summary;
    j["invariant_failures"] = rec.invariant_failures;
    write_json_file(path, j);
}

} // namespace detail

// Runs the experiment described by cfg into cfg.out and writes record.json
// there. Invariant violations are collected in the returned record (callers
// map them to the exit status); genuine usage errors throw.
inline ResultRecord run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    fs::path od(cfg.out);
    fs::create_directories(od);
    if (fs::exists(od / "record.json"))
        throw std::runtime_error("runner: " + (od / "record.json").string() +
                                 " already exists; records are append-only, use a fresh "
                                 "output directory");

    ResultRecord rec;
    rec.config = cfg;
    rec.config_hash = cfg.hash();

    switch (cfg.experiment) {
    case ExperimentKind::percolation: detail::run_percolation(cfg, rec, od); break;
    case ExperimentKind::corrector: detail::run_corrector(cfg, rec, od); break;
    case ExperimentKind::clt: detail::run_clt(cfg, rec, od); break;
    case ExperimentKind::heatkernel: detail::run_heatkernel(cfg, rec, od); break;
    case ExperimentKind::nash: detail::run_nash(cfg, rec, od); break;
    case ExperimentKind::distances: detail::run_distances(cfg, rec, od); break;
    }

    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_record_file(rec, od / "record.json");
    return rec;
}

// Reads a record.json back. The embedded canonical config is re-parsed (and
// so re-validated); a schema version this build does not understand is an
// error rather than a guess.
inline ResultRecord load_record(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("runner: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    const int version = j.at("schema_version").get<int>();
    if (version != 1)
        throw std::runtime_error("record schema version mismatch: " + path + " has version " +
                                 std::to_string(version) + ", this build reads version 1");
    ResultRecord rec;
    rec.schema_version = version;
    std::string text;
    for (const auto& [k, v] : j.at("config").items())
        text += k + " = " + v.get<std::string>() + "\n";
    rec.config = parse_config(text);
    rec.config.out = j.at("out").get<std::string>();
    rec.config.threads = j.at("threads").get<int>();
    rec.config.deterministic = j.at("deterministic").get<bool>();
    rec.config_hash = j.at("config_hash").get<std::string>();
    rec.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& o : j.at("outputs"))
        rec.outputs.push_back({o.at("name").get<std::string>(), o.at("path").get<std::string>(),
                               o.at("kind").get<std::string>()});
    rec.summary = j.at("summary");
    for (const auto& s : j.at("invariant_failures"))
        rec.invariant_failures.push_back(s.get<std::string>());
    return rec;
}

struct ReplayReport {
    std::string record_path;
    std::vector<std::string> diffs;
    int outputs_checked = 0;

    bool clean() const { return diffs.empty(); }
};

namespace detail {

// Cell-wise comparison for statistical tables. Columns carrying a standard
// error pair (value/std_error, violation_freq/freq_se) are compared within
// 3 combined standard errors; error columns themselves only loosely (they
// estimate each other); everything else must agree to near round-off, since
// same-seed reruns reproduce those cells exactly.
inline void compare_statistical_csv(const std::string& name, const CsvTable& a,
                                    const CsvTable& b, std::vector<std::string>& diffs) {
    if (a.header != b.header) {
        diffs.push_back(name + ": header differs");
        return;
    }
    if (a.rows.size() != b.rows.size()) {
        diffs.push_back(name + ": row count " + std::to_string(a.rows.size()) + " vs " +
                        std::to_string(b.rows.size()));
        return;
    }
    auto is_se_column = [](const std::string& h) {
        return h == "std_error" || (h.size() > 3 && h.compare(h.size() - 3, 3, "_se") == 0);
    };
    std::vector<int> se_of(a.header.size(), -1);
    for (std::size_t c = 0; c < a.header.size(); ++c) {
        if (a.header[c] == "value") se_of[c] = a.column("std_error");
        if (a.header[c] == "violation_freq") se_of[c] = a.column("freq_se");
    }

    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        for (std::size_t c = 0; c < a.header.size(); ++c) {
            const std::string& sa = a.rows[r][c];
            const std::string& sb = b.rows[r][c];
            if (sa == sb) continue;
            double va = 0, vb = 0;
            if (!detail::parse_double_token(sa, va) || !detail::parse_double_token(sb, vb)) {
                diffs.push_back(name + " row " + std::to_string(r + 1) + " (" + a.rows[r][0] +
                                "), column " + a.header[c] + ": '" + sa + "' vs '" + sb + "'");
                continue;
            }
            if (std::isnan(va) && std::isnan(vb)) continue;
            double tol;
            if (is_se_column(a.header[c])) {
                tol = 0.5 * std::max(std::abs(va), std::abs(vb)) + 1e-9;
            } else if (se_of[c] >= 0) {
                double ea = 0, eb = 0;
                detail::parse_double_token(a.rows[r][static_cast<std::size_t>(se_of[c])], ea);
                detail::parse_double_token(b.rows[r][static_cast<std::size_t>(se_of[c])], eb);
                tol = 3.0 * std::max(ea, eb) + 1e-12;
            } else {
                tol = 1e-9 * std::max({1.0, std::abs(va), std::abs(vb)});
            }
            if (!(std::abs(va - vb) <= tol))
                diffs.push_back(name + " row " + std::to_string(r + 1) + " (" + a.rows[r][0] +
                                "), column " + a.header[c] + ": " + sa + " vs " + sb +
                                " (tolerance " + csv_num(tol) + ")");
        }
    }
}

} // namespace detail

// Re-runs a record into <record dir>/.replay and compares the outputs:
// byte equality for deterministic ones, tolerance-aware cell comparison for
// statistical CSV tables. threads_override > 0 reruns with that many threads
// (outputs must still match; reductions are thread-count independent). The
// scratch directory is removed on a clean replay and kept for inspection
// otherwise.
inline ReplayReport replay(const std::string& record_path, int threads_override = 0) {
    namespace fs = std::filesystem;
    ReplayReport rep;
    rep.record_path = record_path;

    ResultRecord rec = load_record(record_path);
    if (rec.config.hash() != rec.config_hash) {
        rep.diffs.push_back("config hash mismatch: record says " + rec.config_hash +
                            ", the embedded config hashes to " + rec.config.hash());
        return rep;
    }

    fs::path record_dir = fs::path(record_path).parent_path();
    if (record_dir.empty()) record_dir = ".";
    fs::path scratch = record_dir / ".replay";
    fs::remove_all(scratch);

    ExperimentConfig cfg = rec.config;
    cfg.out = scratch.string();
    if (threads_override > 0) {
        cfg.threads = threads_override;
        cfg.deterministic = false;
    }
    ResultRecord rerun = run_experiment(cfg);

    if (rerun.config_hash != rec.config_hash)
        rep.diffs.push_back("replay config hash " + rerun.config_hash +
                            " differs from the record's " + rec.config_hash);
    if (rerun.invariant_failures != rec.invariant_failures)
        rep.diffs.push_back("invariant failures differ: record has " +
                            std::to_string(rec.invariant_failures.size()) + ", replay has " +
                            std::to_string(rerun.invariant_failures.size()));
    if (!(rerun.outputs == rec.outputs))
        rep.diffs.push_back("output inventory differs between record and replay");

    for (const RecordOutput& o : rec.outputs) {
        fs::path oldp = record_dir / o.path;
        fs::path newp = scratch / o.path;
        if (!fs::exists(oldp)) {
            rep.diffs.push_back("output '" + o.name + "' (" + o.path +
                                "): missing from the record directory");
            continue;
        }
        if (!fs::exists(newp)) {
            rep.diffs.push_back("output '" + o.name + "' (" + o.path +
                                "): the replay did not produce it");
            continue;
        }
        ++rep.outputs_checked;
        const bool is_csv =
            o.path.size() > 4 && o.path.compare(o.path.size() - 4, 4, ".csv") == 0;
        if (o.kind == "statistical" && is_csv) {
            detail::compare_statistical_csv(o.path, read_csv(oldp.string()),
                                            read_csv(newp.string()), rep.diffs);
        } else {
            if (detail::read_file_bytes(oldp) != detail::read_file_bytes(newp))
                rep.diffs.push_back("output '" + o.name + "' (" + o.path + "): bytes differ");
        }
    }

    if (rep.clean()) fs::remove_all(scratch);
    return rep;
}

} // namespace rcm
