#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleopt/bench.hpp"

namespace ruleopt {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDataError = 3,
    kPartialFailure = 4,
};

struct GlobalOptions {
    std::optional<std::uint64_t> seed; // overrides config seed
    std::string config_path;
    std::string out_dir = ".";
    bool force = false;
};

inline nlohmann::json load_config_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config JSON: " + std::string(e.what()));
    }
    return j;
}

inline BenchmarkConfig resolve_benchmark_config(const GlobalOptions& opts) {
    if (opts.config_path.empty())
        throw ConfigError("this command requires --config <file>");
    BenchmarkConfig cfg = benchmark_config_from_json(load_config_json(opts.config_path));
    if (opts.seed) cfg.seed = *opts.seed;
    return cfg;
}

// ---------------------------------------------------------------------------
// generate: dataset files (cohort CSV + universe + ground-truth sidecar)
// ---------------------------------------------------------------------------

inline int cmd_generate(const GlobalOptions& opts, std::ostream& log = std::cout) {
    BenchmarkConfig cfg = resolve_benchmark_config(opts);
    if (!cfg.synthetic_scenario())
        throw ConfigError("generate requires a synthetic-* scenario");
    if (!(cfg.dataset.hv_fraction > 0.0 && cfg.dataset.hv_fraction < 1.0))
        throw ConfigError("hv_fraction must lie in (0,1)");

    const Dataset ds = materialize_dataset(cfg);
    nlohmann::json gen_info{{"scenario", cfg.scenario},
                            {"n_records", cfg.dataset.n_records},
                            {"hv_fraction", cfg.dataset.hv_fraction},
                            {"seed", cfg.seed}};
    if (cfg.dataset.generation_seed)
        gen_info["generation_seed"] = *cfg.dataset.generation_seed;
    write_dataset(opts.out_dir, ds, gen_info, opts.force);
    log << "wrote dataset to " << opts.out_dir << " (records="
        << ds.cohort.size() << ", atoms=" << ds.universe.size() << ")\n";
    if (ds.planted)
        log << "planted rule: " << decode(*ds.planted, ds.universe) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// run: one optimizer execution
// ---------------------------------------------------------------------------

struct RunOptions {
    std::string method;
    std::string dataset_dir;
    std::size_t min_size = 10;
    bool allow_large_exhaustive = false;
};

inline int cmd_run(const GlobalOptions& opts, const RunOptions& ropts,
                   std::ostream& log = std::cout) {
    Dataset ds = load_dataset(ropts.dataset_dir);

    BenchmarkConfig cfg; // method knob defaults; config file may override
    if (!opts.config_path.empty())
        cfg = benchmark_config_from_json(load_config_json(opts.config_path));
    if (opts.seed) cfg.seed = *opts.seed;
    if (ropts.allow_large_exhaustive) cfg.exhaustive.max_n = ds.universe.size();

    ObjectiveConfig oc;
    oc.min_subgroup_size = ropts.min_size;
    RuleEvaluator evaluator(ds.cohort, ds.universe, oc);

    const ParamDraw params = draw_params(cfg, ropts.min_size, 0);
    const std::uint64_t seed = derive_seed(cfg.seed, ropts.method, ropts.min_size, 0, 0);
    RunRecord rec = dispatch_method(ropts.method, evaluator, cfg, params, seed);
    rec.scenario = "single-run";
    rec.seed = seed;

    std::filesystem::create_directories(opts.out_dir);
    const std::string stem =
        ropts.method + "_ms" + std::to_string(ropts.min_size) + "_s" +
        std::to_string(seed);
    {
        std::ofstream os(std::filesystem::path(opts.out_dir) / (stem + ".jsonl"));
        RunRow row;
        row.method = rec.method;
        row.scenario = rec.scenario;
        row.min_size = ropts.min_size;
        row.seed = rec.seed;
        row.best_fitness = rec.best_fitness;
        row.subgroup_size = rec.subgroup_size;
        row.wall_s = rec.wall_seconds;
        row.rule_bits = rec.best_rule_bits;
        row.rule_text = rec.best_rule_text;
        row.subgroup_hash = rec.subgroup_hash;
        row.feasible = rec.feasible;
        row.dataset_hash = rec.dataset_hash;
        write_runs_jsonl(os, {row}, {rec});
    }
    {
        std::ofstream os(std::filesystem::path(opts.out_dir) / (stem + ".csv"));
        RunRow row;
        row.method = rec.method;
        row.scenario = rec.scenario;
        row.min_size = ropts.min_size;
        row.seed = rec.seed;
        row.best_fitness = rec.best_fitness;
        row.subgroup_size = rec.subgroup_size;
        row.wall_s = rec.wall_seconds;
        row.rule_bits = rec.best_rule_bits;
        row.rule_text = rec.best_rule_text;
        write_runs_csv(os, {row});
    }
    log << rec.method << ": best=" << rec.best_fitness
        << " subgroup=" << rec.subgroup_size << " rule: " << rec.best_rule_text
        << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// bench: the full matrix
// ---------------------------------------------------------------------------

struct BenchOptions {
    unsigned workers = 0; // 0 = take from config
};

inline int cmd_bench(const GlobalOptions& opts, const BenchOptions& bopts,
                     std::ostream& log = std::cout) {
    BenchmarkConfig cfg = resolve_benchmark_config(opts);
    if (bopts.workers > 0) cfg.workers = bopts.workers;

    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);
    for (const char* name : {"runs.csv", "runs.jsonl", "summary.csv", "cells.csv"})
        if (!opts.force && std::filesystem::exists(out / name))
            throw DataError("refusing to overwrite " + (out / name).string() +
                            " (pass --force to allow)");

    const BenchResult result = run_benchmark(cfg, out / "cache");

    {
        std::ofstream os(out / "runs.csv");
        write_runs_csv(os, result.rows);
    }
    {
        std::ofstream os(out / "runs.jsonl");
        write_runs_jsonl(os, result.rows, result.records);
    }
    const auto summaries = compute_method_summaries(result.rows);
    {
        std::ofstream os(out / "summary.csv");
        write_summary_csv(os, summaries);
    }
    {
        std::ofstream os(out / "cells.csv");
        write_cells_csv(os, compute_cell_summaries(result.rows));
    }

    std::size_t failed = 0;
    for (const auto& r : result.rows)
        if (r.failed) ++failed;
    log << "bench: " << result.rows.size() << " runs (" << failed
        << " failed), outputs in " << out.string() << "\n";
    for (const auto& s : summaries)
        log << "  " << s.method << ": mean_fitness=" << s.mean_fitness
            << (s.pct_hit_opt ? " hit%=" + detail::format_double(*s.pct_hit_opt) : "")
            << "\n";
    return result.any_failed ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------------------
// stats: recompute summaries from run files
// ---------------------------------------------------------------------------

inline int cmd_stats(const GlobalOptions& opts, const std::vector<std::string>& files,
                     std::ostream& log = std::cout) {
    if (files.empty()) throw ConfigError("stats requires at least one runs.jsonl file");
    std::vector<RunRow> rows;
    for (const auto& f : files) {
        std::ifstream is(f);
        if (!is) throw DataError("cannot open run file: " + f);
        auto part = read_runs_jsonl(is);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw DataError("no run records found");
    const std::uint64_t ds = rows[0].dataset_hash;
    for (const auto& r : rows)
        if (!r.failed && r.dataset_hash != ds)
            throw DataError("run files mix different datasets (hash mismatch)");

    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);
    {
        std::ofstream os(out / "summary.csv");
        write_summary_csv(os, compute_method_summaries(rows));
    }
    {
        std::ofstream os(out / "cells.csv");
        write_cells_csv(os, compute_cell_summaries(rows));
    }
    log << "stats: " << rows.size() << " runs summarized into " << out.string()
        << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// order-filters: screening-cost sequencing
// ---------------------------------------------------------------------------

inline int cmd_order_filters(const GlobalOptions& opts, const std::string& input,
                             std::ostream& log = std::cout) {
    std::ifstream is(input);
    if (!is) throw DataError("cannot open filter CSV: " + input);
    const auto filters = load_filters_csv(is);
    if (filters.empty()) throw DataError("filter CSV has no rows");
    const auto ordered = optimal_order(filters);

    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);
    const auto out_path = out / "filter_order.csv";
    if (!opts.force && std::filesystem::exists(out_path))
        throw DataError("refusing to overwrite " + out_path.string() +
                        " (pass --force to allow)");
    std::ofstream os(out_path);
    write_order_csv(os, ordered);
    log << "optimal expected cost per molecule: "
        << detail::format_double(expected_cost(ordered)) << " -> "
        << out_path.string() << "\n";
    return kOk;
}

} // namespace ruleopt
