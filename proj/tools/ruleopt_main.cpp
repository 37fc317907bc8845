// ruleopt command-line interface: dataset generation, single optimizer runs,
// the benchmark matrix, statistics, and screening-filter ordering.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ruleopt/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ruleopt: conjunctive-rule subgroup discovery benchmarks"};
    app.require_subcommand(1);

    ruleopt::GlobalOptions opts;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed_flag = s; seed_given = true; },
           "Base seed (overrides the config file)");
    app.add_option("--config", opts.config_path, "JSON configuration file");
    app.add_option("--out", opts.out_dir, "Output directory");
    app.add_flag("--force", opts.force, "Allow overwriting existing outputs");

    auto* generate = app.add_subcommand(
        "generate", "Generate a synthetic dataset (cohort CSV, universe, sidecar)");

    ruleopt::RunOptions ropts;
    auto* run = app.add_subcommand("run", "Run one optimizer on a dataset");
    run->add_option("--method", ropts.method,
                    "ga | ga-quotient | bo | bo-quotient | greedy | exhaustive")
        ->required();
    run->add_option("--dataset", ropts.dataset_dir, "Dataset directory")->required();
    run->add_option("--min-size", ropts.min_size, "Minimum subgroup size");
    run->add_flag("--allow-large-exhaustive", ropts.allow_large_exhaustive,
                  "Lift the exhaustive-search universe cap");

    ruleopt::BenchOptions bopts;
    auto* bench =
        app.add_subcommand("bench", "Run the full benchmark matrix from a config");
    bench->add_option("--workers", bopts.workers, "Concurrent benchmark cells");

    std::vector<std::string> stat_files;
    auto* stats = app.add_subcommand("stats", "Summarize run files (runs.jsonl)");
    stats->add_option("files", stat_files, "Run files")->required();

    std::string filters_input;
    auto* order = app.add_subcommand("order-filters",
                                     "Cost-optimal screening filter ordering");
    order->add_option("--input", filters_input, "Filter CSV (id,cost,selectivity)")
        ->required();

    CLI11_PARSE(app, argc, argv);
    if (seed_given) opts.seed = seed_flag;

    try {
        if (generate->parsed()) return ruleopt::cmd_generate(opts);
        if (run->parsed()) return ruleopt::cmd_run(opts, ropts);
        if (bench->parsed()) return ruleopt::cmd_bench(opts, bopts);
        if (stats->parsed()) return ruleopt::cmd_stats(opts, stat_files);
        if (order->parsed()) return ruleopt::cmd_order_filters(opts, filters_input);
    } catch (const ruleopt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ruleopt::kConfigError;
    } catch (const ruleopt::CapExceededError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ruleopt::kConfigError;
    } catch (const ruleopt::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return ruleopt::kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
