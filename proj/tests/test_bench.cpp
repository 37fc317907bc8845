#include "ruleopt/bench.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "ruleopt/commands.hpp"

using namespace ruleopt;

namespace {

// Small planted benchmark configuration: one 4-level field plus three binary
// fields (10 atoms), 240 records.
BenchmarkConfig small_config() {
    BenchmarkConfig cfg;
    cfg.scenario = "synthetic-discrete";
    cfg.repeats = 2;
    cfg.min_sizes = {8, 12};
    cfg.param_draws = 2;
    cfg.methods = {"greedy", "exhaustive"};
    cfg.seed = 1234;
    cfg.dataset.schema.categorical = {{"A", {"a0", "a1", "a2", "a3"}},
                                      {"B", {"b0", "b1"}},
                                      {"C", {"c0", "c1"}},
                                      {"D", {"d0", "d1"}}};
    cfg.dataset.n_records = 240;
    cfg.dataset.hv_fraction = 0.25;
    cfg.dataset.generation_seed = 99;
    cfg.dataset.plants = {Plant{{0, 4}, 3.0}};
    cfg.dataset.plant_min_subgroup = 12;
    cfg.ga.population_min = 20;
    cfg.ga.population_max = 30;
    cfg.ga.generations_min = 5;
    cfg.ga.generations_max = 10;
    cfg.bo.budget_min = 15;
    cfg.bo.budget_max = 20;
    return cfg;
}

TEST(SeedDerivation, PureAndCollisionFree) {
    EXPECT_EQ(derive_seed(7, "ga", 10, 1, 2), derive_seed(7, "ga", 10, 1, 2));
    std::set<std::uint64_t> seen;
    for (const char* m : {"ga", "ga-quotient", "bo", "greedy"})
        for (std::size_t ms : {10u, 20u, 30u})
            for (int p = 0; p < 5; ++p)
                for (int r = 0; r < 20; ++r)
                    seen.insert(derive_seed(42, m, ms, p, r));
    EXPECT_EQ(seen.size(), 4u * 3u * 5u * 20u);
    EXPECT_NE(derive_seed(1, "ga", 10, 0, 0), derive_seed(2, "ga", 10, 0, 0));
}

TEST(ParamDraws, WithinRangesAndDeterministic) {
    const BenchmarkConfig cfg = small_config();
    for (int p = 0; p < 10; ++p) {
        const ParamDraw a = draw_params(cfg, 8, p);
        const ParamDraw b = draw_params(cfg, 8, p);
        EXPECT_EQ(a.population, b.population);
        EXPECT_EQ(a.generations, b.generations);
        EXPECT_EQ(a.bo_budget, b.bo_budget);
        EXPECT_GE(a.population, 20u);
        EXPECT_LE(a.population, 30u);
        EXPECT_GE(a.generations, 5);
        EXPECT_LE(a.generations, 10);
        EXPECT_GE(a.bo_budget, 15u);
        EXPECT_LE(a.bo_budget, 20u);
    }
}

TEST(ConfigJson, RoundTripAndValidation) {
    const std::string text = R"({
      "scenario": "synthetic-discrete",
      "repeats": 3,
      "min_sizes": [5, 9],
      "param_draws": 2,
      "methods": ["ga", "greedy"],
      "seed": 7,
      "dataset": {
        "schema": {"categorical": [{"name": "A", "levels": ["x", "y"]}],
                    "numeric": [], "biomarker": "bm"},
        "n_records": 60,
        "hv_fraction": 0.3,
        "planted": {"atoms": [0], "effect": 2.0},
        "plant_min_subgroup": 5
      },
      "equivalence": {"epsilon": 0.05, "min_pts": 2, "tau": 5}
    })";
    const BenchmarkConfig cfg = benchmark_config_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(cfg.repeats, 3);
    EXPECT_EQ(cfg.min_sizes, (std::vector<std::size_t>{5, 9}));
    EXPECT_EQ(cfg.methods, (std::vector<std::string>{"ga", "greedy"}));
    EXPECT_DOUBLE_EQ(cfg.equivalence.epsilon, 0.05);
    ASSERT_EQ(cfg.dataset.plants.size(), 1u);
    EXPECT_DOUBLE_EQ(cfg.dataset.plants[0].effect, 2.0);

    auto bad = nlohmann::json::parse(text);
    bad["scenario"] = "weird";
    EXPECT_THROW(benchmark_config_from_json(bad), ConfigError);
    bad = nlohmann::json::parse(text);
    bad["methods"] = {"annealing"};
    EXPECT_THROW(benchmark_config_from_json(bad), ConfigError);
    bad = nlohmann::json::parse(text);
    bad["dataset"]["schema"]["numeric"] = {{{"name", "x"}, {"min", 0.0}, {"max", 1.0}}};
    EXPECT_THROW(benchmark_config_from_json(bad), ConfigError);
}

TEST(Matrix, RowCountOrderingAndOracleColumns) {
    const BenchmarkConfig cfg = small_config();
    const BenchResult result = run_benchmark(cfg);
    // methods x min_sizes x param_draws x repeats
    ASSERT_EQ(result.rows.size(), 2u * 2u * 2u * 2u);
    // Row order: method-major, then min_size, param, repeat.
    EXPECT_EQ(result.rows[0].method, "greedy");
    EXPECT_EQ(result.rows[8].method, "exhaustive");
    EXPECT_EQ(result.rows[0].min_size, 8u);
    EXPECT_EQ(result.rows[4].min_size, 12u);

    ASSERT_EQ(result.oracles.size(), 2u);
    for (const auto& row : result.rows) {
        ASSERT_FALSE(row.failed) << row.fail_msg;
        ASSERT_TRUE(row.ratio_to_opt.has_value());
        EXPECT_LE(*row.ratio_to_opt, 1.0 + 1e-9);
        if (row.method == "exhaustive") {
            EXPECT_EQ(*row.hit_opt, 1);
            EXPECT_NEAR(*row.ratio_to_opt, 1.0, 1e-12);
        }
    }
}

TEST(Matrix, DeterministicRerunsByteIdenticalModuloWallTime) {
    const BenchmarkConfig cfg = small_config();
    const BenchResult a = run_benchmark(cfg);
    const BenchResult b = run_benchmark(cfg);
    std::ostringstream csv_a, csv_b;
    write_runs_csv(csv_a, a.rows);
    write_runs_csv(csv_b, b.rows);
    // Strip the wall_s column (index 10); wall-clock time is the only
    // nondeterministic field.
    auto strip_wall = [](const std::string& text) {
        std::istringstream is(text);
        std::string line, out;
        while (std::getline(is, line)) {
            const auto rows = csv::parse_line(line);
            std::string rebuilt;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (i == 10) continue;
                rebuilt += rows[i];
                rebuilt += '|';
            }
            out += rebuilt + "\n";
        }
        return out;
    };
    EXPECT_EQ(strip_wall(csv_a.str()), strip_wall(csv_b.str()));
}

TEST(Matrix, WorkerCountDoesNotChangeResults) {
    BenchmarkConfig cfg = small_config();
    const BenchResult serial = run_benchmark(cfg);
    cfg.workers = 3;
    const BenchResult parallel = run_benchmark(cfg);
    ASSERT_EQ(serial.rows.size(), parallel.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        EXPECT_EQ(serial.rows[i].method, parallel.rows[i].method);
        EXPECT_EQ(serial.rows[i].seed, parallel.rows[i].seed);
        EXPECT_EQ(serial.rows[i].best_fitness, parallel.rows[i].best_fitness);
        EXPECT_EQ(serial.rows[i].rule_bits, parallel.rows[i].rule_bits);
    }
}

TEST(Stats, CellRowCountMatchesMinSizesTimesParamDraws) {
    BenchmarkConfig cfg = small_config();
    cfg.repeats = 1;
    cfg.methods = {"greedy"};
    const BenchResult result = run_benchmark(cfg);
    const auto cells = compute_cell_summaries(result.rows);
    EXPECT_EQ(cells.size(), cfg.min_sizes.size() * static_cast<std::size_t>(
                                                       cfg.param_draws));
}

TEST(Stats, HandComputedRatiosAndHits) {
    RunRow a;
    a.method = "ga";
    a.scenario = "synthetic-discrete";
    a.min_size = 10;
    a.best_fitness = 4.0;
    a.ratio_to_opt = 1.0;
    a.hit_opt = 1;
    a.subgroup_hash = "s1";
    a.wall_s = 1.0;
    RunRow b = a;
    b.repeat = 1;
    b.best_fitness = 2.0;
    b.ratio_to_opt = 0.5;
    b.hit_opt = 0;
    b.subgroup_hash = "s2";
    const auto summaries = compute_method_summaries({a, b});
    ASSERT_EQ(summaries.size(), 1u);
    const MethodSummary& s = summaries[0];
    EXPECT_EQ(s.runs, 2u);
    EXPECT_DOUBLE_EQ(s.mean_fitness, 3.0);
    ASSERT_TRUE(s.mean_ratio);
    EXPECT_DOUBLE_EQ(*s.mean_ratio, 0.75);
    ASSERT_TRUE(s.median_ratio);
    EXPECT_DOUBLE_EQ(*s.median_ratio, 0.75);
    ASSERT_TRUE(s.pct_hit_opt);
    EXPECT_DOUBLE_EQ(*s.pct_hit_opt, 50.0);
    EXPECT_EQ(s.unique_solutions, 2u);
}

TEST(Stats, IdenticalFitnessGivesZeroCv) {
    std::vector<RunRow> rows;
    for (int r = 0; r < 4; ++r) {
        RunRow row;
        row.method = "greedy";
        row.scenario = "synthetic-discrete";
        row.min_size = 10;
        row.repeat = r;
        row.best_fitness = 2.5;
        row.subgroup_hash = "same";
        rows.push_back(row);
    }
    const auto summaries = compute_method_summaries(rows);
    ASSERT_EQ(summaries.size(), 1u);
    EXPECT_DOUBLE_EQ(summaries[0].cv, 0.0);
    EXPECT_EQ(summaries[0].unique_solutions, 1u);
}

TEST(Stats, FailedRunsExcludedAndCounted) {
    RunRow ok;
    ok.method = "ga";
    ok.scenario = "s";
    ok.best_fitness = 2.0;
    ok.subgroup_hash = "x";
    RunRow bad = ok;
    bad.failed = true;
    bad.fail_msg = "boom";
    const auto summaries = compute_method_summaries({ok, bad});
    ASSERT_EQ(summaries.size(), 1u);
    EXPECT_EQ(summaries[0].runs, 1u);
    EXPECT_EQ(summaries[0].excluded, 1u);
    EXPECT_DOUBLE_EQ(summaries[0].mean_fitness, 2.0);
}

TEST(Jsonl, RoundTripPreservesRows) {
    const BenchmarkConfig cfg = small_config();
    const BenchResult result = run_benchmark(cfg);
    std::ostringstream os;
    write_runs_jsonl(os, result.rows, result.records);
    std::istringstream is(os.str());
    const auto back = read_runs_jsonl(is);
    ASSERT_EQ(back.size(), result.rows.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].method, result.rows[i].method);
        EXPECT_EQ(back[i].min_size, result.rows[i].min_size);
        EXPECT_EQ(back[i].param_idx, result.rows[i].param_idx);
        EXPECT_EQ(back[i].repeat, result.rows[i].repeat);
        EXPECT_EQ(back[i].seed, result.rows[i].seed);
        EXPECT_EQ(back[i].best_fitness, result.rows[i].best_fitness);
        EXPECT_EQ(back[i].subgroup_hash, result.rows[i].subgroup_hash);
        EXPECT_EQ(back[i].ratio_to_opt.has_value(),
                  result.rows[i].ratio_to_opt.has_value());
    }
    // Summaries recomputed from the file match in-memory summaries.
    const auto from_file = compute_method_summaries(back);
    const auto in_memory = compute_method_summaries(result.rows);
    ASSERT_EQ(from_file.size(), in_memory.size());
    for (std::size_t i = 0; i < from_file.size(); ++i) {
        EXPECT_EQ(from_file[i].method, in_memory[i].method);
        EXPECT_DOUBLE_EQ(from_file[i].mean_fitness, in_memory[i].mean_fitness);
        EXPECT_EQ(from_file[i].unique_solutions, in_memory[i].unique_solutions);
    }
}

TEST(DatasetIO, WriteLoadVerifyAndTamperDetection) {
    const BenchmarkConfig cfg = small_config();
    const Dataset ds = materialize_dataset(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "ruleopt_ds_test";
    std::filesystem::remove_all(dir);
    write_dataset(dir, ds, {{"note", "test"}}, false);

    // Overwrite refused without force.
    EXPECT_THROW(write_dataset(dir, ds, {}, false), DataError);
    EXPECT_NO_THROW(write_dataset(dir, ds, {}, true));

    const Dataset loaded = load_dataset(dir);
    EXPECT_EQ(loaded.hash(), ds.hash());
    ASSERT_TRUE(loaded.planted.has_value());
    EXPECT_EQ(loaded.planted->to_string(), ds.planted->to_string());

    // Tamper with the cohort: hash verification must fail.
    {
        std::ofstream os(dir / "cohort.csv", std::ios::app);
        os << "zz,false,a0,b0,c0,d0,9.9\n";
    }
    EXPECT_THROW(load_dataset(dir), DataError);
    std::filesystem::remove_all(dir);
}

TEST(Commands, StatsRejectsMixedDatasets) {
    const auto dir = std::filesystem::temp_directory_path() / "ruleopt_stats_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    BenchmarkConfig cfg = small_config();
    cfg.methods = {"greedy"};
    cfg.repeats = 1;
    cfg.param_draws = 1;
    const BenchResult r1 = run_benchmark(cfg);
    cfg.dataset.generation_seed = 100; // different dataset
    const BenchResult r2 = run_benchmark(cfg);

    {
        std::ofstream os(dir / "a.jsonl");
        write_runs_jsonl(os, r1.rows, r1.records);
    }
    {
        std::ofstream os(dir / "b.jsonl");
        write_runs_jsonl(os, r2.rows, r2.records);
    }
    GlobalOptions opts;
    opts.out_dir = (dir / "out").string();
    EXPECT_THROW(cmd_stats(opts, {(dir / "a.jsonl").string(),
                                  (dir / "b.jsonl").string()}),
                 DataError);
    // A single dataset is fine.
    EXPECT_EQ(cmd_stats(opts, {(dir / "a.jsonl").string()}), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "summary.csv"));
    std::filesystem::remove_all(dir);
}

TEST(Commands, OrderFiltersWritesOutput) {
    const auto dir = std::filesystem::temp_directory_path() / "ruleopt_of_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "filters.csv");
        os << "id,cost,selectivity\nf1,1,0.9\nf2,10,0.1\n";
    }
    GlobalOptions opts;
    opts.out_dir = dir.string();
    std::ostringstream log;
    EXPECT_EQ(cmd_order_filters(opts, (dir / "filters.csv").string(), log), 0);
    std::ifstream is(dir / "filter_order.csv");
    std::string first_line, second_line;
    std::getline(is, first_line);
    std::getline(is, second_line);
    EXPECT_NE(second_line.find("f1"), std::string::npos); // cheap+selective first
    EXPECT_NE(log.str().find("optimal expected cost"), std::string::npos);
    // Overwrite refused without force.
    EXPECT_THROW(cmd_order_filters(opts, (dir / "filters.csv").string(), log),
                 DataError);
    std::filesystem::remove_all(dir);
}

TEST(Commands, GenerateRefusesOverwriteWithoutForce) {
    const auto dir = std::filesystem::temp_directory_path() / "ruleopt_gen_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto cfg_path = dir / "cfg.json";
    {
        nlohmann::json j;
        j["scenario"] = "synthetic-discrete";
        j["seed"] = 5;
        j["dataset"]["schema"] =
            schema_to_json(small_config().dataset.schema);
        j["dataset"]["n_records"] = 120;
        j["dataset"]["hv_fraction"] = 0.25;
        std::ofstream os(cfg_path);
        os << j.dump();
    }
    GlobalOptions opts;
    opts.config_path = cfg_path.string();
    opts.out_dir = (dir / "ds").string();
    std::ostringstream log;
    EXPECT_EQ(cmd_generate(opts, log), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "ds" / "cohort.csv"));
    EXPECT_THROW(cmd_generate(opts, log), DataError);
    opts.force = true;
    EXPECT_EQ(cmd_generate(opts, log), 0);
    std::filesystem::remove_all(dir);
}

} // namespace
