#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ruleopt/baselines.hpp"
#include "ruleopt/bo.hpp"
#include "ruleopt/cohort.hpp"
#include "ruleopt/detail/format.hpp"
#include "ruleopt/detail/hash.hpp"
#include "ruleopt/errors.hpp"
#include "ruleopt/ga.hpp"
#include "ruleopt/objective.hpp"
#include "ruleopt/runrecord.hpp"
#include "ruleopt/screening.hpp"

namespace ruleopt {

// ---------------------------------------------------------------------------
// Schema <-> JSON
// ---------------------------------------------------------------------------

inline nlohmann::json schema_to_json(const Schema& s) {
    nlohmann::json j;
    j["categorical"] = nlohmann::json::array();
    for (const auto& f : s.categorical)
        j["categorical"].push_back({{"name", f.name}, {"levels", f.levels}});
    j["numeric"] = nlohmann::json::array();
    for (const auto& f : s.numeric)
        j["numeric"].push_back({{"name", f.name}, {"min", f.min}, {"max", f.max}});
    j["biomarker"] = s.biomarker_field;
    return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
    Schema s;
    for (const auto& f : j.value("categorical", nlohmann::json::array())) {
        CategoricalField cf;
        cf.name = f.at("name").get<std::string>();
        cf.levels = f.at("levels").get<std::vector<std::string>>();
        s.categorical.push_back(std::move(cf));
    }
    for (const auto& f : j.value("numeric", nlohmann::json::array())) {
        NumericField nf;
        nf.name = f.at("name").get<std::string>();
        nf.min = f.at("min").get<double>();
        nf.max = f.at("max").get<double>();
        s.numeric.push_back(nf);
    }
    s.biomarker_field = j.value("biomarker", std::string{"biomarker"});
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Benchmark configuration
// ---------------------------------------------------------------------------

struct DatasetSpec {
    std::string path; // file-* scenarios: directory with cohort/universe/manifest

    // synthetic-* scenarios:
    Schema schema;
    std::size_t n_records = 500;
    double hv_fraction = 0.2;
    std::optional<std::uint64_t> generation_seed;
    SyntheticConfig synthetic{};
    UniverseConfig universe_cfg{};
    std::vector<Plant> plants;
    std::size_t plant_min_subgroup = 30;
};

struct GAParamSpace {
    double crossover_prob = 0.8; // fixed per benchmark protocol
    double mutation_prob = 0.1;
    std::size_t population_min = 50;
    std::size_t population_max = 100;
    int generations_min = 20;
    int generations_max = 150;
    int tournament_size = 3;
};

struct BOParamSpace {
    std::size_t budget_min = 40;
    std::size_t budget_max = 100;
    std::size_t initial_design = 10;
};

struct BenchmarkConfig {
    std::string scenario = "synthetic-discrete";
    int repeats = 20;
    std::vector<std::size_t> min_sizes{10, 20, 30};
    int param_draws = 5;
    std::vector<std::string> methods{"ga", "ga-quotient", "bo", "bo-quotient",
                                     "greedy", "exhaustive"};
    std::uint64_t seed = 0;
    DatasetSpec dataset;
    GAParamSpace ga;
    BOParamSpace bo;
    EquivalenceConfig equivalence{};
    ExhaustiveConfig exhaustive{};
    unsigned workers = 1;

    bool discrete_scenario() const {
        return scenario == "synthetic-discrete" || scenario == "file-discrete";
    }

    bool synthetic_scenario() const {
        return scenario == "synthetic-discrete" || scenario == "synthetic-mixed";
    }

    void validate() const {
        if (scenario != "synthetic-discrete" && scenario != "synthetic-mixed" &&
            scenario != "file-discrete" && scenario != "file-mixed")
            throw ConfigError("unknown scenario '" + scenario + "'");
        if (repeats < 1) throw ConfigError("repeats must be >= 1");
        if (param_draws < 1) throw ConfigError("param_draws must be >= 1");
        if (min_sizes.empty()) throw ConfigError("min_sizes must be nonempty");
        if (methods.empty()) throw ConfigError("methods must be nonempty");
        for (const auto& m : methods)
            if (m != "ga" && m != "ga-quotient" && m != "bo" && m != "bo-quotient" &&
                m != "greedy" && m != "exhaustive")
                throw ConfigError("unknown method '" + m + "'");
        if (!synthetic_scenario() && dataset.path.empty())
            throw ConfigError("file scenario requires dataset.path");
        if (synthetic_scenario() && scenario == "synthetic-discrete" &&
            !dataset.schema.numeric.empty())
            throw ConfigError(
                "synthetic-discrete requires a categorical-only schema (the "
                "exhaustive oracle is defined on the discrete universe)");
        equivalence.validate();
    }
};

inline BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
    BenchmarkConfig c;
    c.scenario = j.value("scenario", c.scenario);
    c.repeats = j.value("repeats", c.repeats);
    if (j.contains("min_sizes"))
        c.min_sizes = j.at("min_sizes").get<std::vector<std::size_t>>();
    c.param_draws = j.value("param_draws", c.param_draws);
    if (j.contains("methods"))
        c.methods = j.at("methods").get<std::vector<std::string>>();
    c.seed = j.value("seed", c.seed);

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        c.dataset.path = d.value("path", std::string{});
        if (d.contains("schema")) c.dataset.schema = schema_from_json(d.at("schema"));
        c.dataset.n_records = d.value("n_records", c.dataset.n_records);
        c.dataset.hv_fraction = d.value("hv_fraction", c.dataset.hv_fraction);
        if (d.contains("generation_seed"))
            c.dataset.generation_seed = d.at("generation_seed").get<std::uint64_t>();
        if (d.contains("biomarker_range")) {
            const auto r = d.at("biomarker_range").get<std::vector<double>>();
            if (r.size() != 2) throw ConfigError("biomarker_range needs two values");
            c.dataset.synthetic.biomarker_min = r[0];
            c.dataset.synthetic.biomarker_max = r[1];
        }
        c.dataset.universe_cfg.quantile_points =
            d.value("quantile_points", c.dataset.universe_cfg.quantile_points);
        c.dataset.plant_min_subgroup =
            d.value("plant_min_subgroup", c.dataset.plant_min_subgroup);
        auto parse_plant = [](const nlohmann::json& p) {
            Plant plant;
            for (const auto& a : p.at("atoms")) plant.atoms.insert(a.get<std::size_t>());
            plant.effect = p.value("effect", 1.0);
            return plant;
        };
        if (d.contains("planted")) c.dataset.plants.push_back(parse_plant(d.at("planted")));
        if (d.contains("plants"))
            for (const auto& p : d.at("plants")) c.dataset.plants.push_back(parse_plant(p));
    }

    if (j.contains("ga")) {
        const auto& g = j.at("ga");
        c.ga.crossover_prob = g.value("crossover_prob", c.ga.crossover_prob);
        c.ga.mutation_prob = g.value("mutation_prob", c.ga.mutation_prob);
        if (g.contains("population_range")) {
            const auto r = g.at("population_range").get<std::vector<std::size_t>>();
            if (r.size() != 2 || r[0] > r[1] || r[0] < 2)
                throw ConfigError("invalid population_range");
            c.ga.population_min = r[0];
            c.ga.population_max = r[1];
        }
        if (g.contains("generation_range")) {
            const auto r = g.at("generation_range").get<std::vector<int>>();
            if (r.size() != 2 || r[0] > r[1] || r[0] < 1)
                throw ConfigError("invalid generation_range");
            c.ga.generations_min = r[0];
            c.ga.generations_max = r[1];
        }
        c.ga.tournament_size = g.value("tournament_size", c.ga.tournament_size);
    }

    if (j.contains("bo")) {
        const auto& b = j.at("bo");
        if (b.contains("budget_range")) {
            const auto r = b.at("budget_range").get<std::vector<std::size_t>>();
            if (r.size() != 2 || r[0] > r[1]) throw ConfigError("invalid budget_range");
            c.bo.budget_min = r[0];
            c.bo.budget_max = r[1];
        }
        c.bo.initial_design = b.value("initial_design", c.bo.initial_design);
    }

    if (j.contains("equivalence")) {
        const auto& e = j.at("equivalence");
        c.equivalence.epsilon = e.value("epsilon", c.equivalence.epsilon);
        c.equivalence.min_pts = e.value("min_pts", c.equivalence.min_pts);
        c.equivalence.tau = e.value("tau", c.equivalence.tau);
    }

    if (j.contains("exhaustive")) {
        const auto& e = j.at("exhaustive");
        c.exhaustive.max_n = e.value("max_n", c.exhaustive.max_n);
    }

    c.workers = j.value("workers", c.workers);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Datasets on disk
// ---------------------------------------------------------------------------

struct Dataset {
    Cohort cohort;
    RuleUniverse universe;
    std::optional<BitRule> planted;

    std::uint64_t hash() const {
        return detail::fnv1a_u64(cohort_hash(cohort), universe.content_hash());
    }
};

/// Builds the dataset a benchmark config describes (generating or loading).
inline Dataset materialize_dataset(const BenchmarkConfig& cfg);

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                          const nlohmann::json& generation_info, bool force) {
    std::filesystem::create_directories(dir);
    const auto cohort_path = dir / "cohort.csv";
    const auto universe_path = dir / "universe.tsv";
    const auto manifest_path = dir / "manifest.json";
    for (const auto& p : {cohort_path, universe_path, manifest_path})
        if (!force && std::filesystem::exists(p))
            throw DataError("refusing to overwrite " + p.string() +
                            " (pass --force to allow)");

    {
        std::ofstream os(cohort_path);
        write_csv(os, ds.cohort);
    }
    {
        std::ofstream os(universe_path);
        ds.universe.serialize(os);
    }
    nlohmann::json manifest;
    manifest["schema"] = schema_to_json(ds.cohort.schema);
    manifest["cohort_hash"] = detail::hex64(cohort_hash(ds.cohort));
    manifest["universe_hash"] = detail::hex64(ds.universe.content_hash());
    manifest["generation"] = generation_info;
    std::ofstream os(manifest_path);
    os << manifest.dump(2) << "\n";

    if (ds.planted) {
        nlohmann::json sidecar;
        sidecar["planted_bits"] = ds.planted->to_string();
        sidecar["planted_text"] = decode(*ds.planted, ds.universe);
        std::ofstream ps(dir / "planted.json");
        ps << sidecar.dump(2) << "\n";
    }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw DataError("dataset manifest not found: " + manifest_path.string());
    nlohmann::json manifest;
    {
        std::ifstream is(manifest_path);
        is >> manifest;
    }
    Dataset ds;
    const Schema schema = schema_from_json(manifest.at("schema"));
    {
        std::ifstream is(dir / "cohort.csv");
        if (!is) throw DataError("cannot open " + (dir / "cohort.csv").string());
        ds.cohort = load_csv(is, schema);
    }
    {
        std::ifstream is(dir / "universe.tsv");
        if (!is) throw DataError("cannot open " + (dir / "universe.tsv").string());
        ds.universe = RuleUniverse::parse(is);
    }
    const std::string want_cohort = manifest.value("cohort_hash", std::string{});
    const std::string want_universe = manifest.value("universe_hash", std::string{});
    if (!want_cohort.empty() &&
        want_cohort != detail::hex64(cohort_hash(ds.cohort)))
        throw DataError("dataset hash mismatch: cohort.csv does not match manifest");
    if (!want_universe.empty() &&
        want_universe != detail::hex64(ds.universe.content_hash()))
        throw DataError("dataset hash mismatch: universe.tsv does not match manifest");

    const auto planted_path = dir / "planted.json";
    if (std::filesystem::exists(planted_path)) {
        nlohmann::json sidecar;
        std::ifstream is(planted_path);
        is >> sidecar;
        ds.planted =
            BitRule::from_string(sidecar.at("planted_bits").get<std::string>());
    }
    return ds;
}

inline Dataset materialize_dataset(const BenchmarkConfig& cfg) {
    if (!cfg.synthetic_scenario()) return load_dataset(cfg.dataset.path);

    const std::uint64_t gen_seed =
        cfg.dataset.generation_seed
            ? *cfg.dataset.generation_seed
            : detail::mix64(detail::fnv1a("dataset", detail::fnv1a_u64(cfg.seed)));

    Dataset ds;
    if (cfg.dataset.plants.empty()) {
        ds.cohort = generate_synthetic(cfg.dataset.schema, cfg.dataset.n_records,
                                       cfg.dataset.hv_fraction, gen_seed,
                                       cfg.dataset.synthetic);
        ds.universe = build_universe(ds.cohort, cfg.dataset.universe_cfg);
    } else {
        PlantedDataset pd = generate_planted(
            cfg.dataset.schema, cfg.dataset.n_records, cfg.dataset.hv_fraction,
            gen_seed, cfg.dataset.plants, cfg.dataset.plant_min_subgroup,
            cfg.dataset.synthetic, cfg.dataset.universe_cfg);
        ds.cohort = std::move(pd.cohort);
        ds.universe = std::move(pd.universe);
        ds.planted = pd.planted_rule;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Seeds and parameter draws
// ---------------------------------------------------------------------------

/// Pure function of (base seed, method, min_size, param index, repeat index);
/// distinct cells get distinct streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view method,
                                 std::size_t min_size, int param_idx, int repeat) {
    std::uint64_t h = detail::fnv1a("ruleopt-cell-seed");
    h = detail::fnv1a_u64(base, h);
    h = detail::fnv1a(method, h);
    h = detail::fnv1a_u64(min_size, h);
    h = detail::fnv1a_u64(static_cast<std::uint64_t>(param_idx), h);
    h = detail::fnv1a_u64(static_cast<std::uint64_t>(repeat), h);
    return detail::mix64(h);
}

struct ParamDraw {
    std::size_t population = 50;
    int generations = 60;
    std::size_t bo_budget = 80;
};

/// Uniform draw from the configured ranges; one draw per
/// (base seed, min_size, param index).
inline ParamDraw draw_params(const BenchmarkConfig& cfg, std::size_t min_size,
                             int param_idx) {
    Rng rng(derive_seed(cfg.seed, "params", min_size, param_idx, 0));
    ParamDraw d;
    d.population = cfg.ga.population_min +
                   rng.uniform_index(cfg.ga.population_max - cfg.ga.population_min + 1);
    d.generations =
        cfg.ga.generations_min +
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
            cfg.ga.generations_max - cfg.ga.generations_min + 1)));
    d.bo_budget = cfg.bo.budget_min +
                  rng.uniform_index(cfg.bo.budget_max - cfg.bo.budget_min + 1);
    return d;
}

// ---------------------------------------------------------------------------
// Benchmark rows and the matrix runner
// ---------------------------------------------------------------------------

struct RunRow {
    std::string method;
    std::string scenario;
    std::size_t min_size = 0;
    int param_idx = 0;
    int repeat = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string fail_msg;
    double best_fitness = 0.0;
    std::size_t subgroup_size = 0;
    std::optional<double> ratio_to_opt;
    std::optional<int> hit_opt;
    double wall_s = 0.0;
    std::string rule_bits;
    std::string rule_text;
    std::string subgroup_hash;
    bool feasible = false;
    std::uint64_t dataset_hash = 0;
};

struct BenchResult {
    Dataset dataset;
    std::vector<RunRow> rows;
    std::vector<RunRecord> records; // aligned with rows (failed rows: minimal)
    std::map<std::size_t, ExhaustiveResult> oracles;
    bool any_failed = false;
};

inline RunRecord dispatch_method(const std::string& method,
                                 const RuleEvaluator& evaluator,
                                 const BenchmarkConfig& cfg, const ParamDraw& params,
                                 std::uint64_t seed) {
    if (method == "ga" || method == "ga-quotient") {
        GAConfig g;
        g.population_size = params.population;
        g.generations = params.generations;
        g.crossover_prob = cfg.ga.crossover_prob;
        g.mutation_prob = cfg.ga.mutation_prob;
        g.quotient_aware = (method == "ga-quotient");
        g.equivalence = cfg.equivalence;
        g.seed = seed;
        g.tournament_size = cfg.ga.tournament_size;
        RunRecord rec = run_ga(evaluator, g);
        nlohmann::json cj{{"population", g.population_size},
                          {"generations", g.generations},
                          {"crossover_prob", g.crossover_prob},
                          {"mutation_prob", g.mutation_prob},
                          {"quotient_aware", g.quotient_aware},
                          {"epsilon", g.equivalence.epsilon},
                          {"min_pts", g.equivalence.min_pts},
                          {"tau", g.equivalence.tau}};
        rec.config_json = cj.dump();
        return rec;
    }
    if (method == "bo" || method == "bo-quotient") {
        BOConfig b;
        b.budget = params.bo_budget;
        b.initial_design = cfg.bo.initial_design;
        b.quotient_aware = (method == "bo-quotient");
        b.equivalence = cfg.equivalence;
        b.seed = seed;
        RunRecord rec = run_bo(evaluator, b);
        nlohmann::json cj{{"budget", b.budget},
                          {"initial_design", b.initial_design},
                          {"quotient_aware", b.quotient_aware},
                          {"epsilon", b.equivalence.epsilon},
                          {"min_pts", b.equivalence.min_pts}};
        rec.config_json = cj.dump();
        return rec;
    }
    if (method == "greedy") return greedy_search(evaluator);
    if (method == "exhaustive") return exhaustive_run(evaluator, cfg.exhaustive);
    throw ConfigError("unknown method '" + method + "'");
}

/// Runs the full matrix (methods x min_sizes x param_draws x repeats) with
/// per-cell seeds derived from the base seed. Discrete scenarios also run the
/// oracle once per min_size. Failed runs are recorded, excluded from
/// aggregation, and flip any_failed.
inline BenchResult run_benchmark(const BenchmarkConfig& cfg,
                                 const std::filesystem::path& oracle_cache = {}) {
    cfg.validate();
    BenchResult result;
    result.dataset = materialize_dataset(cfg);
    const std::uint64_t ds_hash = result.dataset.hash();

    std::map<std::size_t, std::unique_ptr<RuleEvaluator>> evaluators;
    for (std::size_t ms : cfg.min_sizes) {
        ObjectiveConfig oc;
        oc.min_subgroup_size = ms;
        evaluators.emplace(ms, std::make_unique<RuleEvaluator>(
                                   result.dataset.cohort, result.dataset.universe, oc));
    }

    if (cfg.discrete_scenario()) {
        for (std::size_t ms : cfg.min_sizes) {
            if (oracle_cache.empty())
                result.oracles[ms] =
                    exhaustive_search(*evaluators.at(ms), cfg.exhaustive);
            else
                result.oracles[ms] = exhaustive_search_cached(
                    *evaluators.at(ms), oracle_cache, cfg.exhaustive);
        }
    }

    struct Cell {
        std::string method;
        std::size_t min_size;
        int param_idx;
        int repeat;
    };
    std::vector<Cell> cells;
    for (const auto& method : cfg.methods)
        for (std::size_t ms : cfg.min_sizes)
            for (int p = 0; p < cfg.param_draws; ++p)
                for (int r = 0; r < cfg.repeats; ++r)
                    cells.push_back(Cell{method, ms, p, r});

    result.rows.resize(cells.size());
    result.records.resize(cells.size());

    auto run_cell = [&](std::size_t idx) {
        const Cell& cell = cells[idx];
        RunRow row;
        row.method = cell.method;
        row.scenario = cfg.scenario;
        row.min_size = cell.min_size;
        row.param_idx = cell.param_idx;
        row.repeat = cell.repeat;
        row.seed = derive_seed(cfg.seed, cell.method, cell.min_size, cell.param_idx,
                               cell.repeat);
        row.dataset_hash = ds_hash;
        const ParamDraw params = draw_params(cfg, cell.min_size, cell.param_idx);
        try {
            RunRecord rec = dispatch_method(cell.method, *evaluators.at(cell.min_size),
                                            cfg, params, row.seed);
            rec.scenario = cfg.scenario;
            rec.seed = row.seed;
            row.best_fitness = rec.best_fitness;
            row.subgroup_size = rec.subgroup_size;
            row.wall_s = rec.wall_seconds;
            row.rule_bits = rec.best_rule_bits;
            row.rule_text = rec.best_rule_text;
            row.subgroup_hash = rec.subgroup_hash;
            row.feasible = rec.feasible;
            const auto it = result.oracles.find(cell.min_size);
            if (it != result.oracles.end() && it->second.any_feasible && rec.feasible) {
                const double opt = it->second.best_fitness;
                row.ratio_to_opt = rec.best_fitness / opt;
                const double tol = 1e-9 * std::max(1.0, std::abs(opt));
                row.hit_opt = (std::abs(rec.best_fitness - opt) <= tol) ? 1 : 0;
            } else if (it != result.oracles.end() && it->second.any_feasible) {
                row.hit_opt = 0; // infeasible run on an instance with an optimum
            }
            result.records[idx] = std::move(rec);
        } catch (const std::exception& e) {
            row.failed = true;
            row.fail_msg = e.what();
            RunRecord rec;
            rec.method = cell.method;
            rec.scenario = cfg.scenario;
            rec.seed = row.seed;
            rec.note = std::string("FAILED: ") + e.what();
            result.records[idx] = std::move(rec);
        }
        result.rows[idx] = std::move(row);
    };

    const unsigned workers = std::max(1u, cfg.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) break;
                    run_cell(i);
                }
            });
        for (auto& t : pool) t.join();
    }

    for (const auto& row : result.rows)
        if (row.failed) result.any_failed = true;
    return result;
}

// ---------------------------------------------------------------------------
// Statistics (Table 1 / Table 2 column roles)
// ---------------------------------------------------------------------------

struct MethodSummary {
    std::string method;
    std::string scenario;
    std::size_t runs = 0; // non-failed
    std::size_t excluded = 0;
    double mean_fitness = 0.0;
    double std_dev = 0.0;
    double mean_time_s = 0.0;
    std::optional<double> mean_ratio;
    std::optional<double> median_ratio;
    std::optional<double> pct_hit_opt;
    double cv = 0.0;
    std::size_t unique_solutions = 0;
};

struct CellSummary {
    std::string method;
    std::string scenario;
    std::size_t min_size = 0;
    int param_idx = 0;
    std::size_t runs = 0;
    double mean_fitness = 0.0;
    double std_dev = 0.0;
    double cv = 0.0;
    double mean_time_s = 0.0;
    std::optional<double> mean_ratio;
    std::optional<double> pct_hit_opt;
    std::size_t unique_solutions = 0;
};

namespace detail_stats {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail_stats

/// Per-cell aggregation: (method, min_size, param_idx) over repeats.
inline std::vector<CellSummary> compute_cell_summaries(
    const std::vector<RunRow>& rows) {
    std::map<std::tuple<std::string, std::size_t, int>, std::vector<const RunRow*>>
        groups;
    for (const auto& r : rows)
        if (!r.failed)
            groups[{r.method, r.min_size, r.param_idx}].push_back(&r);

    std::vector<CellSummary> out;
    for (const auto& [key, members] : groups) {
        CellSummary c;
        c.method = std::get<0>(key);
        c.min_size = std::get<1>(key);
        c.param_idx = std::get<2>(key);
        c.scenario = members[0]->scenario;
        c.runs = members.size();
        std::vector<double> fitness, times, ratios, hits;
        std::set<std::string> subgroups;
        for (const auto* m : members) {
            fitness.push_back(m->best_fitness);
            times.push_back(m->wall_s);
            if (m->ratio_to_opt) ratios.push_back(*m->ratio_to_opt);
            if (m->hit_opt) hits.push_back(static_cast<double>(*m->hit_opt));
            subgroups.insert(m->subgroup_hash);
        }
        c.mean_fitness = detail_stats::mean_of(fitness);
        c.std_dev = detail_stats::sample_stddev(fitness);
        c.cv = (c.mean_fitness != 0.0) ? c.std_dev / std::abs(c.mean_fitness) : 0.0;
        c.mean_time_s = detail_stats::mean_of(times);
        if (!ratios.empty()) c.mean_ratio = detail_stats::mean_of(ratios);
        if (!hits.empty()) c.pct_hit_opt = 100.0 * detail_stats::mean_of(hits);
        c.unique_solutions = subgroups.size();
        out.push_back(std::move(c));
    }
    return out;
}

/// Per-method aggregation across the whole matrix. The stability CV is the
/// mean of per-cell coefficients of variation; solution diversity counts
/// distinct induced subgroups (not rule strings).
inline std::vector<MethodSummary> compute_method_summaries(
    const std::vector<RunRow>& rows) {
    const auto cells = compute_cell_summaries(rows);

    std::vector<std::string> method_order;
    for (const auto& r : rows)
        if (std::find(method_order.begin(), method_order.end(), r.method) ==
            method_order.end())
            method_order.push_back(r.method);

    std::vector<MethodSummary> out;
    for (const auto& method : method_order) {
        MethodSummary s;
        s.method = method;
        std::vector<double> fitness, times, ratios, hits, cvs;
        std::set<std::string> subgroups;
        for (const auto& r : rows) {
            if (r.method != method) continue;
            s.scenario = r.scenario;
            if (r.failed) {
                ++s.excluded;
                continue;
            }
            fitness.push_back(r.best_fitness);
            times.push_back(r.wall_s);
            if (r.ratio_to_opt) ratios.push_back(*r.ratio_to_opt);
            if (r.hit_opt) hits.push_back(static_cast<double>(*r.hit_opt));
            subgroups.insert(r.subgroup_hash);
        }
        for (const auto& c : cells)
            if (c.method == method) cvs.push_back(c.cv);
        s.runs = fitness.size();
        s.mean_fitness = detail_stats::mean_of(fitness);
        s.std_dev = detail_stats::sample_stddev(fitness);
        s.mean_time_s = detail_stats::mean_of(times);
        if (!ratios.empty()) {
            s.mean_ratio = detail_stats::mean_of(ratios);
            s.median_ratio = detail_stats::median_of(ratios);
        }
        if (!hits.empty()) s.pct_hit_opt = 100.0 * detail_stats::mean_of(hits);
        s.cv = detail_stats::mean_of(cvs);
        s.unique_solutions = subgroups.size();
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV / JSONL emission
// ---------------------------------------------------------------------------

inline void write_runs_csv(std::ostream& os, const std::vector<RunRow>& rows) {
    csv::write_row(os, {"method", "scenario", "min_size", "param_idx", "repeat",
                        "seed", "best_fitness", "subgroup_size", "ratio_to_opt",
                        "hit_opt", "wall_s", "rule_bits", "rule_text"});
    for (const auto& r : rows) {
        std::vector<std::string> cells{
            r.method,
            r.scenario,
            std::to_string(r.min_size),
            std::to_string(r.param_idx),
            std::to_string(r.repeat),
            std::to_string(r.seed),
            r.failed ? "" : detail::format_double(r.best_fitness),
            r.failed ? "" : std::to_string(r.subgroup_size),
            r.ratio_to_opt ? detail::format_double(*r.ratio_to_opt) : "",
            r.hit_opt ? std::to_string(*r.hit_opt) : "",
            detail::format_double(r.wall_s),
            r.rule_bits,
            r.failed ? ("FAILED: " + r.fail_msg) : r.rule_text};
        csv::write_row(os, cells);
    }
}

inline void write_summary_csv(std::ostream& os,
                              const std::vector<MethodSummary>& summaries) {
    csv::write_row(os, {"method", "scenario", "runs", "mean_fitness", "std_dev",
                        "mean_time_s", "mean_ratio", "median_ratio", "pct_hit_opt",
                        "cv", "unique_solutions"});
    for (const auto& s : summaries) {
        csv::write_row(
            os, {s.method, s.scenario, std::to_string(s.runs),
                 detail::format_double(s.mean_fitness),
                 detail::format_double(s.std_dev),
                 detail::format_double(s.mean_time_s),
                 s.mean_ratio ? detail::format_double(*s.mean_ratio) : "",
                 s.median_ratio ? detail::format_double(*s.median_ratio) : "",
                 s.pct_hit_opt ? detail::format_double(*s.pct_hit_opt) : "",
                 detail::format_double(s.cv), std::to_string(s.unique_solutions)});
    }
}

inline void write_cells_csv(std::ostream& os, const std::vector<CellSummary>& cells) {
    csv::write_row(os, {"method", "scenario", "min_size", "param_idx", "runs",
                        "mean_fitness", "std_dev", "cv", "mean_time_s", "mean_ratio",
                        "pct_hit_opt", "unique_solutions"});
    for (const auto& c : cells) {
        csv::write_row(os,
                       {c.method, c.scenario, std::to_string(c.min_size),
                        std::to_string(c.param_idx), std::to_string(c.runs),
                        detail::format_double(c.mean_fitness),
                        detail::format_double(c.std_dev), detail::format_double(c.cv),
                        detail::format_double(c.mean_time_s),
                        c.mean_ratio ? detail::format_double(*c.mean_ratio) : "",
                        c.pct_hit_opt ? detail::format_double(*c.pct_hit_opt) : "",
                        std::to_string(c.unique_solutions)});
    }
}

/// One JSON object per line: the cell coordinates plus the full run record.
inline void write_runs_jsonl(std::ostream& os, const std::vector<RunRow>& rows,
                             const std::vector<RunRecord>& records) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RunRow& r = rows[i];
        nlohmann::json j;
        j["record"] = records[i];
        j["min_size"] = r.min_size;
        j["param_idx"] = r.param_idx;
        j["repeat"] = r.repeat;
        j["failed"] = r.failed;
        if (r.failed) j["fail_msg"] = r.fail_msg;
        if (r.ratio_to_opt) j["ratio_to_opt"] = *r.ratio_to_opt;
        if (r.hit_opt) j["hit_opt"] = *r.hit_opt;
        os << j.dump() << "\n";
    }
}

inline std::vector<RunRow> read_runs_jsonl(std::istream& is) {
    std::vector<RunRow> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        const RunRecord rec = j.at("record").get<RunRecord>();
        RunRow r;
        r.method = rec.method;
        r.scenario = rec.scenario;
        r.min_size = j.value("min_size", std::size_t{0});
        r.param_idx = j.value("param_idx", 0);
        r.repeat = j.value("repeat", 0);
        r.seed = rec.seed;
        r.failed = j.value("failed", false);
        r.fail_msg = j.value("fail_msg", std::string{});
        r.best_fitness = rec.best_fitness;
        r.subgroup_size = rec.subgroup_size;
        if (j.contains("ratio_to_opt")) r.ratio_to_opt = j.at("ratio_to_opt").get<double>();
        if (j.contains("hit_opt")) r.hit_opt = j.at("hit_opt").get<int>();
        r.wall_s = rec.wall_seconds;
        r.rule_bits = rec.best_rule_bits;
        r.rule_text = rec.best_rule_text;
        r.subgroup_hash = rec.subgroup_hash;
        r.feasible = rec.feasible;
        r.dataset_hash = rec.dataset_hash;
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace ruleopt
