#pragma once

#include <bit>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ruleopt/detail/hash.hpp"
#include "ruleopt/objective.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/runrecord.hpp"

namespace ruleopt {

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

struct ExhaustiveConfig {
    std::size_t max_n = 20; // refuse enumeration above this universe size
    unsigned workers = 1;   // parallel enumeration ranges (result independent)
};

struct ExhaustiveResult {
    BitRule best_rule;
    double best_fitness = 0.0;
    bool any_feasible = false;
    std::uint64_t evaluated = 0;
};

namespace detail_ex {

/// Total order over candidates: higher fitness wins, ties go to the rule with
/// fewer conjuncts, then to the lexicographically smaller bit sequence
/// (lowest differing atom unset).
inline bool better(double fit_a, std::uint64_t mask_a, double fit_b,
                   std::uint64_t mask_b) {
    if (fit_a != fit_b) return fit_a > fit_b;
    const int pa = std::popcount(mask_a);
    const int pb = std::popcount(mask_b);
    if (pa != pb) return pa < pb;
    const std::uint64_t diff = mask_a ^ mask_b;
    if (diff == 0) return false;
    const int low = std::countr_zero(diff);
    return ((mask_a >> low) & 1ull) == 0;
}

} // namespace detail_ex

/// Evaluates every non-identity rule of the universe (the identity is
/// excluded from the search space) and returns the feasibility-respecting
/// optimum. Enumeration parallelizes over index ranges; the merge uses a
/// total order, so the result does not depend on the worker count.
inline ExhaustiveResult exhaustive_search(const RuleEvaluator& evaluator,
                                          const ExhaustiveConfig& config = {}) {
    const std::size_t n = evaluator.universe().size();
    if (n > config.max_n)
        throw CapExceededError(
            "exhaustive search refused: universe size " + std::to_string(n) +
            " exceeds cap " + std::to_string(config.max_n) +
            " (with continuous variables the combination count is unbounded; "
            "raise the cap explicitly for discrete universes you can afford)");

    const std::uint64_t total = (1ull << n) - 1;
    const unsigned workers =
        std::max(1u, std::min<unsigned>(config.workers,
                                        static_cast<unsigned>(total / 64 + 1)));

    struct Local {
        double fit = -std::numeric_limits<double>::infinity();
        std::uint64_t mask = 0;
        bool any = false;
    };
    std::vector<Local> locals(workers);

    auto scan = [&](unsigned w) {
        Local& loc = locals[w];
        const std::uint64_t begin = 1 + total * w / workers;
        const std::uint64_t end = 1 + total * (w + 1) / workers;
        for (std::uint64_t mask = begin; mask < end; ++mask) {
            const BitRule rule = BitRule::from_mask(mask, n);
            const Evaluation ev =
                evaluator.evaluate_mask_nocache(evaluator.apply(rule));
            if (!ev.feasible) continue;
            if (!loc.any || detail_ex::better(ev.fitness, mask, loc.fit, loc.mask)) {
                loc.fit = ev.fitness;
                loc.mask = mask;
                loc.any = true;
            }
        }
    };

    if (workers == 1) {
        scan(0);
    } else {
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(scan, w);
        for (auto& t : threads) t.join();
    }

    ExhaustiveResult result;
    result.evaluated = total;
    double best_fit = 0.0;
    std::uint64_t best_mask = 0;
    for (const auto& loc : locals) {
        if (!loc.any) continue;
        if (!result.any_feasible ||
            detail_ex::better(loc.fit, loc.mask, best_fit, best_mask)) {
            result.any_feasible = true;
            best_fit = loc.fit;
            best_mask = loc.mask;
        }
    }
    if (result.any_feasible) {
        result.best_fitness = best_fit;
        result.best_rule = BitRule::from_mask(best_mask, n);
    } else {
        result.best_rule = BitRule(n);
        result.best_fitness = evaluator.config().infeasible_fitness;
    }
    return result;
}

/// Disk-cached oracle, keyed by (cohort hash, universe hash, objective
/// config); benchmark reruns skip the enumeration.
inline ExhaustiveResult exhaustive_search_cached(
    const RuleEvaluator& evaluator, const std::filesystem::path& cache_dir,
    const ExhaustiveConfig& config = {}) {
    std::uint64_t key = detail::fnv1a_u64(cohort_hash(evaluator.cohort()));
    key = detail::fnv1a_u64(evaluator.universe().content_hash(), key);
    key = detail::fnv1a_u64(evaluator.config().min_subgroup_size, key);
    const auto path = cache_dir / ("oracle_" + detail::hex64(key) + ".json");

    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        nlohmann::json j;
        in >> j;
        ExhaustiveResult r;
        r.best_rule = BitRule::from_string(j.at("bits").get<std::string>());
        r.best_fitness = j.at("fitness").get<double>();
        r.any_feasible = j.at("any_feasible").get<bool>();
        r.evaluated = j.at("evaluated").get<std::uint64_t>();
        return r;
    }

    const ExhaustiveResult r = exhaustive_search(evaluator, config);
    std::filesystem::create_directories(cache_dir);
    nlohmann::json j{{"bits", r.best_rule.to_string()},
                     {"fitness", r.best_fitness},
                     {"any_feasible", r.any_feasible},
                     {"evaluated", r.evaluated}};
    std::ofstream out(path);
    out << j.dump() << "\n";
    return r;
}

/// Wraps the oracle as a benchmark method.
inline RunRecord exhaustive_run(const RuleEvaluator& evaluator,
                                const ExhaustiveConfig& config = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    const ExhaustiveResult r = exhaustive_search(evaluator, config);
    RunRecord rec;
    rec.method = "exhaustive";
    rec.best_fitness = r.best_fitness;
    rec.feasible = r.any_feasible;
    rec.best_rule_text = decode(r.best_rule, evaluator.universe());
    rec.best_rule_bits = r.best_rule.to_string();
    const SubgroupMask mask = evaluator.apply(r.best_rule);
    rec.subgroup_size = r.any_feasible ? mask.count() : 0;
    rec.subgroup_hash = detail::hex64(mask.content_hash());
    rec.evaluations = r.evaluated;
    rec.dataset_hash = detail::fnv1a_u64(cohort_hash(evaluator.cohort()),
                                         evaluator.universe().content_hash());
    if (!r.any_feasible) rec.note = "no feasible rule";
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return rec;
}

// ---------------------------------------------------------------------------
// Greedy forward selection
// ---------------------------------------------------------------------------

/// Starts from the identity rule and repeatedly adds the single atom whose
/// addition yields the highest feasible fitness strictly above the current
/// one (ties: lowest atom id); stops when no atom improves.
inline RunRecord greedy_search(const RuleEvaluator& evaluator) {
    const auto t_start = std::chrono::steady_clock::now();
    const RuleUniverse& universe = evaluator.universe();
    const std::size_t n = universe.size();

    RunRecord rec;
    rec.method = "greedy";

    BitRule current(n);
    Evaluation cur_ev = evaluator.evaluate(current);
    std::size_t evaluations = 1;

    TraceRow row0;
    row0.step = 0;
    row0.best_fitness = cur_ev.fitness;
    row0.note = "start: " + decode(current, universe);
    rec.trace.push_back(row0);

    bool any_single_feasible = false;
    int step = 0;
    while (true) {
        int best_atom = -1;
        Evaluation best_ev;
        for (std::size_t a = 0; a < n; ++a) {
            if (current.test(a)) continue;
            BitRule cand = current;
            cand.set(a);
            const Evaluation ev = evaluator.evaluate(cand);
            ++evaluations;
            if (step == 0 && ev.feasible) any_single_feasible = true;
            if (!ev.feasible) continue;
            const bool improves =
                !cur_ev.feasible || ev.fitness > cur_ev.fitness;
            if (!improves) continue;
            if (best_atom < 0 || ev.fitness > best_ev.fitness) {
                best_atom = static_cast<int>(a);
                best_ev = ev;
            }
        }
        if (best_atom < 0) break;
        current.set(static_cast<std::size_t>(best_atom));
        cur_ev = best_ev;
        ++step;
        TraceRow row;
        row.step = step;
        row.best_fitness = cur_ev.fitness;
        row.note = "added: " + universe.atom(static_cast<std::size_t>(best_atom)).text();
        rec.trace.push_back(row);
    }

    if (step == 0 && !any_single_feasible && !cur_ev.feasible)
        rec.note = "infeasible-start";
    else if (step == 0 && !any_single_feasible)
        rec.note = "infeasible-start: no single atom feasible";

    const SubgroupMask mask = evaluator.apply(current);
    rec.best_fitness = cur_ev.fitness;
    rec.feasible = cur_ev.feasible;
    rec.best_rule_text = decode(current, universe);
    rec.best_rule_bits = current.to_string();
    rec.subgroup_size = cur_ev.subgroup_size;
    rec.subgroup_hash = detail::hex64(mask.content_hash());
    rec.evaluations = evaluations;
    rec.dataset_hash = detail::fnv1a_u64(cohort_hash(evaluator.cohort()),
                                         universe.content_hash());
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return rec;
}

} // namespace ruleopt
