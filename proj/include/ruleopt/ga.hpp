#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ruleopt/cohort.hpp"
#include "ruleopt/objective.hpp"
#include "ruleopt/quotient.hpp"
#include "ruleopt/rng.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/runrecord.hpp"

namespace ruleopt {

// ---------------------------------------------------------------------------
// Chromosome encoding: 3 genes per numeric field, 1+K per categorical field
// ---------------------------------------------------------------------------

struct NumericBlock {
    bool active = false;
    bool greater = false; // operator gene: false = <=, true = >
    double threshold = 0.0;

    bool operator==(const NumericBlock&) const = default;
};

struct CategoricalBlock {
    bool active = false;
    std::vector<bool> level_mask; // K level-selection genes

    bool operator==(const CategoricalBlock&) const = default;
};

/// GA genome for mixed-type rules. Block order: categorical fields in schema
/// order, then numeric fields — matching the universe's atom ordering.
struct Chromosome {
    std::vector<CategoricalBlock> cat_blocks;
    std::vector<NumericBlock> num_blocks;

    bool operator==(const Chromosome&) const = default;

    std::size_t block_count() const { return cat_blocks.size() + num_blocks.size(); }
};

struct GAConfig {
    std::size_t population_size = 50;
    int generations = 60;
    double crossover_prob = 0.8;
    double mutation_prob = 0.1;
    bool quotient_aware = false;
    EquivalenceConfig equivalence{};
    std::uint64_t seed = 0;
    int tournament_size = 3;
    double mutation_sigma_frac = 0.10; // threshold perturbation, fraction of range

    void validate() const {
        if (population_size < 2) throw ConfigError("population_size must be >= 2");
        if (generations < 1) throw ConfigError("generations must be >= 1");
        if (crossover_prob < 0.0 || crossover_prob > 1.0)
            throw ConfigError("crossover_prob must lie in [0,1]");
        if (mutation_prob < 0.0 || mutation_prob > 1.0)
            throw ConfigError("mutation_prob must lie in [0,1]");
        if (tournament_size < 1) throw ConfigError("tournament_size must be >= 1");
        equivalence.validate();
    }
};

// ---------------------------------------------------------------------------
// Universe lookup tables for chromosome <-> atom conversion
// ---------------------------------------------------------------------------

/// Maps schema positions to universe atom ids: per categorical (field, level)
/// the CategoryEq atom, per numeric field the threshold grid with its <= / >
/// atoms. Built once per (schema, universe) pair.
class UniverseIndex {
public:
    struct GridPoint {
        double threshold = 0.0;
        int le_atom = -1;
        int gt_atom = -1;
    };

    UniverseIndex(const Schema& schema, const RuleUniverse& universe) {
        cat_atom_.resize(schema.categorical.size());
        for (std::size_t f = 0; f < schema.categorical.size(); ++f)
            cat_atom_[f].assign(schema.categorical[f].levels.size(), -1);
        grid_.resize(schema.numeric.size());

        std::vector<std::map<double, std::pair<int, int>>> by_threshold(
            schema.numeric.size());
        for (std::size_t a = 0; a < universe.size(); ++a) {
            const AtomicRule& atom = universe.atom(a);
            if (atom.kind == PredicateKind::CategoryEq) {
                const int f = schema.categorical_index(atom.field);
                if (f < 0) continue;
                const int l =
                    schema.level_index(static_cast<std::size_t>(f), atom.level);
                if (l >= 0)
                    cat_atom_[static_cast<std::size_t>(f)][static_cast<std::size_t>(l)] =
                        static_cast<int>(a);
            } else {
                const int f = schema.numeric_index(atom.field);
                if (f < 0) continue;
                auto& slot = by_threshold[static_cast<std::size_t>(f)][atom.threshold];
                if (slot.first == 0 && slot.second == 0) slot = {-1, -1};
                if (atom.kind == PredicateKind::NumericLE)
                    slot.first = static_cast<int>(a);
                else
                    slot.second = static_cast<int>(a);
            }
        }
        for (std::size_t f = 0; f < by_threshold.size(); ++f)
            for (const auto& [t, ids] : by_threshold[f])
                grid_[f].push_back(GridPoint{t, ids.first, ids.second});
    }

    int cat_atom(std::size_t field, std::size_t level) const {
        return cat_atom_[field][level];
    }

    const std::vector<GridPoint>& grid(std::size_t numeric_field) const {
        return grid_[numeric_field];
    }

private:
    std::vector<std::vector<int>> cat_atom_;
    std::vector<std::vector<GridPoint>> grid_;
};

// ---------------------------------------------------------------------------
// Chromosome operations
// ---------------------------------------------------------------------------

inline Chromosome random_chromosome(const Schema& schema, Rng& rng) {
    Chromosome c;
    for (const auto& f : schema.categorical) {
        CategoricalBlock b;
        b.active = rng.bernoulli(0.5);
        b.level_mask.resize(f.levels.size());
        for (std::size_t l = 0; l < f.levels.size(); ++l)
            b.level_mask[l] = rng.bernoulli(0.5);
        c.cat_blocks.push_back(std::move(b));
    }
    for (const auto& f : schema.numeric) {
        NumericBlock b;
        b.active = rng.bernoulli(0.5);
        b.greater = rng.bernoulli(0.5);
        b.threshold = rng.uniform(f.min, f.max);
        c.num_blocks.push_back(b);
    }
    return c;
}

/// An active categorical block with an empty level mask decodes as inactive.
inline bool cat_block_effective(const CategoricalBlock& b) {
    if (!b.active) return false;
    for (bool bit : b.level_mask)
        if (bit) return true;
    return false;
}

/// Converts a chromosome to its atomic bit vector: active categorical levels
/// map to their level atoms; an active numeric gene maps to the nearest grid
/// atom with matching operator (ties toward the lower threshold); inactive
/// blocks contribute no bits.
inline BitRule to_atomic_vector(const Chromosome& c, const UniverseIndex& index,
                                const RuleUniverse& universe) {
    BitRule bits(universe.size());
    for (std::size_t f = 0; f < c.cat_blocks.size(); ++f) {
        const auto& b = c.cat_blocks[f];
        if (!cat_block_effective(b)) continue;
        for (std::size_t l = 0; l < b.level_mask.size(); ++l)
            if (b.level_mask[l]) {
                const int a = index.cat_atom(f, l);
                if (a >= 0) bits.set(static_cast<std::size_t>(a));
            }
    }
    for (std::size_t f = 0; f < c.num_blocks.size(); ++f) {
        const auto& b = c.num_blocks[f];
        if (!b.active) continue;
        const auto& grid = index.grid(f);
        if (grid.empty()) continue;
        std::size_t best = 0;
        double best_d = std::abs(grid[0].threshold - b.threshold);
        for (std::size_t g = 1; g < grid.size(); ++g) {
            const double d = std::abs(grid[g].threshold - b.threshold);
            if (d < best_d) {
                best_d = d;
                best = g;
            }
        }
        const int a = b.greater ? grid[best].gt_atom : grid[best].le_atom;
        if (a >= 0) bits.set(static_cast<std::size_t>(a));
    }
    return bits;
}

/// Induced subgroup of a decoded chromosome: conjunction across active
/// fields; within an active categorical field a record matches if its level
/// is in the selected mask (within-field disjunction); numeric fields compare
/// against the real-valued threshold gene (missing values never match).
inline SubgroupMask apply_chromosome(const Chromosome& c,
                                     const RuleEvaluator& evaluator,
                                     const UniverseIndex& index) {
    const Cohort& cohort = evaluator.cohort();
    SubgroupMask mask = evaluator.non_hv_mask();
    for (std::size_t f = 0; f < c.cat_blocks.size(); ++f) {
        const auto& b = c.cat_blocks[f];
        if (!cat_block_effective(b)) continue;
        SubgroupMask levels(cohort.records.size());
        for (std::size_t l = 0; l < b.level_mask.size(); ++l)
            if (b.level_mask[l]) {
                const int a = index.cat_atom(f, l);
                if (a >= 0) levels.union_with(evaluator.atom_mask(static_cast<std::size_t>(a)));
            }
        mask.intersect_with(levels);
    }
    for (std::size_t f = 0; f < c.num_blocks.size(); ++f) {
        const auto& b = c.num_blocks[f];
        if (!b.active) continue;
        SubgroupMask cond(cohort.records.size());
        for (std::size_t r = 0; r < cohort.records.size(); ++r) {
            if (cohort.is_hv[r]) continue;
            const auto& v = cohort.records[r].num_values[f];
            if (!v) continue;
            const bool ok = b.greater ? (*v > b.threshold) : (*v <= b.threshold);
            if (ok) cond.set(r);
        }
        mask.intersect_with(cond);
    }
    return mask;
}

inline std::string chromosome_text(const Chromosome& c, const Schema& schema) {
    std::string out;
    auto append = [&](const std::string& s) {
        if (!out.empty()) out += " AND ";
        out += s;
    };
    for (std::size_t f = 0; f < c.cat_blocks.size(); ++f) {
        const auto& b = c.cat_blocks[f];
        if (!cat_block_effective(b)) continue;
        std::vector<std::string> levels;
        for (std::size_t l = 0; l < b.level_mask.size(); ++l)
            if (b.level_mask[l]) levels.push_back(schema.categorical[f].levels[l]);
        if (levels.size() == 1) {
            append(schema.categorical[f].name + " = " + levels[0]);
        } else {
            std::string s = schema.categorical[f].name + " IN {";
            for (std::size_t i = 0; i < levels.size(); ++i) {
                if (i) s += ", ";
                s += levels[i];
            }
            s += "}";
            append(s);
        }
    }
    for (std::size_t f = 0; f < c.num_blocks.size(); ++f) {
        const auto& b = c.num_blocks[f];
        if (!b.active) continue;
        append(schema.numeric[f].name + (b.greater ? " > " : " <= ") +
               detail::format_double(b.threshold));
    }
    return out.empty() ? "TRUE (no filtering)" : out;
}

/// Single-point crossover over the block sequence (categorical blocks, then
/// numeric blocks). Cutting at block boundaries keeps every block intact, so
/// a child's active atoms always come from one of its parents.
inline std::pair<Chromosome, Chromosome> crossover(const Chromosome& a,
                                                   const Chromosome& b, Rng& rng) {
    const std::size_t blocks = a.block_count();
    if (blocks < 2) return {a, b};
    const std::size_t cut = 1 + rng.uniform_index(blocks - 1);
    Chromosome c1 = a, c2 = b;
    for (std::size_t i = cut; i < blocks; ++i) {
        if (i < a.cat_blocks.size()) {
            c1.cat_blocks[i] = b.cat_blocks[i];
            c2.cat_blocks[i] = a.cat_blocks[i];
        } else {
            const std::size_t j = i - a.cat_blocks.size();
            c1.num_blocks[j] = b.num_blocks[j];
            c2.num_blocks[j] = a.num_blocks[j];
        }
    }
    return {c1, c2};
}

/// Per-gene mutation: bit genes flip independently at rate p_m; threshold
/// genes receive a Gaussian perturbation (sigma = fraction of field range)
/// at rate p_m, clamped back into the observed range.
inline void mutate(Chromosome& c, const Schema& schema, double p_m,
                   double sigma_frac, Rng& rng) {
    for (auto& b : c.cat_blocks) {
        if (rng.bernoulli(p_m)) b.active = !b.active;
        for (std::size_t l = 0; l < b.level_mask.size(); ++l)
            if (rng.bernoulli(p_m)) b.level_mask[l] = !b.level_mask[l];
    }
    for (std::size_t f = 0; f < c.num_blocks.size(); ++f) {
        auto& b = c.num_blocks[f];
        if (rng.bernoulli(p_m)) b.active = !b.active;
        if (rng.bernoulli(p_m)) b.greater = !b.greater;
        if (rng.bernoulli(p_m)) {
            const double range = schema.numeric[f].max - schema.numeric[f].min;
            b.threshold += rng.normal(0.0, sigma_frac * range);
            b.threshold = std::clamp(b.threshold, schema.numeric[f].min,
                                     schema.numeric[f].max);
        }
    }
}

// ---------------------------------------------------------------------------
// The generational loop (standard and quotient-aware)
// ---------------------------------------------------------------------------

namespace detail_ga {

inline std::size_t tournament(const std::vector<double>& fitness, std::size_t n,
                              int size, Rng& rng) {
    std::size_t winner = rng.uniform_index(n);
    for (int k = 1; k < size; ++k) {
        const std::size_t cand = rng.uniform_index(n);
        if (fitness[cand] > fitness[winner]) winner = cand;
    }
    return winner;
}

} // namespace detail_ga

/// unique(E) with the overflow rule: order-preserving dedup of identical
/// chromosomes, truncated to the cap by keeping the highest-fitness elites.
inline std::vector<Chromosome> unique_elites(const std::vector<Chromosome>& elites,
                                             const std::vector<double>& fitnesses,
                                             std::size_t cap) {
    std::vector<Chromosome> uniq;
    std::vector<double> uniq_fit;
    for (std::size_t e = 0; e < elites.size(); ++e) {
        bool seen = false;
        for (const auto& u : uniq)
            if (u == elites[e]) {
                seen = true;
                break;
            }
        if (!seen) {
            uniq.push_back(elites[e]);
            uniq_fit.push_back(fitnesses[e]);
        }
    }
    if (uniq.size() > cap) {
        std::vector<std::size_t> idx(uniq.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return uniq_fit[a] > uniq_fit[b];
        });
        std::vector<Chromosome> kept;
        for (std::size_t k = 0; k < cap; ++k) kept.push_back(uniq[idx[k]]);
        uniq = std::move(kept);
    }
    return uniq;
}

/// Runs the genetic algorithm against an evaluator. With quotient_aware set,
/// equivalence classes are detected at generation 1 and every tau generations
/// thereafter; the niche elites found there seed every following generation
/// until the next detection. With the flag off the detection and seeding
/// steps are skipped entirely and the loop is a plain generational GA.
inline RunRecord run_ga(const RuleEvaluator& evaluator, const GAConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const Schema& schema = evaluator.cohort().schema;
    const RuleUniverse& universe = evaluator.universe();
    const UniverseIndex index(schema, universe);
    const std::size_t N = config.population_size;
    Rng rng(config.seed);

    std::vector<Chromosome> pop;
    pop.reserve(N);
    for (std::size_t i = 0; i < N; ++i) pop.push_back(random_chromosome(schema, rng));

    std::vector<double> fitness(N);
    std::vector<bool> feasible(N);
    std::vector<SubgroupMask> masks(N);
    std::size_t evaluations = 0;

    auto evaluate_population = [&]() {
        for (std::size_t i = 0; i < N; ++i) {
            masks[i] = apply_chromosome(pop[i], evaluator, index);
            const Evaluation ev = evaluator.evaluate_mask(masks[i]);
            fitness[i] = ev.fitness;
            feasible[i] = ev.feasible;
            ++evaluations;
        }
    };

    RunRecord rec;
    rec.method = config.quotient_aware ? "ga-quotient" : "ga";
    rec.seed = config.seed;

    Chromosome best_chrom;
    SubgroupMask best_mask;
    double best_fit = -std::numeric_limits<double>::infinity();
    bool best_feasible = false;

    auto track_best = [&]() {
        for (std::size_t i = 0; i < N; ++i) {
            if (fitness[i] > best_fit) {
                best_fit = fitness[i];
                best_chrom = pop[i];
                best_mask = masks[i];
                best_feasible = feasible[i];
            }
        }
    };

    auto trace_row = [&](int gen, int class_count, int elite_count,
                         std::vector<ClassSummary> summaries) {
        TraceRow row;
        row.step = gen;
        row.best_fitness = best_fit;
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < N; ++i)
            if (feasible[i]) {
                sum += fitness[i];
                ++cnt;
            }
        if (cnt > 0) row.mean_fitness = sum / static_cast<double>(cnt);
        row.class_count = class_count;
        row.elite_count = elite_count;
        row.classes = std::move(summaries);
        rec.trace.push_back(std::move(row));
    };

    evaluate_population();
    track_best();
    trace_row(0, -1, -1, {});

    // Elite set persists between detections (quotient mode only).
    std::vector<Chromosome> elite_set;
    std::vector<double> elite_fitness;

    for (int t = 1; t <= config.generations; ++t) {
        int class_count = -1;
        std::vector<ClassSummary> summaries;

        if (config.quotient_aware &&
            (t == 1 || t % config.equivalence.tau == 0)) {
            std::vector<bool> valid(N);
            for (std::size_t i = 0; i < N; ++i) {
                const BitRule v = to_atomic_vector(pop[i], index, universe);
                valid[i] = v.any() && feasible[i];
            }
            const EquivalenceClasses classes =
                detect_classes(fitness, valid, config.equivalence);
            if (classes.ran) {
                elite_set.clear();
                elite_fitness.clear();
                for (std::size_t e : classes.elites) {
                    elite_set.push_back(pop[e]);
                    elite_fitness.push_back(fitness[e]);
                }
                class_count = static_cast<int>(classes.classes.size());
                for (std::size_t k = 0; k < classes.classes.size(); ++k) {
                    ClassSummary cs;
                    cs.id = static_cast<int>(k + 1);
                    cs.size = classes.classes[k].size();
                    double csum = 0.0;
                    for (std::size_t m : classes.classes[k]) csum += fitness[m];
                    cs.centroid = csum / static_cast<double>(cs.size);
                    cs.elite_rule = chromosome_text(pop[classes.elites[k]], schema);
                    summaries.push_back(std::move(cs));
                }
            }
        }

        std::vector<Chromosome> next;
        int elite_count = -1;
        if (config.quotient_aware) {
            next = unique_elites(elite_set, elite_fitness, N);
            elite_count = static_cast<int>(next.size());
        }

        const std::size_t n_offspring = N - next.size();
        std::size_t produced = 0;
        while (produced < n_offspring) {
            const std::size_t p1 =
                detail_ga::tournament(fitness, N, config.tournament_size, rng);
            const std::size_t p2 =
                detail_ga::tournament(fitness, N, config.tournament_size, rng);
            Chromosome c1, c2;
            if (rng.bernoulli(config.crossover_prob)) {
                auto [a, b] = crossover(pop[p1], pop[p2], rng);
                c1 = std::move(a);
                c2 = std::move(b);
            } else {
                c1 = pop[p1];
                c2 = pop[p2];
            }
            mutate(c1, schema, config.mutation_prob, config.mutation_sigma_frac, rng);
            mutate(c2, schema, config.mutation_prob, config.mutation_sigma_frac, rng);
            next.push_back(std::move(c1));
            ++produced;
            if (produced < n_offspring) {
                next.push_back(std::move(c2));
                ++produced;
            }
        }

        pop = std::move(next);
        evaluate_population();
        track_best();
        trace_row(t, class_count, elite_count, std::move(summaries));
    }

    rec.best_fitness = best_fit;
    rec.feasible = best_feasible;
    rec.best_rule_text = chromosome_text(best_chrom, schema);
    rec.best_rule_bits = to_atomic_vector(best_chrom, index, universe).to_string();
    rec.subgroup_size = best_mask.count();
    rec.subgroup_hash = detail::hex64(best_mask.content_hash());
    rec.evaluations = evaluations;
    rec.dataset_hash =
        detail::fnv1a_u64(cohort_hash(evaluator.cohort()), universe.content_hash());
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return rec;
}

} // namespace ruleopt
