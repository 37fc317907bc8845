#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ruleopt/detail/linalg.hpp"
#include "ruleopt/objective.hpp"
#include "ruleopt/quotient.hpp"
#include "ruleopt/rng.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/runrecord.hpp"

namespace ruleopt {

// ---------------------------------------------------------------------------
// Hamming-distance kernel
// ---------------------------------------------------------------------------

struct HammingKernelParams {
    double theta0 = 1.0;  // signal variance
    double theta1 = 0.5;  // distance decay
    double theta2 = 1e-6; // nugget on identical inputs

    void validate() const {
        if (!(theta0 > 0.0)) throw ConfigError("theta0 must be > 0");
        if (!(theta1 > 0.0)) throw ConfigError("theta1 must be > 0");
        if (theta2 < 0.0) throw ConfigError("theta2 must be >= 0");
    }
};

/// K(b1,b2) = theta0 * exp(-theta1 * d_H(b1,b2)) + theta2 * [b1 == b2].
inline double kernel(const BitRule& b1, const BitRule& b2,
                     const HammingKernelParams& p) {
    const auto d = static_cast<double>(hamming(b1, b2));
    double k = p.theta0 * std::exp(-p.theta1 * d);
    if (b1 == b2) k += p.theta2;
    return k;
}

// ---------------------------------------------------------------------------
// Gaussian process on the hypercube
// ---------------------------------------------------------------------------

/// Fitted zero-mean GP over observed (BitRule, value) pairs. The covariance
/// factorization is cached; jitter escalates a bounded number of times before
/// the model is declared ill-conditioned.
struct GPState {
    std::vector<BitRule> inputs;
    std::vector<double> values;
    HammingKernelParams params;
    std::vector<double> chol;  // lower Cholesky factor of K
    std::vector<double> alpha; // K^{-1} y
    double jitter = 0.0;       // extra diagonal added to achieve factorization

    std::size_t size() const { return inputs.size(); }
};

inline GPState gp_fit(std::vector<BitRule> inputs, std::vector<double> values,
                      const HammingKernelParams& params) {
    params.validate();
    if (inputs.empty()) throw Error("gp_fit: at least one observation required");
    if (inputs.size() != values.size())
        throw Error("gp_fit: inputs/values size mismatch");

    const std::size_t n = inputs.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = kernel(inputs[i], inputs[j], params);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }

    GPState state;
    state.inputs = std::move(inputs);
    state.values = std::move(values);
    state.params = params;

    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        if (attempt > 0) {
            jitter = (jitter == 0.0) ? 1e-10 * params.theta0 : jitter * 10.0;
            for (std::size_t i = 0; i < n; ++i) k[i * n + i] += jitter;
        }
        if (auto l = detail::cholesky(k, n)) {
            state.chol = std::move(*l);
            state.alpha = detail::cholesky_solve(state.chol, n, state.values);
            state.jitter = jitter;
            return state;
        }
    }
    throw IllConditionedError("GP covariance not positive definite after jitter "
                              "escalation (n=" +
                              std::to_string(n) + ")");
}

/// Standard GP conditional at a query point (zero prior mean); the variance
/// is clamped at zero against numerical roundoff.
inline std::pair<double, double> gp_posterior(const GPState& state,
                                              const BitRule& query) {
    const std::size_t n = state.size();
    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = kernel(query, state.inputs[i], state.params);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += ks[i] * state.alpha[i];
    const auto z = detail::forward_solve(state.chol, n, ks);
    double var = state.params.theta0 + state.params.theta2;
    for (std::size_t i = 0; i < n; ++i) var -= z[i] * z[i];
    if (var < 0.0) var = 0.0;
    return {mean, var};
}

/// Log marginal likelihood of the fitted GP.
inline double gp_log_marginal(const GPState& state) {
    const std::size_t n = state.size();
    double fit = 0.0;
    for (std::size_t i = 0; i < n; ++i) fit += state.values[i] * state.alpha[i];
    return -0.5 * fit - 0.5 * detail::log_det_from_cholesky(state.chol, n) -
           0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846);
}

// ---------------------------------------------------------------------------
// Expected Improvement
// ---------------------------------------------------------------------------

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / 2.506628274631000502415765284811;
}

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / 1.4142135623730950488016887242097);
}

/// EI = (mu - f*) Phi(z) + sigma phi(z), z = (mu - f*)/sigma; at sigma = 0 it
/// degenerates to max(mu - f*, 0). Never negative.
inline double expected_improvement(double mean, double variance, double best_so_far) {
    if (variance < 0.0) variance = 0.0;
    const double sigma = std::sqrt(variance);
    const double delta = mean - best_so_far;
    if (sigma == 0.0) return delta > 0.0 ? delta : 0.0;
    const double z = delta / sigma;
    const double ei = delta * normal_cdf(z) + sigma * normal_pdf(z);
    return ei > 0.0 ? ei : 0.0;
}

// ---------------------------------------------------------------------------
// The BO loop
// ---------------------------------------------------------------------------

struct BOConfig {
    std::size_t budget = 80;        // total objective evaluations
    std::size_t initial_design = 10; // random distinct non-zero rules
    bool quotient_aware = false;
    EquivalenceConfig equivalence{};
    std::uint64_t seed = 0;
    std::size_t exhaustive_pool_max_n = 14; // below this, score every vector
    std::size_t pool_size = 2048;           // sampled pool above that
    std::vector<double> theta0_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> theta1_grid{0.03, 0.1, 0.3, 1.0, 3.0};
    double nugget_fraction = 1e-6; // theta2 = fraction * theta0

    void validate() const {
        if (initial_design < 1) throw ConfigError("initial_design must be >= 1");
        if (budget < initial_design)
            throw ConfigError("budget must be >= initial design size");
        if (theta0_grid.empty() || theta1_grid.empty())
            throw ConfigError("hyperparameter grids must be nonempty");
        equivalence.validate();
    }
};

/// Quotient-space compression of the GP training set: keep every infeasible
/// observation and every noise point, and one representative (the elite) per
/// detected equivalence class of feasible objective values. Returns ascending
/// observation indices.
inline std::vector<std::size_t> quotient_train_indices(
    const std::vector<double>& targets, const std::vector<bool>& feasible,
    const EquivalenceConfig& eq) {
    const EquivalenceClasses classes = detect_classes(targets, feasible, eq);
    std::vector<bool> keep(targets.size(), false);
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (!feasible[i] || classes.labels[i] == 0) keep[i] = true;
    for (std::size_t e : classes.elites) keep[e] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (keep[i]) out.push_back(i);
    return out;
}

namespace detail_bo {

/// Sparse random rule: 1-3 distinct atoms. Uniform masks are almost always
/// contradictory conjunctions on categorical universes; sparse draws give the
/// initial design a fighting chance of observing feasible subgroups.
inline BitRule random_rule(std::size_t n, Rng& rng) {
    BitRule r(n);
    const std::size_t max_atoms = std::min<std::size_t>(3, n);
    const std::size_t k = 1 + rng.uniform_index(max_atoms);
    while (r.count() < k) r.set(rng.uniform_index(n));
    return r;
}

inline bool contains(const std::vector<BitRule>& xs, const BitRule& r) {
    for (const auto& x : xs)
        if (x == r) return true;
    return false;
}

} // namespace detail_bo

/// Bayesian optimization over a discrete rule universe with the Hamming
/// kernel and Expected Improvement. Quotient-aware mode compresses the GP
/// training set to one representative observation per detected equivalence
/// class; acquisition and evaluation are otherwise identical.
inline RunRecord run_bo(const RuleEvaluator& evaluator, const BOConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const RuleUniverse& universe = evaluator.universe();
    const std::size_t n = universe.size();
    Rng rng(config.seed);

    RunRecord rec;
    rec.method = config.quotient_aware ? "bo-quotient" : "bo";
    rec.seed = config.seed;

    std::vector<BitRule> observed;
    std::vector<Evaluation> evals;
    std::vector<double> targets; // GP targets: fitness, or 0 for infeasible

    auto observe = [&](const BitRule& r) {
        const Evaluation ev = evaluator.evaluate(r);
        observed.push_back(r);
        evals.push_back(ev);
        targets.push_back(ev.feasible ? ev.fitness : 0.0);
    };

    // Initial design: distinct random non-zero rules.
    const std::uint64_t total_rules =
        (n < 64) ? ((1ull << n) - 1) : std::numeric_limits<std::uint64_t>::max();
    const std::size_t design =
        static_cast<std::size_t>(std::min<std::uint64_t>(config.initial_design, total_rules));
    while (observed.size() < design) {
        BitRule r = detail_bo::random_rule(n, rng);
        if (!detail_bo::contains(observed, r)) observe(r);
    }

    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < observed.size(); ++i)
        if (evals[i].fitness > evals[best_idx].fitness) best_idx = i;

    auto trace_row = [&](int iter, double ei, int train) {
        TraceRow row;
        row.step = iter;
        row.best_fitness = evals[best_idx].fitness;
        row.chosen_ei = ei;
        row.gp_train_size = train;
        rec.trace.push_back(row);
    };
    trace_row(0, std::numeric_limits<double>::quiet_NaN(),
              static_cast<int>(observed.size()));

    while (observed.size() < config.budget) {
        // Training set: everything, or the quotient representatives.
        std::vector<std::size_t> train_idx;
        if (config.quotient_aware) {
            std::vector<bool> feasible(observed.size());
            for (std::size_t i = 0; i < observed.size(); ++i)
                feasible[i] = evals[i].feasible;
            train_idx = quotient_train_indices(targets, feasible, config.equivalence);
        } else {
            train_idx.resize(observed.size());
            std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
        }

        std::vector<BitRule> train_x;
        std::vector<double> train_y;
        for (std::size_t i : train_idx) {
            train_x.push_back(observed[i]);
            train_y.push_back(targets[i]);
        }

        // Hyperparameters by grid-searched log marginal likelihood.
        GPState best_gp;
        double best_lml = -std::numeric_limits<double>::infinity();
        bool have_gp = false;
        for (double t0 : config.theta0_grid)
            for (double t1 : config.theta1_grid) {
                HammingKernelParams p{t0, t1, config.nugget_fraction * t0};
                try {
                    GPState gp = gp_fit(train_x, train_y, p);
                    const double lml = gp_log_marginal(gp);
                    if (!have_gp || lml > best_lml) {
                        best_lml = lml;
                        best_gp = std::move(gp);
                        have_gp = true;
                    }
                } catch (const IllConditionedError&) {
                    // skip this grid point; rethrow below if none factorize
                }
            }
        if (!have_gp)
            throw IllConditionedError("no hyperparameter grid point factorized");

        // Candidate pool.
        std::vector<BitRule> pool;
        if (n <= config.exhaustive_pool_max_n) {
            for (std::uint64_t mask = 1; mask < (1ull << n); ++mask) {
                BitRule r = BitRule::from_mask(mask, n);
                if (!detail_bo::contains(observed, r)) pool.push_back(std::move(r));
            }
        } else {
            const BitRule& incumbent = observed[best_idx];
            while (pool.size() < config.pool_size / 2) {
                BitRule r = incumbent;
                const std::size_t flips = 1 + rng.uniform_index(2);
                for (std::size_t f = 0; f < flips; ++f) {
                    const std::size_t b = rng.uniform_index(n);
                    r.set(b, !r.test(b));
                }
                if (r.any() && !detail_bo::contains(observed, r) &&
                    !detail_bo::contains(pool, r))
                    pool.push_back(std::move(r));
            }
            while (pool.size() < config.pool_size) {
                BitRule r = detail_bo::random_rule(n, rng);
                if (!detail_bo::contains(observed, r) && !detail_bo::contains(pool, r))
                    pool.push_back(std::move(r));
            }
        }
        if (pool.empty()) {
            rec.note = "search space exhausted before budget";
            break;
        }

        double f_star = 0.0;
        for (double t : targets) f_star = std::max(f_star, t);

        std::size_t chosen = 0;
        double chosen_ei = -1.0;
        for (std::size_t c = 0; c < pool.size(); ++c) {
            const auto [mu, var] = gp_posterior(best_gp, pool[c]);
            const double ei = expected_improvement(mu, var, f_star);
            if (ei > chosen_ei) {
                chosen_ei = ei;
                chosen = c;
            }
        }

        observe(pool[chosen]);
        if (evals.back().fitness > evals[best_idx].fitness)
            best_idx = observed.size() - 1;
        trace_row(static_cast<int>(observed.size() - design), chosen_ei,
                  static_cast<int>(train_x.size()));
    }

    const BitRule& best = observed[best_idx];
    const SubgroupMask mask = evaluator.apply(best);
    rec.best_fitness = evals[best_idx].fitness;
    rec.feasible = evals[best_idx].feasible;
    rec.best_rule_text = decode(best, universe);
    rec.best_rule_bits = best.to_string();
    rec.subgroup_size = evals[best_idx].subgroup_size;
    rec.subgroup_hash = detail::hex64(mask.content_hash());
    rec.evaluations = observed.size();
    rec.dataset_hash =
        detail::fnv1a_u64(cohort_hash(evaluator.cohort()), universe.content_hash());
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return rec;
}

} // namespace ruleopt
