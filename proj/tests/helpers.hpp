#pragma once

// Shared fixtures and independent reference implementations ("oracles") used
// across the test suites. Everything here is deliberately written the dumb
// way: linear scans, O(n^2) loops, textbook formulas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "ruleopt/cohort.hpp"
#include "ruleopt/rng.hpp"
#include "ruleopt/rule.hpp"

namespace testutil {

// The dry-eye example universe: DED severity (4 levels), Gender (2), MGD (2).
// Atom ids 0..7 follow the declaration order.
inline ruleopt::Schema paper_schema() {
    ruleopt::Schema s;
    s.categorical = {
        {"DED", {"healthy", "mild", "moderate", "severe"}},
        {"Gender", {"male", "female"}},
        {"MGD", {"absent", "present"}},
    };
    s.biomarker_field = "biomarker";
    return s;
}

inline ruleopt::RuleUniverse paper_universe() {
    std::vector<ruleopt::AtomicRule> atoms;
    const auto schema = paper_schema();
    for (const auto& f : schema.categorical)
        for (const auto& lvl : f.levels) {
            ruleopt::AtomicRule a;
            a.id = atoms.size();
            a.field = f.name;
            a.kind = ruleopt::PredicateKind::CategoryEq;
            a.level = lvl;
            atoms.push_back(std::move(a));
        }
    return ruleopt::RuleUniverse(std::move(atoms));
}

inline ruleopt::BitRule random_rule(std::size_t n, ruleopt::Rng& rng) {
    ruleopt::BitRule r(n);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.bernoulli(0.5)) r.set(i);
    return r;
}

inline std::set<std::size_t> random_subset(std::size_t n, ruleopt::Rng& rng) {
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
        if (rng.bernoulli(0.5)) s.insert(i);
    return s;
}

// ---------------------------------------------------------------------------
// Reference DBSCAN (O(n^2)): same semantics as the production code — core
// points by strict-radius neighborhood counts, clusters as connected
// components of cores (found by BFS over the pairwise graph), borders to the
// nearest core (ties toward the lower value) — but no sorting tricks.
// ---------------------------------------------------------------------------

inline std::vector<int> reference_dbscan_1d(const std::vector<double>& values,
                                            double epsilon, int min_pts) {
    const std::size_t n = values.size();
    std::vector<int> labels(n, 0);
    if (n == 0) return labels;

    auto is_neighbor = [&](std::size_t i, std::size_t j) {
        return std::abs(values[i] - values[j]) < epsilon;
    };

    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (is_neighbor(i, j)) ++count;
        core[i] = count >= min_pts;
    }

    // Components of cores via BFS over the pairwise neighbor graph.
    std::vector<int> comp(n, 0);
    int next_comp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || comp[i] != 0) continue;
        ++next_comp;
        std::vector<std::size_t> queue{i};
        comp[i] = next_comp;
        while (!queue.empty()) {
            const std::size_t q = queue.back();
            queue.pop_back();
            for (std::size_t j = 0; j < n; ++j)
                if (core[j] && comp[j] == 0 && is_neighbor(q, j)) {
                    comp[j] = next_comp;
                    queue.push_back(j);
                }
        }
    }

    // Renumber components by ascending minimum core value.
    std::vector<double> comp_min(static_cast<std::size_t>(next_comp),
                                 std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        if (core[i])
            comp_min[static_cast<std::size_t>(comp[i] - 1)] =
                std::min(comp_min[static_cast<std::size_t>(comp[i] - 1)], values[i]);
    std::vector<int> order(static_cast<std::size_t>(next_comp));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return comp_min[static_cast<std::size_t>(a)] <
               comp_min[static_cast<std::size_t>(b)];
    });
    std::vector<int> renumber(static_cast<std::size_t>(next_comp) + 1, 0);
    for (std::size_t k = 0; k < order.size(); ++k)
        renumber[static_cast<std::size_t>(order[k]) + 1] = static_cast<int>(k) + 1;

    for (std::size_t i = 0; i < n; ++i)
        if (core[i]) labels[i] = renumber[static_cast<std::size_t>(comp[i])];

    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best_d = std::numeric_limits<double>::infinity();
        double best_core_val = 0.0;
        int best_label = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!core[j] || !is_neighbor(i, j)) continue;
            const double d = std::abs(values[i] - values[j]);
            const bool closer = d < best_d;
            const bool tie_lower =
                d == best_d && best_label != 0 && values[j] < best_core_val;
            if (closer || tie_lower) {
                best_d = d;
                best_core_val = values[j];
                best_label = labels[j];
            }
        }
        labels[i] = best_label;
    }
    return labels;
}

/// Partition equality ignoring label numbering.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::set<std::set<std::size_t>> pa, pb;
    std::set<std::size_t> noise_a, noise_b;
    const int max_a = a.empty() ? 0 : *std::max_element(a.begin(), a.end());
    const int max_b = b.empty() ? 0 : *std::max_element(b.begin(), b.end());
    std::vector<std::set<std::size_t>> ca(static_cast<std::size_t>(max_a));
    std::vector<std::set<std::size_t>> cb(static_cast<std::size_t>(max_b));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0)
            noise_a.insert(i);
        else
            ca[static_cast<std::size_t>(a[i] - 1)].insert(i);
        if (b[i] == 0)
            noise_b.insert(i);
        else
            cb[static_cast<std::size_t>(b[i] - 1)].insert(i);
    }
    for (auto& c : ca)
        if (!c.empty()) pa.insert(c);
    for (auto& c : cb)
        if (!c.empty()) pb.insert(c);
    return noise_a == noise_b && pa == pb;
}

// ---------------------------------------------------------------------------
// Dense linear-algebra oracle: Gauss-Jordan solve (row pivoting), independent
// of the production Cholesky route.
// ---------------------------------------------------------------------------

inline std::vector<double> gauss_solve(std::vector<double> a, std::size_t n,
                                       std::vector<double> b) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double d = a[col * n + col];
        for (std::size_t c = 0; c < n; ++c) a[col * n + c] /= d;
        b[col] /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    return b;
}

/// Smallest eigenvalue of a symmetric matrix via cyclic Jacobi rotations.
inline double min_eigenvalue_symmetric(std::vector<double> a, std::size_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-30) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double c = std::cos(theta), s = std::sin(theta);
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
    }
    double mn = a[0];
    for (std::size_t i = 0; i < n; ++i) mn = std::min(mn, a[i * n + i]);
    return mn;
}

} // namespace testutil
