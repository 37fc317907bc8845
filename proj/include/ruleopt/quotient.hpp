#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "ruleopt/errors.hpp"

namespace ruleopt {

/// Parameters of the approximate ("epsilon-functional") equivalence relation:
/// two rules are grouped when their objective values lie within epsilon.
struct EquivalenceConfig {
    double epsilon = 0.1; // objective-value tolerance (strict: |f_i - f_j| < eps)
    int min_pts = 3;      // DBSCAN minimum neighborhood size (self inclusive)
    int tau = 10;         // generations between detections

    void validate() const {
        if (!(epsilon > 0.0)) throw ConfigError("equivalence epsilon must be > 0");
        if (min_pts < 2) throw ConfigError("equivalence min_pts must be >= 2");
        if (tau < 1) throw ConfigError("equivalence tau must be >= 1");
    }
};

/// DBSCAN over scalars with distance |f_i - f_j| and a strict radius:
///   - neighborhoods include the point itself; core iff >= min_pts neighbors;
///   - clusters are the connected components of core points, plus border
///     points attached to the cluster of their nearest core (ties toward the
///     lower-valued core);
///   - everything else is noise (label 0).
/// Cluster ids are numbered by ascending core value, so labels depend only on
/// the multiset of values, not on input order.
inline std::vector<int> dbscan_1d(const std::vector<double>& values, double epsilon,
                                  int min_pts) {
    const std::size_t n = values.size();
    std::vector<int> labels(n, 0);
    if (n == 0) return labels;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b;
    });
    auto val = [&](std::size_t s) { return values[order[s]]; };

    // Strict-radius neighbor window per sorted position (two-pointer).
    std::vector<bool> core(n, false);
    std::size_t lo = 0, hi = 0;
    for (std::size_t s = 0; s < n; ++s) {
        while (lo < n && val(s) - val(lo) >= epsilon) ++lo;
        if (hi < s + 1) hi = s + 1;
        while (hi < n && val(hi) - val(s) < epsilon) ++hi;
        core[s] = (hi - lo) >= static_cast<std::size_t>(min_pts);
    }

    // Components of core points: consecutive cores chain when their value gap
    // is < epsilon. Numbered in ascending value order.
    std::vector<int> comp(n, 0); // per sorted position; 0 = not in a component
    int cluster = 0;
    double prev_core_val = 0.0;
    bool have_prev = false;
    for (std::size_t s = 0; s < n; ++s) {
        if (!core[s]) continue;
        if (!have_prev || val(s) - prev_core_val >= epsilon) ++cluster;
        comp[s] = cluster;
        prev_core_val = val(s);
        have_prev = true;
    }

    // Border points adopt the cluster of the nearest core within epsilon.
    std::vector<std::ptrdiff_t> prev_core(n, -1), next_core(n, -1);
    std::ptrdiff_t last = -1;
    for (std::size_t s = 0; s < n; ++s) {
        if (core[s]) last = static_cast<std::ptrdiff_t>(s);
        prev_core[s] = last;
    }
    last = -1;
    for (std::size_t s = n; s-- > 0;) {
        if (core[s]) last = static_cast<std::ptrdiff_t>(s);
        next_core[s] = last;
    }

    for (std::size_t s = 0; s < n; ++s) {
        if (core[s]) {
            labels[order[s]] = comp[s];
            continue;
        }
        const double v = val(s);
        double dl = std::numeric_limits<double>::infinity();
        double dr = std::numeric_limits<double>::infinity();
        if (prev_core[s] >= 0) dl = v - val(static_cast<std::size_t>(prev_core[s]));
        if (next_core[s] >= 0) dr = val(static_cast<std::size_t>(next_core[s])) - v;
        if (dl <= dr && dl < epsilon)
            labels[order[s]] = comp[static_cast<std::size_t>(prev_core[s])];
        else if (dr < dl && dr < epsilon)
            labels[order[s]] = comp[static_cast<std::size_t>(next_core[s])];
        // else noise (0)
    }
    return labels;
}

struct EquivalenceClasses {
    /// Per-individual label; 0 for noise and for individuals excluded before
    /// clustering (infeasible or identity-rule), 1..K otherwise.
    std::vector<int> labels;
    /// Member indices per class, ascending; classes[k] holds class k+1.
    std::vector<std::vector<std::size_t>> classes;
    /// One member index per class: the max-fitness member (ties: lowest index).
    std::vector<std::size_t> elites;
    /// Whether clustering actually ran (|valid| >= min_pts).
    bool ran = false;
};

/// Groups a population by epsilon-proximity of objective values. `valid`
/// flags which individuals participate (callers exclude identity-rule and
/// infeasible individuals); clustering only runs when enough are valid.
inline EquivalenceClasses detect_classes(const std::vector<double>& fitnesses,
                                         const std::vector<bool>& valid,
                                         const EquivalenceConfig& config) {
    config.validate();
    if (fitnesses.size() != valid.size())
        throw Error("detect_classes: fitness/validity size mismatch");

    EquivalenceClasses out;
    out.labels.assign(fitnesses.size(), 0);

    std::vector<std::size_t> valid_idx;
    for (std::size_t i = 0; i < valid.size(); ++i)
        if (valid[i]) valid_idx.push_back(i);
    if (valid_idx.size() < static_cast<std::size_t>(config.min_pts)) return out;

    std::vector<double> values;
    values.reserve(valid_idx.size());
    for (std::size_t i : valid_idx) values.push_back(fitnesses[i]);

    const auto sub_labels = dbscan_1d(values, config.epsilon, config.min_pts);
    out.ran = true;

    int max_label = 0;
    for (int l : sub_labels) max_label = std::max(max_label, l);
    std::vector<std::vector<std::size_t>> raw(static_cast<std::size_t>(max_label));
    for (std::size_t k = 0; k < valid_idx.size(); ++k)
        if (sub_labels[k] > 0)
            raw[static_cast<std::size_t>(sub_labels[k] - 1)].push_back(valid_idx[k]);

    // Clusters below min_pts members yield no niche (the elite-set definition
    // requires |C_k| >= minPts); their members count as noise.
    std::vector<int> relabel(raw.size() + 1, 0);
    for (std::size_t c = 0; c < raw.size(); ++c) {
        if (raw[c].size() < static_cast<std::size_t>(config.min_pts)) continue;
        relabel[c + 1] = static_cast<int>(out.classes.size()) + 1;
        out.classes.push_back(std::move(raw[c]));
    }
    for (std::size_t k = 0; k < valid_idx.size(); ++k)
        if (sub_labels[k] > 0)
            out.labels[valid_idx[k]] = relabel[static_cast<std::size_t>(sub_labels[k])];

    for (const auto& cls : out.classes) {
        std::size_t best = cls[0];
        for (std::size_t m : cls)
            if (fitnesses[m] > fitnesses[best]) best = m;
        out.elites.push_back(best);
    }
    return out;
}

} // namespace ruleopt
