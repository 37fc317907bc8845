#pragma once

#include <bit>
#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "ruleopt/cohort.hpp"
#include "ruleopt/detail/hash.hpp"
#include "ruleopt/errors.hpp"
#include "ruleopt/rule.hpp"

namespace ruleopt {

struct ObjectiveConfig {
    std::size_t min_subgroup_size = 10;
    double infeasible_fitness = -1.0e9;

    void validate() const {
        if (min_subgroup_size < 1) throw ConfigError("min_subgroup_size must be >= 1");
    }
};

struct Evaluation {
    double fitness = 0.0;
    std::size_t subgroup_size = 0;
    bool feasible = false;
};

/// Packed record-index set (over all records of a cohort; bits are only ever
/// set for non-HV records by the evaluator).
class SubgroupMask {
public:
    SubgroupMask() = default;
    explicit SubgroupMask(std::size_t n_records)
        : n_(n_records), words_((n_records + 63) / 64, 0ull) {}

    std::size_t record_count() const { return n_; }

    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1ull; }
    void set(std::size_t i) { words_[i / 64] |= (1ull << (i % 64)); }

    void intersect_with(const SubgroupMask& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    }

    void union_with(const SubgroupMask& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t word = words_[w];
            while (word) {
                const int b = std::countr_zero(word);
                out.push_back(w * 64 + static_cast<std::size_t>(b));
                word &= word - 1;
            }
        }
        return out;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

    std::uint64_t content_hash() const { return detail::fnv1a_words(words_); }

    bool operator==(const SubgroupMask& o) const {
        return n_ == o.n_ && words_ == o.words_;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Mean biomarker of the subgroup divided by the mean biomarker of the HV
/// records. Subgroup must be nonempty (infeasibility is handled upstream).
inline double fold_change(const std::vector<std::size_t>& subgroup,
                          const Cohort& cohort) {
    if (subgroup.empty()) throw Error("fold_change: empty subgroup");
    double hv_sum = 0.0;
    std::size_t hv_n = 0;
    for (std::size_t r = 0; r < cohort.records.size(); ++r) {
        if (cohort.is_hv[r]) {
            hv_sum += cohort.records[r].biomarker;
            ++hv_n;
        }
    }
    if (hv_n == 0) throw Error("fold_change: empty HV reference");
    double sub_sum = 0.0;
    for (std::size_t r : subgroup) sub_sum += cohort.records[r].biomarker;
    const double sub_mean = sub_sum / static_cast<double>(subgroup.size());
    const double hv_mean = hv_sum / static_cast<double>(hv_n);
    return sub_mean / hv_mean;
}

/// Monoid action of a rule on the cohort: the non-HV records satisfying every
/// conjunct. The identity rule returns all non-HV records.
inline std::vector<std::size_t> apply_rule(const BitRule& rule,
                                           const RuleUniverse& universe,
                                           const Cohort& cohort) {
    if (rule.size() != universe.size())
        throw UniverseMismatchError("apply_rule: rule length does not match universe");
    const auto set_atoms = rule.set_bits();
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < cohort.records.size(); ++r) {
        if (cohort.is_hv[r]) continue;
        bool ok = true;
        for (std::size_t id : set_atoms)
            if (!atom_matches(universe.atom(id), cohort.records[r], cohort.schema)) {
                ok = false;
                break;
            }
        if (ok) out.push_back(r);
    }
    return out;
}

/// Evaluates rules against one (cohort, universe, objective) triple.
/// Precomputes per-atom record masks so applying a BitRule is a handful of
/// word-ANDs, and memoizes fitness by induced subgroup bitmap — rules that
/// collapse to the same subgroup are evaluated once.
class RuleEvaluator {
public:
    RuleEvaluator(const Cohort& cohort, const RuleUniverse& universe,
                  const ObjectiveConfig& config)
        : cohort_(cohort), universe_(universe), config_(config) {
        config_.validate();
        const std::size_t n_rec = cohort.records.size();
        non_hv_ = SubgroupMask(n_rec);
        double hv_sum = 0.0;
        std::size_t hv_n = 0;
        biomarker_.resize(n_rec);
        for (std::size_t r = 0; r < n_rec; ++r) {
            biomarker_[r] = cohort.records[r].biomarker;
            if (cohort.is_hv[r]) {
                hv_sum += biomarker_[r];
                ++hv_n;
            } else {
                non_hv_.set(r);
            }
        }
        hv_mean_ = hv_sum / static_cast<double>(hv_n);

        atom_masks_.reserve(universe.size());
        for (std::size_t a = 0; a < universe.size(); ++a) {
            SubgroupMask m(n_rec);
            for (std::size_t r = 0; r < n_rec; ++r)
                if (!cohort.is_hv[r] &&
                    atom_matches(universe.atom(a), cohort.records[r], cohort.schema))
                    m.set(r);
            atom_masks_.push_back(std::move(m));
        }
    }

    const Cohort& cohort() const { return cohort_; }
    const RuleUniverse& universe() const { return universe_; }
    const ObjectiveConfig& config() const { return config_; }
    const SubgroupMask& non_hv_mask() const { return non_hv_; }
    const SubgroupMask& atom_mask(std::size_t atom_id) const {
        return atom_masks_.at(atom_id);
    }
    double hv_mean() const { return hv_mean_; }

    SubgroupMask apply(const BitRule& rule) const {
        if (rule.size() != universe_.size())
            throw UniverseMismatchError("evaluate: rule length does not match universe");
        SubgroupMask m = non_hv_;
        for (std::size_t id : rule.set_bits()) m.intersect_with(atom_masks_[id]);
        return m;
    }

    Evaluation evaluate(const BitRule& rule) const { return evaluate_mask(apply(rule)); }

    /// Shared entry point for both the atomic (BitRule) and the decoded
    /// chromosome path; identical subgroups always yield bit-identical fitness.
    Evaluation evaluate_mask(const SubgroupMask& mask) const {
        Evaluation ev;
        ev.subgroup_size = mask.count();
        ev.feasible = ev.subgroup_size >= config_.min_subgroup_size;
        if (!ev.feasible) {
            ev.fitness = config_.infeasible_fitness;
            return ev;
        }
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            auto it = cache_.find(mask.words());
            if (it != cache_.end()) {
                ev.fitness = it->second;
                ++cache_hits_;
                return ev;
            }
        }
        const double fc = fold_of_mask(mask, ev.subgroup_size);
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            cache_.emplace(mask.words(), fc);
        }
        ev.fitness = fc;
        return ev;
    }

    /// Same arithmetic without memoization; for full enumerations where the
    /// cache would only grow.
    Evaluation evaluate_mask_nocache(const SubgroupMask& mask) const {
        Evaluation ev;
        ev.subgroup_size = mask.count();
        ev.feasible = ev.subgroup_size >= config_.min_subgroup_size;
        ev.fitness = ev.feasible ? fold_of_mask(mask, ev.subgroup_size)
                                 : config_.infeasible_fitness;
        return ev;
    }

    std::size_t cache_size() const {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        return cache_.size();
    }

    std::size_t cache_hits() const {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        return cache_hits_;
    }

private:
    double fold_of_mask(const SubgroupMask& mask, std::size_t count) const {
        double sum = 0.0;
        for (std::size_t r : mask.indices()) sum += biomarker_[r];
        return (sum / static_cast<double>(count)) / hv_mean_;
    }

    struct WordsHash {
        std::size_t operator()(const std::vector<std::uint64_t>& w) const {
            return static_cast<std::size_t>(detail::fnv1a_words(w));
        }
    };

    const Cohort& cohort_;
    const RuleUniverse& universe_;
    ObjectiveConfig config_;
    SubgroupMask non_hv_;
    std::vector<SubgroupMask> atom_masks_;
    std::vector<double> biomarker_;
    double hv_mean_ = 1.0;
    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::vector<std::uint64_t>, double, WordsHash> cache_;
    mutable std::size_t cache_hits_ = 0;
};

/// One-shot evaluation without building a persistent evaluator.
inline Evaluation evaluate(const BitRule& rule, const RuleUniverse& universe,
                           const Cohort& cohort, const ObjectiveConfig& config) {
    config.validate();
    const auto subgroup = apply_rule(rule, universe, cohort);
    Evaluation ev;
    ev.subgroup_size = subgroup.size();
    ev.feasible = ev.subgroup_size >= config.min_subgroup_size;
    ev.fitness =
        ev.feasible ? fold_change(subgroup, cohort) : config.infeasible_fitness;
    return ev;
}

} // namespace ruleopt
