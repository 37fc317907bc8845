#pragma once

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ruleopt/csv.hpp"
#include "ruleopt/detail/format.hpp"
#include "ruleopt/errors.hpp"

namespace ruleopt {

/// One screening filter: per-molecule cost and the fraction of molecules it
/// removes. Selectivities are treated as order-independent constants.
struct FilterProfile {
    std::string id;
    double cost = 1.0;        // c_i > 0, per molecule
    double selectivity = 0.0; // s_i in [0,1], fraction removed

    void validate() const {
        if (!(cost > 0.0)) throw ConfigError("filter '" + id + "': cost must be > 0");
        if (selectivity < 0.0 || selectivity > 1.0)
            throw ConfigError("filter '" + id + "': selectivity must lie in [0,1]");
    }
};

/// Expected per-molecule cost of an ordered pipeline:
/// c_1 + (1-s_1) c_2 + (1-s_1)(1-s_2) c_3 + ...
/// An empty pipeline costs zero by convention.
inline double expected_cost(const std::vector<FilterProfile>& pipeline) {
    double survival = 1.0;
    double total = 0.0;
    for (const auto& f : pipeline) {
        f.validate();
        total += survival * f.cost;
        survival *= (1.0 - f.selectivity);
    }
    return total;
}

/// Cost-optimal ordering: ascending cost/selectivity ratio; filters that
/// remove nothing (s = 0, infinite ratio) go last among themselves by
/// ascending cost. Ties break toward the lower id for determinism.
inline std::vector<FilterProfile> optimal_order(std::vector<FilterProfile> filters) {
    if (filters.empty()) throw ConfigError("optimal_order: empty filter set");
    for (const auto& f : filters) f.validate();
    std::stable_sort(filters.begin(), filters.end(),
                     [](const FilterProfile& a, const FilterProfile& b) {
                         const bool a_zero = a.selectivity == 0.0;
                         const bool b_zero = b.selectivity == 0.0;
                         if (a_zero != b_zero) return b_zero;
                         if (a_zero && b_zero) {
                             if (a.cost != b.cost) return a.cost < b.cost;
                             return a.id < b.id;
                         }
                         const double ra = a.cost / a.selectivity;
                         const double rb = b.cost / b.selectivity;
                         if (ra != rb) return ra < rb;
                         return a.id < b.id;
                     });
    return filters;
}

/// CSV columns: id, cost, selectivity (header required).
inline std::vector<FilterProfile> load_filters_csv(std::istream& is) {
    const auto rows = csv::read_all(is);
    if (rows.empty()) throw DataError("empty filter CSV");
    const auto& header = rows[0];
    int id_col = -1, cost_col = -1, sel_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "id") id_col = static_cast<int>(i);
        if (header[i] == "cost") cost_col = static_cast<int>(i);
        if (header[i] == "selectivity") sel_col = static_cast<int>(i);
    }
    if (id_col < 0 || cost_col < 0 || sel_col < 0)
        throw DataError("filter CSV needs columns: id, cost, selectivity");
    std::vector<FilterProfile> filters;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        FilterProfile f;
        f.id = rows[r][static_cast<std::size_t>(id_col)];
        f.cost = detail::parse_double(rows[r][static_cast<std::size_t>(cost_col)],
                                      "filter cost");
        f.selectivity = detail::parse_double(
            rows[r][static_cast<std::size_t>(sel_col)], "filter selectivity");
        f.validate();
        filters.push_back(std::move(f));
    }
    return filters;
}

/// Emits the ordered pipeline with per-stage and cumulative expected cost.
inline void write_order_csv(std::ostream& os,
                            const std::vector<FilterProfile>& ordered) {
    csv::write_row(os, {"position", "id", "cost", "selectivity",
                        "expected_stage_cost", "cumulative_expected_cost"});
    double survival = 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const double stage = survival * ordered[i].cost;
        total += stage;
        survival *= (1.0 - ordered[i].selectivity);
        csv::write_row(os, {std::to_string(i), ordered[i].id,
                            detail::format_double(ordered[i].cost),
                            detail::format_double(ordered[i].selectivity),
                            detail::format_double(stage),
                            detail::format_double(total)});
    }
}

} // namespace ruleopt
