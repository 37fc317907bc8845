#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ruleopt/csv.hpp"
#include "ruleopt/detail/format.hpp"
#include "ruleopt/detail/hash.hpp"
#include "ruleopt/errors.hpp"
#include "ruleopt/rng.hpp"
#include "ruleopt/rule.hpp"

namespace ruleopt {

// ---------------------------------------------------------------------------
// Schema and records
// ---------------------------------------------------------------------------

struct CategoricalField {
    std::string name;
    std::vector<std::string> levels; // declared order is the atom order
};

struct NumericField {
    std::string name;
    double min = 0.0; // observed/sampling range
    double max = 1.0;
};

/// Field layout of a cohort: categorical fields, numeric fields, and the
/// biomarker column name. Field names must be unique across both kinds.
struct Schema {
    std::vector<CategoricalField> categorical;
    std::vector<NumericField> numeric;
    std::string biomarker_field = "biomarker";

    void validate() const {
        std::set<std::string> names;
        for (const auto& f : categorical) {
            if (!names.insert(f.name).second)
                throw DataError("duplicate field name '" + f.name + "'");
            if (f.levels.size() < 2)
                throw DataError("categorical field '" + f.name +
                                "' needs at least 2 levels");
        }
        for (const auto& f : numeric) {
            if (!names.insert(f.name).second)
                throw DataError("duplicate field name '" + f.name + "'");
            if (!(f.min <= f.max))
                throw DataError("numeric field '" + f.name + "' has min > max");
        }
        if (names.count(biomarker_field))
            throw DataError("biomarker column '" + biomarker_field +
                            "' collides with a schema field");
        if (categorical.empty() && numeric.empty())
            throw DataError("schema has no fields");
    }

    int categorical_index(const std::string& name) const {
        for (std::size_t i = 0; i < categorical.size(); ++i)
            if (categorical[i].name == name) return static_cast<int>(i);
        return -1;
    }

    int numeric_index(const std::string& name) const {
        for (std::size_t i = 0; i < numeric.size(); ++i)
            if (numeric[i].name == name) return static_cast<int>(i);
        return -1;
    }

    int level_index(std::size_t cat_field, const std::string& level) const {
        const auto& ls = categorical[cat_field].levels;
        for (std::size_t i = 0; i < ls.size(); ++i)
            if (ls[i] == level) return static_cast<int>(i);
        return -1;
    }
};

/// One patient/compound. Categorical values are stored as level indices into
/// the schema; numeric values may be missing.
struct Record {
    std::string id;
    std::vector<int> cat_values;                 // per categorical field
    std::vector<std::optional<double>> num_values; // per numeric field
    double biomarker = 1.0;                      // strictly positive
};

/// Record set plus the healthy-volunteer flags. Immutable after
/// construction/load; safe to share across optimizer workers.
struct Cohort {
    Schema schema;
    std::vector<Record> records;
    std::vector<bool> is_hv;

    std::size_t size() const { return records.size(); }

    std::size_t hv_count() const {
        return static_cast<std::size_t>(std::count(is_hv.begin(), is_hv.end(), true));
    }

    std::size_t non_hv_count() const { return size() - hv_count(); }

    void validate() const {
        schema.validate();
        if (records.size() != is_hv.size())
            throw DataError("hv mask size does not match record count");
        if (hv_count() == 0)
            throw DataError("cohort has no healthy-volunteer (is_hv=true) records");
        if (non_hv_count() == 0)
            throw DataError("cohort has no non-HV records to search over");
        for (std::size_t r = 0; r < records.size(); ++r) {
            const auto& rec = records[r];
            if (rec.cat_values.size() != schema.categorical.size() ||
                rec.num_values.size() != schema.numeric.size())
                throw DataError("record " + rec.id + " does not match schema width");
            if (!(rec.biomarker > 0.0) || !std::isfinite(rec.biomarker))
                throw DataError("non-positive biomarker in record " + rec.id);
            for (std::size_t c = 0; c < rec.cat_values.size(); ++c)
                if (rec.cat_values[c] < 0 ||
                    rec.cat_values[c] >=
                        static_cast<int>(schema.categorical[c].levels.size()))
                    throw DataError("invalid level index in record " + rec.id);
            for (const auto& v : rec.num_values)
                if (v && !std::isfinite(*v))
                    throw DataError("non-finite numeric value in record " + rec.id);
        }
    }
};

/// True iff the record satisfies the atomic predicate. Records with a missing
/// numeric value fail any numeric atom on that field.
inline bool atom_matches(const AtomicRule& atom, const Record& rec,
                         const Schema& schema) {
    switch (atom.kind) {
    case PredicateKind::CategoryEq: {
        const int f = schema.categorical_index(atom.field);
        if (f < 0) throw DataError("atom references unknown field '" + atom.field + "'");
        const int lvl = schema.level_index(static_cast<std::size_t>(f), atom.level);
        if (lvl < 0)
            throw DataError("atom references unknown level '" + atom.level +
                            "' of field '" + atom.field + "'");
        return rec.cat_values[static_cast<std::size_t>(f)] == lvl;
    }
    case PredicateKind::NumericLE: {
        const int f = schema.numeric_index(atom.field);
        if (f < 0) throw DataError("atom references unknown field '" + atom.field + "'");
        const auto& v = rec.num_values[static_cast<std::size_t>(f)];
        return v && *v <= atom.threshold;
    }
    case PredicateKind::NumericGT: {
        const int f = schema.numeric_index(atom.field);
        if (f < 0) throw DataError("atom references unknown field '" + atom.field + "'");
        const auto& v = rec.num_values[static_cast<std::size_t>(f)];
        return v && *v > atom.threshold;
    }
    }
    return false;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Columns: record_id, is_hv (true/false), one column per schema field, and
/// the biomarker column. Column order is free; names must match exactly.
inline Cohort load_csv(std::istream& is, const Schema& schema) {
    schema.validate();
    auto rows = csv::read_all(is);
    if (rows.empty()) throw DataError("empty CSV: no header row");
    const auto& header = rows[0];

    auto find_col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw DataError("missing column '" + name + "' in CSV header");
    };

    const int id_col = find_col("record_id");
    const int hv_col = find_col("is_hv");
    const int bio_col = find_col(schema.biomarker_field);
    std::vector<int> cat_cols, num_cols;
    for (const auto& f : schema.categorical) cat_cols.push_back(find_col(f.name));
    for (const auto& f : schema.numeric) num_cols.push_back(find_col(f.name));

    Cohort cohort;
    cohort.schema = schema;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw DataError("row " + std::to_string(r) + " has " +
                            std::to_string(row.size()) + " fields, header has " +
                            std::to_string(header.size()));
        Record rec;
        rec.id = row[static_cast<std::size_t>(id_col)];
        const std::string& hv = row[static_cast<std::size_t>(hv_col)];
        if (hv == "true")
            cohort.is_hv.push_back(true);
        else if (hv == "false")
            cohort.is_hv.push_back(false);
        else
            throw DataError("is_hv must be 'true' or 'false', got '" + hv + "'");

        for (std::size_t c = 0; c < cat_cols.size(); ++c) {
            const std::string& v = row[static_cast<std::size_t>(cat_cols[c])];
            const int lvl = schema.level_index(c, v);
            if (lvl < 0)
                throw DataError("unknown level '" + v + "' for field '" +
                                schema.categorical[c].name + "' in record " + rec.id);
            rec.cat_values.push_back(lvl);
        }
        for (std::size_t c = 0; c < num_cols.size(); ++c) {
            const std::string& v = row[static_cast<std::size_t>(num_cols[c])];
            if (v.empty())
                rec.num_values.push_back(std::nullopt);
            else
                rec.num_values.push_back(
                    detail::parse_double(v, "field " + schema.numeric[c].name));
        }
        const std::string& bv = row[static_cast<std::size_t>(bio_col)];
        rec.biomarker = detail::parse_double(bv, "biomarker");
        if (!(rec.biomarker > 0.0))
            throw DataError("non-positive biomarker " + bv + " in record " + rec.id);
        cohort.records.push_back(std::move(rec));
    }
    cohort.validate();
    return cohort;
}

inline void write_csv(std::ostream& os, const Cohort& cohort) {
    std::vector<std::string> header{"record_id", "is_hv"};
    for (const auto& f : cohort.schema.categorical) header.push_back(f.name);
    for (const auto& f : cohort.schema.numeric) header.push_back(f.name);
    header.push_back(cohort.schema.biomarker_field);
    csv::write_row(os, header);

    for (std::size_t r = 0; r < cohort.records.size(); ++r) {
        const auto& rec = cohort.records[r];
        std::vector<std::string> row{rec.id, cohort.is_hv[r] ? "true" : "false"};
        for (std::size_t c = 0; c < rec.cat_values.size(); ++c)
            row.push_back(cohort.schema.categorical[c]
                              .levels[static_cast<std::size_t>(rec.cat_values[c])]);
        for (const auto& v : rec.num_values)
            row.push_back(v ? detail::format_double(*v) : "");
        row.push_back(detail::format_double(rec.biomarker));
        csv::write_row(os, row);
    }
}

/// Content hash over the canonical CSV serialization.
inline std::uint64_t cohort_hash(const Cohort& cohort) {
    std::ostringstream os;
    write_csv(os, cohort);
    return detail::fnv1a(os.str());
}

// ---------------------------------------------------------------------------
// Universe construction
// ---------------------------------------------------------------------------

struct UniverseConfig {
    /// Number of interior quantile cut points per numeric field (9 = deciles).
    int quantile_points = 9;
};

/// Linear-interpolation quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t m = sorted.size();
    if (m == 1) return sorted[0];
    const double pos = q * static_cast<double>(m - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= m) return sorted[m - 1];
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

/// Materializes the discrete rule universe for a cohort: one CategoryEq atom
/// per level (categorical fields first, in schema order), then numeric atoms
/// on a quantile grid of the observed non-HV values (per field, thresholds
/// ascending, <= before >).
inline RuleUniverse build_universe(const Cohort& cohort,
                                   const UniverseConfig& cfg = {}) {
    if (cfg.quantile_points < 1) throw ConfigError("quantile_points must be >= 1");
    std::vector<AtomicRule> atoms;
    const Schema& schema = cohort.schema;
    for (const auto& f : schema.categorical) {
        for (const auto& lvl : f.levels) {
            AtomicRule a;
            a.id = atoms.size();
            a.field = f.name;
            a.kind = PredicateKind::CategoryEq;
            a.level = lvl;
            atoms.push_back(std::move(a));
        }
    }
    for (std::size_t fi = 0; fi < schema.numeric.size(); ++fi) {
        std::vector<double> values;
        for (std::size_t r = 0; r < cohort.records.size(); ++r) {
            if (cohort.is_hv[r]) continue;
            const auto& v = cohort.records[r].num_values[fi];
            if (v) values.push_back(*v);
        }
        if (values.empty()) continue;
        std::sort(values.begin(), values.end());
        std::vector<double> grid;
        for (int k = 1; k <= cfg.quantile_points; ++k) {
            const double q = static_cast<double>(k) /
                             static_cast<double>(cfg.quantile_points + 1);
            grid.push_back(quantile_sorted(values, q));
        }
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        for (double t : grid) {
            AtomicRule le;
            le.id = atoms.size();
            le.field = schema.numeric[fi].name;
            le.kind = PredicateKind::NumericLE;
            le.threshold = t;
            atoms.push_back(std::move(le));
            AtomicRule gt;
            gt.id = atoms.size();
            gt.field = schema.numeric[fi].name;
            gt.kind = PredicateKind::NumericGT;
            gt.threshold = t;
            atoms.push_back(std::move(gt));
        }
    }
    return RuleUniverse(std::move(atoms));
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

struct SyntheticConfig {
    double biomarker_min = 0.5; // biomarker sampled uniformly on this interval
    double biomarker_max = 20.0;
};

/// Uniform synthetic cohort: categorical values uniform over levels, numerics
/// uniform over [min,max], biomarker uniform over the configured positive
/// interval, HV membership Bernoulli(hv_fraction). Pure function of
/// (schema, parameters, seed).
inline Cohort generate_synthetic(const Schema& schema, std::size_t n_records,
                                 double hv_fraction, std::uint64_t seed,
                                 const SyntheticConfig& cfg = {}) {
    schema.validate();
    if (n_records < 2) throw ConfigError("n_records must be >= 2");
    if (!(hv_fraction > 0.0 && hv_fraction < 1.0))
        throw ConfigError("hv_fraction must lie in (0,1)");
    if (!(cfg.biomarker_min > 0.0 && cfg.biomarker_min <= cfg.biomarker_max))
        throw ConfigError("biomarker interval must be positive");

    Rng rng(seed);
    Cohort cohort;
    cohort.schema = schema;

    // HV flags drawn as a block; redraw in the rare case every flag agrees.
    std::vector<bool> hv(n_records, false);
    while (true) {
        bool any_hv = false, any_non = false;
        for (std::size_t i = 0; i < n_records; ++i) {
            hv[i] = rng.bernoulli(hv_fraction);
            (hv[i] ? any_hv : any_non) = true;
        }
        if (any_hv && any_non) break;
    }
    cohort.is_hv = hv;

    for (std::size_t i = 0; i < n_records; ++i) {
        Record rec;
        rec.id = "r" + std::to_string(i);
        for (const auto& f : schema.categorical)
            rec.cat_values.push_back(
                static_cast<int>(rng.uniform_index(f.levels.size())));
        for (const auto& f : schema.numeric)
            rec.num_values.push_back(rng.uniform(f.min, f.max));
        rec.biomarker = rng.uniform(cfg.biomarker_min, cfg.biomarker_max);
        cohort.records.push_back(std::move(rec));
    }
    cohort.validate();
    return cohort;
}

/// One biomarker plant: all non-HV records matched by the rule get their
/// biomarker multiplied by `effect`. HV records are never scaled; they are
/// the fold-change reference.
struct Plant {
    std::set<std::size_t> atoms; // conjuncts, as universe atom ids
    double effect = 1.0;
};

struct PlantedDataset {
    Cohort cohort;
    RuleUniverse universe;
    BitRule planted_rule;   // first plant, for the ground-truth sidecar
    std::size_t planted_count = 0; // non-HV records matched by the first plant
};

/// Synthetic cohort with one or more planted enriched subgroups. Regenerates
/// (bounded retries) until every plant selects at least `min_subgroup` non-HV
/// records under the sampled covariates.
inline PlantedDataset generate_planted(const Schema& schema, std::size_t n_records,
                                       double hv_fraction, std::uint64_t seed,
                                       const std::vector<Plant>& plants,
                                       std::size_t min_subgroup,
                                       const SyntheticConfig& synth_cfg = {},
                                       const UniverseConfig& uni_cfg = {},
                                       int max_retries = 64) {
    if (plants.empty()) throw ConfigError("at least one plant required");
    for (const auto& p : plants) {
        if (p.atoms.empty()) throw ConfigError("planted rule must have >= 1 atom");
        if (!(p.effect > 0.0)) throw ConfigError("plant effect must be positive");
    }

    for (int attempt = 0; attempt < max_retries; ++attempt) {
        const std::uint64_t attempt_seed =
            detail::mix64(seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(attempt));
        Cohort cohort =
            generate_synthetic(schema, n_records, hv_fraction, attempt_seed, synth_cfg);
        RuleUniverse universe = build_universe(cohort, uni_cfg);

        for (const auto& p : plants)
            for (std::size_t id : p.atoms)
                if (id >= universe.size())
                    throw ConfigError("planted atom id " + std::to_string(id) +
                                      " outside universe of size " +
                                      std::to_string(universe.size()));

        auto matched = [&](const Plant& p, const Record& rec) {
            for (std::size_t id : p.atoms)
                if (!atom_matches(universe.atom(id), rec, schema)) return false;
            return true;
        };

        bool feasible = true;
        std::size_t first_count = 0;
        for (std::size_t pi = 0; pi < plants.size() && feasible; ++pi) {
            std::size_t count = 0;
            for (std::size_t r = 0; r < cohort.records.size(); ++r)
                if (!cohort.is_hv[r] && matched(plants[pi], cohort.records[r])) ++count;
            if (pi == 0) first_count = count;
            if (count < min_subgroup) feasible = false;
        }
        if (!feasible) continue;

        for (const auto& p : plants)
            for (std::size_t r = 0; r < cohort.records.size(); ++r)
                if (!cohort.is_hv[r] && matched(p, cohort.records[r]))
                    cohort.records[r].biomarker *= p.effect;

        PlantedDataset out;
        out.cohort = std::move(cohort);
        out.planted_rule = encode(plants[0].atoms, universe);
        out.universe = std::move(universe);
        out.planted_count = first_count;
        return out;
    }
    throw InfeasiblePlantError(
        "could not realize planted rule with >= " + std::to_string(min_subgroup) +
        " matching non-HV records in " + std::to_string(max_retries) + " attempts");
}

/// Spec-level convenience: single plant.
inline PlantedDataset generate_planted_optimum(const Schema& schema,
                                               std::size_t n_records,
                                               double hv_fraction, std::uint64_t seed,
                                               const std::set<std::size_t>& planted_rule,
                                               double effect,
                                               std::size_t min_subgroup,
                                               const SyntheticConfig& synth_cfg = {},
                                               const UniverseConfig& uni_cfg = {}) {
    return generate_planted(schema, n_records, hv_fraction, seed,
                            {Plant{planted_rule, effect}}, min_subgroup, synth_cfg,
                            uni_cfg);
}

} // namespace ruleopt
