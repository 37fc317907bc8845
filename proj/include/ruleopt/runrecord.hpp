#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

namespace ruleopt {

/// One detected equivalence class, as reported in run logs.
struct ClassSummary {
    int id = 0;
    std::size_t size = 0;
    double centroid = 0.0; // mean fitness of the class
    std::string elite_rule;
};

/// One row of an optimizer trace. GA rows fill mean_fitness/class_count/
/// elite_count; BO rows fill chosen_ei/gp_train_size; greedy rows use note.
struct TraceRow {
    int step = 0;
    double best_fitness = 0.0;
    double mean_fitness = std::numeric_limits<double>::quiet_NaN();
    int class_count = -1;
    int elite_count = -1;
    double chosen_ei = std::numeric_limits<double>::quiet_NaN();
    int gp_train_size = -1;
    std::string note;
    std::vector<ClassSummary> classes;
};

/// Everything one optimizer execution produced. Reproducible from
/// (method, config, seed, dataset hash).
struct RunRecord {
    std::string method;
    std::string scenario;
    std::string config_json; // snapshot of the effective configuration
    std::uint64_t seed = 0;
    double best_fitness = 0.0;
    bool feasible = false;
    std::string best_rule_text;
    std::string best_rule_bits;
    std::size_t subgroup_size = 0;
    std::string subgroup_hash; // hex hash of the induced subgroup bitmap
    double wall_seconds = 0.0;
    std::uint64_t dataset_hash = 0;
    std::size_t evaluations = 0;
    std::string note;
    std::vector<TraceRow> trace;
};

inline void to_json(nlohmann::json& j, const ClassSummary& c) {
    j = nlohmann::json{{"id", c.id},
                       {"size", c.size},
                       {"centroid", c.centroid},
                       {"elite_rule", c.elite_rule}};
}

inline void from_json(const nlohmann::json& j, ClassSummary& c) {
    c.id = j.value("id", 0);
    c.size = j.value("size", std::size_t{0});
    c.centroid = j.value("centroid", 0.0);
    c.elite_rule = j.value("elite_rule", std::string{});
}

inline void to_json(nlohmann::json& j, const TraceRow& t) {
    j = nlohmann::json{{"step", t.step}, {"best", t.best_fitness}};
    if (std::isfinite(t.mean_fitness)) j["mean"] = t.mean_fitness;
    if (t.class_count >= 0) j["classes"] = t.class_count;
    if (t.elite_count >= 0) j["elites"] = t.elite_count;
    if (std::isfinite(t.chosen_ei)) j["ei"] = t.chosen_ei;
    if (t.gp_train_size >= 0) j["gp_train"] = t.gp_train_size;
    if (!t.note.empty()) j["note"] = t.note;
    if (!t.classes.empty()) j["class_summaries"] = t.classes;
}

inline void from_json(const nlohmann::json& j, TraceRow& t) {
    t.step = j.value("step", 0);
    t.best_fitness = j.value("best", 0.0);
    t.mean_fitness = j.value("mean", std::numeric_limits<double>::quiet_NaN());
    t.class_count = j.value("classes", -1);
    t.elite_count = j.value("elites", -1);
    t.chosen_ei = j.value("ei", std::numeric_limits<double>::quiet_NaN());
    t.gp_train_size = j.value("gp_train", -1);
    t.note = j.value("note", std::string{});
    if (j.contains("class_summaries"))
        t.classes = j.at("class_summaries").get<std::vector<ClassSummary>>();
}

inline void to_json(nlohmann::json& j, const RunRecord& r) {
    j = nlohmann::json{{"method", r.method},
                       {"scenario", r.scenario},
                       {"seed", r.seed},
                       {"best_fitness", r.best_fitness},
                       {"feasible", r.feasible},
                       {"best_rule_text", r.best_rule_text},
                       {"best_rule_bits", r.best_rule_bits},
                       {"subgroup_size", r.subgroup_size},
                       {"subgroup_hash", r.subgroup_hash},
                       {"wall_seconds", r.wall_seconds},
                       {"dataset_hash", r.dataset_hash},
                       {"evaluations", r.evaluations},
                       {"trace", r.trace}};
    if (!r.config_json.empty())
        j["config"] = nlohmann::json::parse(r.config_json, nullptr, false);
    if (!r.note.empty()) j["note"] = r.note;
}

inline void from_json(const nlohmann::json& j, RunRecord& r) {
    r.method = j.value("method", std::string{});
    r.scenario = j.value("scenario", std::string{});
    r.seed = j.value("seed", std::uint64_t{0});
    r.best_fitness = j.value("best_fitness", 0.0);
    r.feasible = j.value("feasible", false);
    r.best_rule_text = j.value("best_rule_text", std::string{});
    r.best_rule_bits = j.value("best_rule_bits", std::string{});
    r.subgroup_size = j.value("subgroup_size", std::size_t{0});
    r.subgroup_hash = j.value("subgroup_hash", std::string{});
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.dataset_hash = j.value("dataset_hash", std::uint64_t{0});
    r.evaluations = j.value("evaluations", std::size_t{0});
    if (j.contains("trace")) r.trace = j.at("trace").get<std::vector<TraceRow>>();
    if (j.contains("config")) r.config_json = j.at("config").dump();
    r.note = j.value("note", std::string{});
}

} // namespace ruleopt
