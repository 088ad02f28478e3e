#include "ztafl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ztafl/errors.hpp"

namespace ztafl {

using nlohmann::json;

const char* to_string(AggregationRule r) {
    switch (r) {
        case AggregationRule::fedavg: return "fedavg";
        case AggregationRule::krum: return "krum";
        case AggregationRule::trimmed_mean: return "trimmed_mean";
        case AggregationRule::geometric_median: return "geometric_median";
        case AggregationRule::fltrust: return "fltrust";
        case AggregationRule::ztafl: return "ztafl";
    }
    return "ztafl";
}

AggregationRule aggregation_rule_from_string(const std::string& s) {
    for (AggregationRule r : {AggregationRule::fedavg, AggregationRule::krum,
                              AggregationRule::trimmed_mean, AggregationRule::geometric_median,
                              AggregationRule::fltrust, AggregationRule::ztafl})
        if (s == to_string(r)) return r;
    throw InvalidInputError("unknown aggregation rule: " + s);
}

std::vector<int> ExperimentConfig::layer_dims() const {
    std::vector<int> dims;
    dims.push_back(data.features);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(data.classes);
    return dims;
}

void ExperimentConfig::validate() const {
    if (rounds < 1) throw InvalidInputError("config: rounds must be >= 1");
    if (warmup_rounds < 0) throw InvalidInputError("config: warmup_rounds must be >= 0");
    if (topology.agents < 1) throw InvalidInputError("config: need at least one agent");
    if (topology.fogs < 1 || topology.fogs > topology.agents)
        throw InvalidInputError("config: fogs must be in [1, agents]");
    if (data.classes < 2) throw InvalidInputError("config: need at least 2 classes");
    if (partition.classes_per_agent < 1 || partition.classes_per_agent > data.classes)
        throw InvalidInputError("config: classes_per_agent out of range");
    if (attack.beta < 0.0 || attack.beta >= 0.5)
        throw InvalidInputError("config: attack beta must be in [0, 0.5)");
    if (adversarial_training.ratio < 0.0 || adversarial_training.ratio > 1.0)
        throw InvalidInputError("config: adversarial ratio out of [0,1]");
    if (shap.background < 1 || shap.eval_samples < 1 || shap.ig_steps < 1)
        throw InvalidInputError("config: shap settings must be positive");
    if (robust_eval.every < 1) throw InvalidInputError("config: robust_eval.every must be >= 1");
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidInputError("config: expected object at " + where);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.count(it.key()) == 0)
            throw InvalidInputError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["seeds"] = c.seeds;
    j["rounds"] = c.rounds;
    j["warmup_rounds"] = c.warmup_rounds;
    j["topology"] = {{"agents", c.topology.agents}, {"fogs", c.topology.fogs}};
    j["data"] = {{"samples", c.data.samples},
                 {"features", c.data.features},
                 {"classes", c.data.classes}};
    j["partition"] = {{"classes_per_agent", c.partition.classes_per_agent},
                      {"min_samples", c.partition.min_samples},
                      {"max_samples", c.partition.max_samples},
                      {"power_law_exponent", c.partition.power_law_exponent},
                      {"feature_skew_groups", c.partition.feature_skew_groups}};
    j["model"] = {{"hidden", c.hidden_dims}};
    j["optimizer"] = {{"epochs", c.optimizer.epochs},
                      {"batch_size", c.optimizer.batch_size},
                      {"learning_rate", c.optimizer.learning_rate}};
    j["adversarial_training"] = {{"enabled", c.adversarial_training.enabled},
                                 {"eps", c.adversarial_training.eps},
                                 {"steps", c.adversarial_training.steps},
                                 {"ratio", c.adversarial_training.ratio}};
    j["aggregation"] = {{"rule", to_string(c.aggregation.rule)},
                        {"krum_f", c.aggregation.krum_f},
                        {"trim_frac", c.aggregation.trim_frac}};
    j["attack"] = {{"kind", to_string(c.attack.kind)},
                   {"beta", c.attack.beta},
                   {"p_flip", c.attack.p_flip},
                   {"alpha", c.attack.alpha},
                   {"trigger_features", c.attack.trigger.feature_indices},
                   {"trigger_value", c.attack.trigger.trigger_value},
                   {"target_class", c.attack.trigger.target_class},
                   {"poison_rate", c.attack.poison_rate},
                   {"per_round_alpha", c.attack.per_round_alpha},
                   {"constraint_tau", c.attack.constraint_tau},
                   {"poison_steps", c.attack.poison_steps},
                   {"poison_lr", c.attack.poison_lr}};
    j["quantize_updates"] = c.quantize_updates;
    j["shap"] = {{"background", c.shap.background},
                 {"eval_samples", c.shap.eval_samples},
                 {"ig_steps", c.shap.ig_steps},
                 {"eps", c.shap.eps}};
    j["attestation"] = {{"enabled", c.attestation.enabled},
                        {"dt_max_ms", c.attestation.dt_max_ms},
                        {"tau_min", c.attestation.tau_min}};
    j["robust_eval"] = {{"every", c.robust_eval.every},
                        {"eps", c.robust_eval.eps},
                        {"steps", c.robust_eval.steps}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInputError(std::string("config: JSON parse error: ") + e.what());
    }
    check_keys(j,
               {"seed", "seeds", "rounds", "warmup_rounds", "topology", "data", "partition",
                "model", "optimizer", "adversarial_training", "aggregation", "attack",
                "quantize_updates", "shap", "attestation", "robust_eval"},
               "top level");

    ExperimentConfig c;
    read(j, "seed", c.seed);
    read(j, "seeds", c.seeds);
    read(j, "rounds", c.rounds);
    read(j, "warmup_rounds", c.warmup_rounds);
    if (j.contains("topology")) {
        const json& t = j["topology"];
        check_keys(t, {"agents", "fogs"}, "topology");
        read(t, "agents", c.topology.agents);
        read(t, "fogs", c.topology.fogs);
    }
    if (j.contains("data")) {
        const json& t = j["data"];
        check_keys(t, {"samples", "features", "classes"}, "data");
        read(t, "samples", c.data.samples);
        read(t, "features", c.data.features);
        read(t, "classes", c.data.classes);
    }
    if (j.contains("partition")) {
        const json& t = j["partition"];
        check_keys(t,
                   {"classes_per_agent", "min_samples", "max_samples", "power_law_exponent",
                    "feature_skew_groups"},
                   "partition");
        read(t, "classes_per_agent", c.partition.classes_per_agent);
        read(t, "min_samples", c.partition.min_samples);
        read(t, "max_samples", c.partition.max_samples);
        read(t, "power_law_exponent", c.partition.power_law_exponent);
        read(t, "feature_skew_groups", c.partition.feature_skew_groups);
    }
    if (j.contains("model")) {
        const json& t = j["model"];
        check_keys(t, {"hidden"}, "model");
        read(t, "hidden", c.hidden_dims);
    }
    if (j.contains("optimizer")) {
        const json& t = j["optimizer"];
        check_keys(t, {"epochs", "batch_size", "learning_rate"}, "optimizer");
        read(t, "epochs", c.optimizer.epochs);
        read(t, "batch_size", c.optimizer.batch_size);
        read(t, "learning_rate", c.optimizer.learning_rate);
    }
    if (j.contains("adversarial_training")) {
        const json& t = j["adversarial_training"];
        check_keys(t, {"enabled", "eps", "steps", "ratio"}, "adversarial_training");
        read(t, "enabled", c.adversarial_training.enabled);
        read(t, "eps", c.adversarial_training.eps);
        read(t, "steps", c.adversarial_training.steps);
        read(t, "ratio", c.adversarial_training.ratio);
    }
    if (j.contains("aggregation")) {
        const json& t = j["aggregation"];
        check_keys(t, {"rule", "krum_f", "trim_frac"}, "aggregation");
        if (t.contains("rule"))
            c.aggregation.rule = aggregation_rule_from_string(t["rule"].get<std::string>());
        read(t, "krum_f", c.aggregation.krum_f);
        read(t, "trim_frac", c.aggregation.trim_frac);
    }
    if (j.contains("attack")) {
        const json& t = j["attack"];
        check_keys(t,
                   {"kind", "beta", "p_flip", "alpha", "trigger_features", "trigger_value",
                    "target_class", "poison_rate", "per_round_alpha", "constraint_tau",
                    "poison_steps", "poison_lr"},
                   "attack");
        if (t.contains("kind"))
            c.attack.kind = attack_kind_from_string(t["kind"].get<std::string>());
        read(t, "beta", c.attack.beta);
        read(t, "p_flip", c.attack.p_flip);
        read(t, "alpha", c.attack.alpha);
        read(t, "trigger_features", c.attack.trigger.feature_indices);
        read(t, "trigger_value", c.attack.trigger.trigger_value);
        read(t, "target_class", c.attack.trigger.target_class);
        read(t, "poison_rate", c.attack.poison_rate);
        read(t, "per_round_alpha", c.attack.per_round_alpha);
        read(t, "constraint_tau", c.attack.constraint_tau);
        read(t, "poison_steps", c.attack.poison_steps);
        read(t, "poison_lr", c.attack.poison_lr);
    }
    read(j, "quantize_updates", c.quantize_updates);
    if (j.contains("shap")) {
        const json& t = j["shap"];
        check_keys(t, {"background", "eval_samples", "ig_steps", "eps"}, "shap");
        read(t, "background", c.shap.background);
        read(t, "eval_samples", c.shap.eval_samples);
        read(t, "ig_steps", c.shap.ig_steps);
        read(t, "eps", c.shap.eps);
    }
    if (j.contains("attestation")) {
        const json& t = j["attestation"];
        check_keys(t, {"enabled", "dt_max_ms", "tau_min"}, "attestation");
        read(t, "enabled", c.attestation.enabled);
        read(t, "dt_max_ms", c.attestation.dt_max_ms);
        read(t, "tau_min", c.attestation.tau_min);
    }
    if (j.contains("robust_eval")) {
        const json& t = j["robust_eval"];
        check_keys(t, {"every", "eps", "steps"}, "robust_eval");
        read(t, "every", c.robust_eval.every);
        read(t, "eps", c.robust_eval.eps);
        read(t, "steps", c.robust_eval.steps);
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("config: cannot write " + path);
    out << config_to_json(config);
}

std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(
    const ExperimentConfig& base) {
    ExperimentConfig baseline = base;
    baseline.aggregation.rule = AggregationRule::fedavg;
    baseline.attestation.enabled = false;
    baseline.adversarial_training.enabled = false;

    ExperimentConfig attest = baseline;
    attest.attestation.enabled = true;

    ExperimentConfig shap = baseline;
    shap.aggregation.rule = AggregationRule::ztafl;

    ExperimentConfig adv = baseline;
    adv.adversarial_training.enabled = true;

    ExperimentConfig all = base;
    all.aggregation.rule = AggregationRule::ztafl;
    all.attestation.enabled = true;
    all.adversarial_training.enabled = true;

    return {{"baseline", baseline},
            {"attestation", attest},
            {"shap_aggregation", shap},
            {"adversarial_training", adv},
            {"ztafl_all", all}};
}

}  // namespace ztafl
