#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ztafl/attacks.hpp"

namespace ztafl {

enum class AggregationRule { fedavg, krum, trimmed_mean, geometric_median, fltrust, ztafl };

const char* to_string(AggregationRule r);
AggregationRule aggregation_rule_from_string(const std::string& s);

struct TopologyConfig {
    int agents = 30;
    int fogs = 3;
};

struct DataConfig {
    std::size_t samples = 8000;
    int features = 40;
    int classes = 6;
};

struct PartitionConfig {
    int classes_per_agent = 3;
    std::size_t min_samples = 50;
    std::size_t max_samples = 400;
    double power_law_exponent = 1.5;
    int feature_skew_groups = 0;  // 0 disables feature skew
};

struct OptimizerConfig {
    int epochs = 5;
    int batch_size = 128;
    double learning_rate = 1e-3;
};

struct AdvTrainingConfig {
    bool enabled = false;
    double eps = 0.1;
    int steps = 1;  // 1 = single signed-gradient step
    double ratio = 0.30;
};

struct AggregationConfig {
    AggregationRule rule = AggregationRule::ztafl;
    int krum_f = -1;  // -1: floor(beta * cohort size)
    double trim_frac = 0.2;
};

struct ShapConfig {
    std::size_t background = 32;  // per-fog background samples (paper setting: 100)
    std::size_t eval_samples = 16;
    int ig_steps = 8;
    double eps = 1e-6;
};

struct AttestationConfig {
    bool enabled = true;
    std::int64_t dt_max_ms = 60'000;
    double tau_min = 0.6;
};

struct RobustEvalConfig {
    int every = 5;  // rounds between scheduled robust evaluations
    double eps = 0.1;
    int steps = 1;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::vector<std::uint64_t> seeds;  // empty -> {seed}
    int rounds = 40;
    // Plain FedAvg rounds before the stability pipeline engages. Attribution
    // references a near-random model are meaningless; the paper's convergence
    // curves likewise start from a partially trained global model.
    int warmup_rounds = 3;
    TopologyConfig topology;
    DataConfig data;
    PartitionConfig partition;
    std::vector<int> hidden_dims = {64, 32};
    OptimizerConfig optimizer;
    AdvTrainingConfig adversarial_training;
    AggregationConfig aggregation;
    AttackConfig attack;
    bool quantize_updates = true;
    ShapConfig shap;
    AttestationConfig attestation;
    RobustEvalConfig robust_eval;

    std::vector<std::uint64_t> effective_seeds() const {
        return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
    }
    std::vector<int> layer_dims() const;
    void validate() const;
};

// Canonical JSON round trip. Parsing is strict: unknown keys are errors.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

// The component-ablation preset: baseline FL, +attestation, +SHAP
// aggregation, +adversarial training, and everything combined.
std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(
    const ExperimentConfig& base);

}  // namespace ztafl
