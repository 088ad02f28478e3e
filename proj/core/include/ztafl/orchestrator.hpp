#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ztafl/config.hpp"
#include "ztafl/dataset.hpp"
#include "ztafl/mlp.hpp"

namespace ztafl {

struct Topology {
    int agents = 30;
    int fogs = 3;
    // Round-robin assignment by agent id.
    int fog_of(int agent_id) const { return agent_id % fogs; }
};

struct RoundRecord {
    int round = 0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double macro_f1 = 0.0;
    double asr = -1.0;         // < 0: not measured this round
    double robust_acc = -1.0;  // < 0: not scheduled this round
    bool rolled_back = false;  // any fog (or the cloud) reverted
    std::uint64_t bytes_model = 0;
    std::uint64_t bytes_attest = 0;
    int filtered_count = 0;
    // Link-class detail behind the bytes_model aggregate.
    std::uint64_t bytes_model_down = 0;  // cloud->fog and fog->agent
    std::uint64_t bytes_model_up = 0;    // agent->fog payloads
    std::uint64_t bytes_fog_cloud = 0;   // fog->cloud aggregates
};

struct FilterRow {
    int round = 0;
    int fog = 0;
    int agent = 0;
    double s = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
    bool filtered = false;
    std::string reason;
    double weight = 0.0;
};

struct AuditRow {
    int round = 0;
    std::string agent;
    std::string event;
    std::string detail;
    double tau_after = -1.0;  // < 0: no trust entry involved
};

struct DriftRow {
    int round = 0;
    int agent = 0;
    double cumulative = 0.0;
    bool flagged = false;
};

struct FogRow {
    int round = 0;
    int fog = 0;
    double prev_acc = 0.0;
    double out_acc = 0.0;
    double candidate_acc = 0.0;  // pre-rollback accuracy of the aggregate
    bool rolled_back = false;
    std::string reason;
    std::size_t accepted_samples = 0;
};

struct ConstrainedRow {
    int round = 0;
    int agent = 0;
    bool feasible = true;
    double phi_distance = 0.0;
};

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<RoundRecord> records;
    std::vector<FilterRow> filter_rows;
    std::vector<AuditRow> audit_rows;
    std::vector<DriftRow> drift_rows;
    std::vector<FogRow> fog_rows;
    std::vector<ConstrainedRow> constrained_rows;
    std::vector<int> compromised;
    MlpModel final_model;
    Dataset val;   // normalized global validation split
    Dataset test;  // normalized global test split
    std::vector<std::pair<double, double>> eps_sweep;  // (eps, robust acc of final model)
    double final_val_acc = 0.0;
    double final_test_acc = 0.0;
};

// One full federated run; a pure function of (config, seed).
RunResult simulate(const ExperimentConfig& config, std::uint64_t seed);

// First round whose validation accuracy reaches frac of the final one.
int convergence_round(const std::vector<RoundRecord>& records, double frac = 0.95);

// Deterministic file renderings.
std::string metrics_csv(const RunResult& r);
std::string filter_csv(const RunResult& r);
std::string audit_csv(const RunResult& r);
std::string eps_sweep_csv(const RunResult& r);
std::string meta_json(const RunResult& r);

struct SeedStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

struct ExperimentSummary {
    std::vector<std::uint64_t> seeds;
    SeedStats final_val_acc;
    SeedStats final_test_acc;
    SeedStats final_asr;         // only meaningful under a backdoor attack
    SeedStats final_robust_acc;  // robust accuracy at the configured eps
    SeedStats convergence;
    std::vector<RunResult> runs;
};

// Runs every configured seed, writes config copy, per-seed CSV/audit files,
// and summary.json under out_dir.
ExperimentSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir);

// In-memory variant used by tests.
ExperimentSummary run_experiment_in_memory(const ExperimentConfig& config);

// Runs each named config into out_dir/<name>/ and writes comparison.csv.
void sweep(const std::vector<std::pair<std::string, ExperimentConfig>>& configs,
           const std::string& out_dir);

SeedStats seed_stats(const std::vector<double>& values);

}  // namespace ztafl
