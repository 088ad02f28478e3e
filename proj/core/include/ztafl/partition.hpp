#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ztafl/dataset.hpp"

namespace ztafl {

struct PartitionSpec {
    int n_agents = 30;
    int classes_per_agent = 3;
    double power_law_exponent = 1.5;
    std::size_t min_samples = 50;
    std::size_t max_samples = 500;
    // Optional feature skew: a partition of the feature indices into groups;
    // each agent keeps only its group's features (others zeroed).
    std::vector<std::vector<int>> feature_skew_groups;
    double holdout_frac = 0.10;
};

struct AgentShard {
    int agent_id = 0;
    Dataset train;
    Dataset holdout;
    std::vector<int> classes;        // the drawn label set
    bool replacement_used = false;   // a class pool ran dry
};

// Label/quantity/feature-skewed shards: each agent draws classes_per_agent
// distinct classes, a bounded power-law size, and samples without replacement
// from the shared per-class pools. Shards are disjoint by construction unless
// a pool is exhausted, in which case replacement_used is flagged.
std::vector<AgentShard> partition_noniid(const Dataset& train, const PartitionSpec& spec,
                                         std::uint64_t seed);

// Truncated power-law sample count via inverse-CDF.
std::size_t sample_power_law(double exponent, std::size_t lo, std::size_t hi, double u01);

}  // namespace ztafl
