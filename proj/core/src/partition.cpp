#include "ztafl/partition.hpp"

#include <algorithm>
#include <cmath>

#include "ztafl/errors.hpp"
#include "ztafl/rng.hpp"

namespace ztafl {

std::size_t sample_power_law(double exponent, std::size_t lo, std::size_t hi, double u01) {
    if (lo == hi) return lo;
    const double a = exponent;
    const double xl = static_cast<double>(lo), xh = static_cast<double>(hi);
    double x;
    if (std::abs(a - 1.0) < 1e-12) {
        x = xl * std::pow(xh / xl, u01);
    } else {
        const double p = 1.0 - a;
        x = std::pow(std::pow(xl, p) + u01 * (std::pow(xh, p) - std::pow(xl, p)), 1.0 / p);
    }
    const double rounded = std::floor(x + 0.5);
    return std::min(hi, std::max(lo, static_cast<std::size_t>(rounded)));
}

std::vector<AgentShard> partition_noniid(const Dataset& train, const PartitionSpec& spec,
                                         std::uint64_t seed) {
    const int C = train.num_classes();
    if (spec.n_agents < 1) throw InvalidInputError("partition: need at least one agent");
    if (spec.classes_per_agent < 1 || spec.classes_per_agent > C)
        throw InvalidInputError("partition: classes_per_agent out of [1, C]");
    if (spec.min_samples < 1 || spec.min_samples > spec.max_samples)
        throw InvalidInputError("partition: bad sample bounds");
    if (train.size() < spec.min_samples)
        throw InvalidInputError("partition: training set smaller than min shard size");

    Rng rng(seed);

    // Shared per-class pools, consumed back-to-front.
    std::vector<std::vector<std::size_t>> pools(C);
    std::vector<std::vector<std::size_t>> full_pools(C);
    for (std::size_t i = 0; i < train.size(); ++i) full_pools[train.y[i]].push_back(i);
    for (int c = 0; c < C; ++c) {
        pools[c] = full_pools[c];
        rng.shuffle(pools[c]);
    }

    std::vector<AgentShard> shards;
    shards.reserve(spec.n_agents);
    for (int a = 0; a < spec.n_agents; ++a) {
        AgentShard shard;
        shard.agent_id = a;

        const auto class_picks = rng.sample_without_replacement(static_cast<std::size_t>(C),
                                                                static_cast<std::size_t>(spec.classes_per_agent));
        for (std::size_t k : class_picks) shard.classes.push_back(static_cast<int>(k));
        std::sort(shard.classes.begin(), shard.classes.end());

        const std::size_t want = sample_power_law(spec.power_law_exponent, spec.min_samples,
                                                  spec.max_samples, rng.uniform());

        std::vector<std::size_t> drawn;
        drawn.reserve(want);
        while (drawn.size() < want) {
            std::size_t remaining = 0;
            for (int c : shard.classes) remaining += pools[c].size();
            if (remaining == 0) break;
            std::size_t pick = rng.uniform_u64(remaining);
            for (int c : shard.classes) {
                if (pick < pools[c].size()) {
                    const std::size_t pos = pools[c].size() - 1 - pick;
                    drawn.push_back(pools[c][pos]);
                    std::swap(pools[c][pos], pools[c].back());
                    pools[c].pop_back();
                    break;
                }
                pick -= pools[c].size();
            }
        }
        // Pools ran dry: top up with replacement from the full class pools.
        while (drawn.size() < want) {
            shard.replacement_used = true;
            std::size_t total = 0;
            for (int c : shard.classes) total += full_pools[c].size();
            std::size_t pick = rng.uniform_u64(total);
            for (int c : shard.classes) {
                if (pick < full_pools[c].size()) {
                    drawn.push_back(full_pools[c][pick]);
                    break;
                }
                pick -= full_pools[c].size();
            }
        }

        std::size_t holdout_n = static_cast<std::size_t>(
            std::floor(spec.holdout_frac * static_cast<double>(drawn.size())));
        if (holdout_n >= drawn.size()) holdout_n = drawn.size() - 1;
        const std::vector<std::size_t> train_idx(drawn.begin(), drawn.end() - holdout_n);
        const std::vector<std::size_t> hold_idx(drawn.end() - holdout_n, drawn.end());
        shard.train = take(train, train_idx);
        shard.holdout = take(train, hold_idx);

        if (!spec.feature_skew_groups.empty()) {
            const auto& group =
                spec.feature_skew_groups[a % spec.feature_skew_groups.size()];
            std::vector<bool> keep(train.dim(), false);
            for (int j : group)
                if (j >= 0 && j < static_cast<int>(train.dim())) keep[j] = true;
            for (Dataset* ds : {&shard.train, &shard.holdout})
                for (std::size_t i = 0; i < ds->size(); ++i) {
                    double* row = ds->X.row(i).data();
                    for (std::size_t j = 0; j < ds->dim(); ++j)
                        if (!keep[j]) row[j] = 0.0;
                }
        }
        shards.push_back(std::move(shard));
    }
    return shards;
}

}  // namespace ztafl
