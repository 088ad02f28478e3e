#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ztafl/attribution.hpp"
#include "ztafl/param_vector.hpp"

namespace ztafl {

// One agent's round contribution as seen by its fog node.
struct ClientUpdate {
    int agent_id = 0;
    ParamVector delta;  // theta_i - theta^t
    std::size_t n_samples = 1;
    double fog_accuracy = 0.0;  // measured by the fog, never self-reported
    bool attested = true;
    std::optional<StabilityScore> stability;
};

// Sample-weighted mean of deltas applied to the previous global model.
ParamVector fedavg(const ParamVector& prev, std::span<const ClientUpdate> updates);

// Index (into updates) of the Krum selection; exposed for oracle tests.
// Score = sum of the n-f-2 smallest squared distances to the other updates;
// ties break toward the lowest agent_id.
std::size_t krum_select(std::span<const ClientUpdate> updates, int f);

ParamVector krum(const ParamVector& prev, std::span<const ClientUpdate> updates, int f);

// Coordinate-wise mean after dropping the floor(trim_frac*n) largest and
// smallest values per coordinate.
ParamVector trimmed_mean(const ParamVector& prev, std::span<const ClientUpdate> updates,
                         double trim_frac);

struct GeoMedianResult {
    std::vector<double> point;
    bool converged = true;
    int iterations = 0;
};

// Weiszfeld iteration with the anchor-point safeguard; the returned point's
// objective is no worse than every input's and the mean's.
GeoMedianResult geometric_median_points(const std::vector<std::vector<double>>& points,
                                        double tol = 1e-9, int max_iter = 1000);

ParamVector geometric_median(const ParamVector& prev, std::span<const ClientUpdate> updates,
                             double tol = 1e-9, int max_iter = 1000);

// FLTrust-style aggregation: clipped cosine weights against a clean root
// update, deltas rescaled to the root's norm.
ParamVector fltrust_cosine(const ParamVector& prev, std::span<const ClientUpdate> updates,
                           const ParamVector& root_delta);

struct FilterDecision {
    int agent_id = 0;
    double stability = 0.0;
    bool filtered = false;
    std::string reason;  // empty when accepted
    double weight = 0.0;
};

struct AggregationOutcome {
    ParamVector new_params;
    CohortStats stats;
    std::vector<FilterDecision> decisions;
    bool rolled_back = false;
    std::string rollback_reason;
    double candidate_accuracy = 0.0;
    std::size_t accepted_samples = 0;  // 0 when rolled back
};

using ImportanceFn = std::function<AttributionVector(const ParamVector& model_params)>;
using ModelAccuracyFn = std::function<double(const ParamVector& model_params)>;

struct ShapAggregationConfig {
    double stability_eps = 1e-6;
    double rollback_frac = 0.8;
};

// The ZTA-FL rule: score stability against phi_ref, filter below mu - 2*sigma
// (population sigma over the cohort), weight survivors by
// max(s,0) * acc * sqrt(n), and revert to the previous global model if the
// candidate's fog-validation accuracy falls under rollback_frac of the
// previous round's. Updates with a preset stability skip the importance call.
AggregationOutcome shap_weighted_aggregate(const ParamVector& prev_global,
                                           std::vector<ClientUpdate> updates,
                                           const std::vector<double>& phi_ref,
                                           double prev_val_acc, const ImportanceFn& importance,
                                           const ModelAccuracyFn& accuracy_of,
                                           const ShapAggregationConfig& cfg = {});

// Cumulative attribution drift per agent across rounds.
class DriftTracker {
public:
    // Adds ||phi - prev_phi|| for the agent; first call stores phi at drift 0.
    double update(int agent_id, const std::vector<double>& phi);

    double cumulative(int agent_id) const;

    // Agents whose cumulative drift exceeds the threshold.
    std::vector<int> alarm(double threshold) const;

    // Default threshold: 3x the median cumulative drift of the cohort.
    std::vector<int> alarm_default() const { return alarm(3.0 * median_cumulative()); }

    double median_cumulative() const;

    bool tracked(int agent_id) const { return agents_.count(agent_id) != 0; }

private:
    struct Entry {
        std::vector<double> prev_phi;
        double cumulative = 0.0;
    };
    std::map<int, Entry> agents_;
};

}  // namespace ztafl
