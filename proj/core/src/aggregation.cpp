#include "ztafl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ztafl/errors.hpp"

namespace ztafl {

namespace {

// Indices in ascending agent_id order; all rules reduce in this order so the
// result is exactly permutation-invariant.
std::vector<std::size_t> by_agent_id(std::span<const ClientUpdate> updates) {
    std::vector<std::size_t> idx(updates.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return updates[a].agent_id < updates[b].agent_id;
    });
    return idx;
}

void check_not_empty(std::span<const ClientUpdate> updates, const char* who) {
    if (updates.empty()) throw InvalidInputError(std::string(who) + ": no updates");
}

double objective(const std::vector<std::vector<double>>& points, const std::vector<double>& y) {
    double total = 0.0;
    for (const auto& p : points) {
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double d = y[j] - p[j];
            s += d * d;
        }
        total += std::sqrt(s);
    }
    return total;
}

}  // namespace

ParamVector fedavg(const ParamVector& prev, std::span<const ClientUpdate> updates) {
    check_not_empty(updates, "fedavg");
    double total = 0.0;
    for (const auto& u : updates) total += static_cast<double>(u.n_samples);
    ParamVector out = prev;
    for (std::size_t i : by_agent_id(updates)) {
        const auto& u = updates[i];
        const double w = static_cast<double>(u.n_samples) / total;
        if (!u.delta.same_shape(prev)) throw ShapeError("fedavg: delta shape mismatch");
        for (std::size_t j = 0; j < out.values.size(); ++j)
            out.values[j] += w * u.delta.values[j];
    }
    return out;
}

std::size_t krum_select(std::span<const ClientUpdate> updates, int f) {
    const std::size_t n = updates.size();
    if (f < 0) throw InvalidInputError("krum: f must be >= 0");
    if (n < static_cast<std::size_t>(2 * f + 3))
        throw InvalidInputError("krum: need at least 2f+3 updates");

    std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dist = l2_distance(updates[i].delta, updates[j].delta);
            d2[i][j] = d2[j][i] = dist * dist;
        }

    const std::size_t keep = n - static_cast<std::size_t>(f) - 2;
    std::size_t best = 0;
    double best_score = 0.0;
    bool first = true;
    for (std::size_t i : by_agent_id(updates)) {
        std::vector<double> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(d2[i][j]);
        std::sort(others.begin(), others.end());
        double score = 0.0;
        for (std::size_t k = 0; k < keep; ++k) score += others[k];
        if (first || score < best_score) {
            first = false;
            best_score = score;
            best = i;
        }
    }
    return best;
}

ParamVector krum(const ParamVector& prev, std::span<const ClientUpdate> updates, int f) {
    const std::size_t sel = krum_select(updates, f);
    return prev + updates[sel].delta;
}

ParamVector trimmed_mean(const ParamVector& prev, std::span<const ClientUpdate> updates,
                         double trim_frac) {
    check_not_empty(updates, "trimmed_mean");
    if (trim_frac < 0.0) throw InvalidInputError("trimmed_mean: negative trim fraction");
    const std::size_t n = updates.size();
    const std::size_t k = static_cast<std::size_t>(std::floor(trim_frac * static_cast<double>(n)));
    if (2 * k >= n) throw InvalidInputError("trimmed_mean: trim would drop every value");

    ParamVector out = prev;
    std::vector<double> column(n);
    for (std::size_t j = 0; j < prev.values.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) column[i] = updates[i].delta.values[j];
        std::sort(column.begin(), column.end());
        double s = 0.0;
        for (std::size_t i = k; i < n - k; ++i) s += column[i];
        out.values[j] += s / static_cast<double>(n - 2 * k);
    }
    return out;
}

GeoMedianResult geometric_median_points(const std::vector<std::vector<double>>& points,
                                        double tol, int max_iter) {
    if (points.empty()) throw InvalidInputError("geometric_median: no points");
    const std::size_t dim = points[0].size();
    const std::size_t n = points.size();

    // Start from the best of {mean, inputs}; Weiszfeld never increases the
    // objective from there, so the output contract holds by monotonicity.
    std::vector<double> mean(dim, 0.0);
    for (const auto& p : points)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j];
    for (double& v : mean) v /= static_cast<double>(n);

    std::vector<double> best = mean;
    double best_obj = objective(points, mean);
    for (const auto& p : points) {
        const double o = objective(points, p);
        if (o < best_obj) {
            best_obj = o;
            best = p;
        }
    }

    GeoMedianResult res;
    std::vector<double> y = best;
    std::vector<double> next(dim);
    constexpr double kAnchorEps = 1e-12;
    int it = 0;
    for (; it < max_iter; ++it) {
        // Find an anchor coincident with the iterate, if any.
        std::ptrdiff_t anchor = -1;
        std::vector<double> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = y[j] - points[i][j];
                s += d * d;
            }
            dist[i] = std::sqrt(s);
            if (dist[i] < kAnchorEps && anchor < 0) anchor = static_cast<std::ptrdiff_t>(i);
        }
        if (anchor >= 0) {
            // Vardi-Zhang rule at an anchor point.
            std::vector<double> r(dim, 0.0);
            double l_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (static_cast<std::ptrdiff_t>(i) == anchor || dist[i] < kAnchorEps) continue;
                for (std::size_t j = 0; j < dim; ++j)
                    r[j] += (points[i][j] - y[j]) / dist[i];
                l_sum += 1.0 / dist[i];
            }
            const double r_norm = l2_norm(r);
            if (r_norm <= 1.0 || l_sum == 0.0) break;  // the anchor is the median
            const double step = (r_norm - 1.0) / l_sum;
            for (std::size_t j = 0; j < dim; ++j) next[j] = y[j] + step * r[j] / r_norm;
        } else {
            double wsum = 0.0;
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double w = 1.0 / dist[i];
                wsum += w;
                for (std::size_t j = 0; j < dim; ++j) next[j] += w * points[i][j];
            }
            for (double& v : next) v /= wsum;
        }
        double moved = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = next[j] - y[j];
            moved += d * d;
        }
        y = next;
        const double o = objective(points, y);
        if (o < best_obj) {
            best_obj = o;
            best = y;
        }
        if (std::sqrt(moved) <= tol) break;
    }
    res.converged = it < max_iter;
    res.iterations = it;
    res.point = best;
    return res;
}

ParamVector geometric_median(const ParamVector& prev, std::span<const ClientUpdate> updates,
                             double tol, int max_iter) {
    check_not_empty(updates, "geometric_median");
    std::vector<std::vector<double>> pts;
    pts.reserve(updates.size());
    for (std::size_t i : by_agent_id(updates)) pts.push_back(updates[i].delta.values);
    const GeoMedianResult res = geometric_median_points(pts, tol, max_iter);
    ParamVector out = prev;
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += res.point[j];
    return out;
}

ParamVector fltrust_cosine(const ParamVector& prev, std::span<const ClientUpdate> updates,
                           const ParamVector& root_delta) {
    check_not_empty(updates, "fltrust");
    const double root_norm = l2_norm(root_delta);
    if (root_norm == 0.0) throw InvalidInputError("fltrust: zero root delta");

    ParamVector agg = zeros_like(prev);
    double weight_sum = 0.0;
    for (std::size_t i : by_agent_id(updates)) {
        const auto& u = updates[i];
        const double un = l2_norm(u.delta);
        if (un == 0.0) continue;  // cosine undefined, weight 0
        const double cosine = dot(u.delta, root_delta) / (un * root_norm);
        const double w = std::max(0.0, cosine);
        if (w == 0.0) continue;
        const double rescale = root_norm / un;
        for (std::size_t j = 0; j < agg.values.size(); ++j)
            agg.values[j] += w * rescale * u.delta.values[j];
        weight_sum += w;
    }
    if (weight_sum == 0.0) return prev;
    for (std::size_t j = 0; j < agg.values.size(); ++j) agg.values[j] /= weight_sum;
    return prev + agg;
}

AggregationOutcome shap_weighted_aggregate(const ParamVector& prev_global,
                                           std::vector<ClientUpdate> updates,
                                           const std::vector<double>& phi_ref,
                                           double prev_val_acc, const ImportanceFn& importance,
                                           const ModelAccuracyFn& accuracy_of,
                                           const ShapAggregationConfig& cfg) {
    if (updates.empty()) throw InvalidInputError("shap_weighted_aggregate: no updates");

    AggregationOutcome out;

    // (1) Stability per update (reused when the caller prescored it).
    for (auto& u : updates) {
        if (!u.attested)
            throw InvalidInputError("shap_weighted_aggregate: non-attested update admitted");
        if (!u.stability.has_value()) {
            const ParamVector candidate = prev_global + u.delta;
            const AttributionVector phi = importance(candidate);
            u.stability = stability_score(phi.phi, phi_ref, cfg.stability_eps, u.agent_id);
        }
    }

    const auto order = by_agent_id(updates);
    std::vector<double> scores;
    scores.reserve(updates.size());
    for (std::size_t i : order) scores.push_back(updates[i].stability->s);

    // (2) 2-sigma filter over the cohort.
    if (scores.size() >= 2) {
        out.stats = cohort_threshold(scores);
    } else {
        out.stats.mu = scores[0];
        out.stats.sigma = 0.0;
        out.stats.threshold = scores[0];
    }

    double weight_sum = 0.0;
    std::vector<double> raw_weight(order.size(), 0.0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const ClientUpdate& u = updates[order[k]];
        FilterDecision d;
        d.agent_id = u.agent_id;
        d.stability = u.stability->s;
        if (u.stability->s < out.stats.threshold) {
            d.filtered = true;
            d.reason = "stability-below-2sigma";
        } else {
            raw_weight[k] = std::max(u.stability->s, 0.0) * u.fog_accuracy *
                            std::sqrt(static_cast<double>(u.n_samples));
            weight_sum += raw_weight[k];
        }
        out.decisions.push_back(std::move(d));
    }

    const auto roll_back = [&](const std::string& reason) {
        out.new_params = prev_global;
        out.rolled_back = true;
        out.rollback_reason = reason;
        out.accepted_samples = 0;
        for (auto& d : out.decisions) d.weight = 0.0;
        return out;
    };

    const bool any_survivor =
        std::any_of(out.decisions.begin(), out.decisions.end(),
                    [](const FilterDecision& d) { return !d.filtered; });
    if (!any_survivor) return roll_back("empty-cohort");
    if (weight_sum <= 0.0) return roll_back("zero-weight-cohort");

    // (3+4) Normalized weights and the candidate model.
    ParamVector candidate = prev_global;
    std::size_t accepted_samples = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (raw_weight[k] == 0.0) continue;
        const ClientUpdate& u = updates[order[k]];
        const double w = raw_weight[k] / weight_sum;
        out.decisions[k].weight = w;
        accepted_samples += u.n_samples;
        for (std::size_t j = 0; j < candidate.values.size(); ++j)
            candidate.values[j] += w * u.delta.values[j];
    }

    // (5) Rollback guard.
    out.candidate_accuracy = accuracy_of(candidate);
    if (out.candidate_accuracy < cfg.rollback_frac * prev_val_acc)
        return roll_back("accuracy-collapse");

    out.new_params = std::move(candidate);
    out.accepted_samples = accepted_samples;
    return out;
}

double DriftTracker::update(int agent_id, const std::vector<double>& phi) {
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) {
        agents_[agent_id] = Entry{phi, 0.0};
        return 0.0;
    }
    Entry& e = it->second;
    if (e.prev_phi.size() != phi.size())
        throw ShapeError("drift tracker: attribution length changed");
    double s = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
        const double d = phi[j] - e.prev_phi[j];
        s += d * d;
    }
    e.cumulative += std::sqrt(s);
    e.prev_phi = phi;
    return e.cumulative;
}

double DriftTracker::cumulative(int agent_id) const {
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) throw InvalidInputError("drift tracker: unknown agent");
    return it->second.cumulative;
}

std::vector<int> DriftTracker::alarm(double threshold) const {
    std::vector<int> flagged;
    for (const auto& [id, e] : agents_)
        if (e.cumulative > threshold) flagged.push_back(id);
    return flagged;
}

double DriftTracker::median_cumulative() const {
    if (agents_.empty()) return 0.0;
    std::vector<double> values;
    values.reserve(agents_.size());
    for (const auto& [id, e] : agents_) values.push_back(e.cumulative);
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace ztafl
