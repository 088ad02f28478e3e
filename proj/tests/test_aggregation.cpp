#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ztafl/aggregation.hpp"
#include "ztafl/errors.hpp"
#include "ztafl/rng.hpp"

using namespace ztafl;

namespace {

ParamVector pv(std::vector<double> values) {
    ParamVector p;
    p.values = std::move(values);
    p.shape_tag = {static_cast<int>(p.values.size()), 1};
    return p;
}

ClientUpdate update(int id, std::vector<double> delta, std::size_t n = 1, double acc = 1.0) {
    ClientUpdate u;
    u.agent_id = id;
    u.delta = pv(std::move(delta));
    u.n_samples = n;
    u.fog_accuracy = acc;
    return u;
}

ClientUpdate scored(int id, std::vector<double> delta, double s, std::size_t n = 1,
                    double acc = 1.0) {
    ClientUpdate u = update(id, std::move(delta), n, acc);
    u.stability = StabilityScore{s, id};
    return u;
}

// Independent Krum oracle: exhaustively scores each candidate with
// explicitly enumerated neighbor subsets.
std::size_t krum_oracle(const std::vector<ClientUpdate>& updates, int f) {
    const std::size_t n = updates.size();
    const std::size_t keep = n - static_cast<std::size_t>(f) - 2;
    double best_score = 0.0;
    std::size_t best = 0;
    int best_id = 0;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dists;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < updates[i].delta.values.size(); ++k) {
                const double d = updates[i].delta.values[k] - updates[j].delta.values[k];
                s += d * d;
            }
            dists.push_back(s);
        }
        std::sort(dists.begin(), dists.end());
        double score = 0.0;
        for (std::size_t k = 0; k < keep; ++k) score += dists[k];
        if (first || score < best_score ||
            (score == best_score && updates[i].agent_id < best_id)) {
            first = false;
            best_score = score;
            best = i;
            best_id = updates[i].agent_id;
        }
    }
    return best;
}

ImportanceFn constant_importance(std::vector<double> phi) {
    return [phi](const ParamVector&) {
        AttributionVector a;
        a.phi = phi;
        return a;
    };
}

}  // namespace

TEST_CASE("fedavg applies a single update directly") {
    const ParamVector prev = pv({1.0, 2.0});
    const std::vector<ClientUpdate> us{update(0, {0.5, -0.5}, 10)};
    const ParamVector out = fedavg(prev, us);
    CHECK(out.values == std::vector<double>{1.5, 1.5});
}

TEST_CASE("fedavg cancels equal-size opposite deltas") {
    const ParamVector prev = pv({0.0, 0.0, 0.0});
    const std::vector<ClientUpdate> us{update(0, {1.0, -2.0, 3.0}, 50),
                                       update(1, {-1.0, 2.0, -3.0}, 50)};
    const ParamVector out = fedavg(prev, us);
    for (double v : out.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("fedavg weights are proportional to sample counts") {
    const ParamVector prev = pv({0.0});
    const std::vector<ClientUpdate> us{update(0, {1.0}, 100), update(1, {5.0}, 300)};
    const ParamVector out = fedavg(prev, us);
    CHECK(out.values[0] == doctest::Approx(0.25 * 1.0 + 0.75 * 5.0).epsilon(1e-12));
}

TEST_CASE("fedavg rejects an empty cohort") {
    CHECK_THROWS_AS(fedavg(pv({0.0}), {}), InvalidInputError);
}

TEST_CASE("krum with identical updates returns the lowest agent id") {
    std::vector<ClientUpdate> us;
    for (int id : {4, 2, 7, 1, 9}) us.push_back(update(id, {1.0, 1.0}));
    const std::size_t sel = krum_select(us, 1);
    CHECK(us[sel].agent_id == 1);
    const ParamVector out = krum(pv({0.0, 0.0}), us, 1);
    CHECK(out.values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("krum picks a cluster member over a far outlier") {
    Rng rng(1);
    std::vector<ClientUpdate> us;
    for (int i = 0; i < 5; ++i)
        us.push_back(update(i, {rng.normal(0.0, 0.01), rng.normal(0.0, 0.01)}));
    us.push_back(update(5, {100.0, -100.0}));
    const std::size_t sel = krum_select(us, 1);
    CHECK(us[sel].agent_id < 5);
}

TEST_CASE("krum matches the exhaustive oracle on random instances") {
    Rng rng(2);
    for (int inst = 0; inst < 200; ++inst) {
        const int f = static_cast<int>(rng.uniform_u64(3));
        const std::size_t n = static_cast<std::size_t>(2 * f + 3 + rng.uniform_u64(4));
        const std::size_t dim = 1 + rng.uniform_u64(5);
        std::vector<ClientUpdate> us;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> d(dim);
            for (double& v : d) v = rng.uniform(-2.0, 2.0);
            us.push_back(update(static_cast<int>(i), std::move(d)));
        }
        CHECK(krum_select(us, f) == krum_oracle(us, f));
    }
}

TEST_CASE("krum enforces the 2f+3 precondition") {
    std::vector<ClientUpdate> us{update(0, {0.0}), update(1, {0.0}), update(2, {0.0}),
                                 update(3, {0.0})};
    CHECK_THROWS_AS(krum_select(us, 1), InvalidInputError);
}

TEST_CASE("trimmed mean with zero trimming is the plain mean") {
    const std::vector<ClientUpdate> us{update(0, {1.0, 4.0}), update(1, {2.0, 5.0}),
                                       update(2, {3.0, 6.0})};
    const ParamVector out = trimmed_mean(pv({0.0, 0.0}), us, 0.0);
    CHECK(out.values[0] == doctest::Approx(2.0));
    CHECK(out.values[1] == doctest::Approx(5.0));
}

TEST_CASE("trimmed mean drops the extremes per coordinate") {
    std::vector<ClientUpdate> us;
    const std::vector<double> col{0.0, 0.0, 0.0, 0.0, 100.0};
    for (int i = 0; i < 5; ++i) us.push_back(update(i, {col[i]}));
    const ParamVector out = trimmed_mean(pv({0.0}), us, 0.2);  // k = 1
    CHECK(out.values[0] == doctest::Approx(0.0));
}

TEST_CASE("trimmed mean rejects over-trimming") {
    const std::vector<ClientUpdate> us{update(0, {1.0}), update(1, {2.0})};
    CHECK_THROWS_AS(trimmed_mean(pv({0.0}), us, 0.5), InvalidInputError);
}

TEST_CASE("aggregation rules are invariant to update order") {
    Rng rng(3);
    std::vector<ClientUpdate> us;
    for (int i = 0; i < 7; ++i) {
        std::vector<double> d(3);
        for (double& v : d) v = rng.uniform(-1.0, 1.0);
        us.push_back(update(i, std::move(d), 10 + i));
    }
    std::vector<ClientUpdate> shuffled = us;
    std::reverse(shuffled.begin(), shuffled.end());
    const ParamVector prev = pv({0.0, 0.0, 0.0});

    CHECK(fedavg(prev, us).values == fedavg(prev, shuffled).values);
    CHECK(krum(prev, us, 1).values == krum(prev, shuffled, 1).values);
    CHECK(trimmed_mean(prev, us, 0.2).values == trimmed_mean(prev, shuffled, 0.2).values);
    CHECK(geometric_median(prev, us).values == geometric_median(prev, shuffled).values);
    const ParamVector root = pv({0.5, 0.5, 0.5});
    CHECK(fltrust_cosine(prev, us, root).values == fltrust_cosine(prev, shuffled, root).values);
}

TEST_CASE("geometric median of identical points is that point") {
    std::vector<ClientUpdate> us;
    for (int i = 0; i < 4; ++i) us.push_back(update(i, {2.0, -1.0}));
    const ParamVector out = geometric_median(pv({0.0, 0.0}), us);
    CHECK(out.values[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(out.values[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("geometric median of an equilateral triangle is its centroid") {
    const std::vector<std::vector<double>> pts{
        {0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}};
    const GeoMedianResult res = geometric_median_points(pts, 1e-12, 2000);
    CHECK(res.point[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.point[1] == doctest::Approx(std::sqrt(3.0) / 6.0).epsilon(1e-6));
}

TEST_CASE("geometric median objective beats every input and the mean") {
    Rng rng(4);
    const auto objective = [](const std::vector<std::vector<double>>& pts,
                              const std::vector<double>& y) {
        double total = 0.0;
        for (const auto& p : pts) {
            double s = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) s += (y[j] - p[j]) * (y[j] - p[j]);
            total += std::sqrt(s);
        }
        return total;
    };
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 3 + rng.uniform_u64(8);
        const std::size_t dim = 1 + rng.uniform_u64(6);
        std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
        for (auto& p : pts)
            for (double& v : p) v = rng.uniform(-5.0, 5.0);
        // Occasionally duplicate a point to exercise the anchor safeguard.
        if (inst % 5 == 0 && n >= 2) pts[1] = pts[0];

        const GeoMedianResult res = geometric_median_points(pts);
        const double out_obj = objective(pts, res.point);
        std::vector<double> mean(dim, 0.0);
        for (const auto& p : pts)
            for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j] / static_cast<double>(n);
        CHECK(out_obj <= objective(pts, mean) + 1e-6);
        for (const auto& p : pts) CHECK(out_obj <= objective(pts, p) + 1e-6);
    }
}

TEST_CASE("fltrust copies the root when every delta matches it") {
    const ParamVector prev = pv({0.0, 0.0});
    const ParamVector root = pv({1.0, 1.0});
    std::vector<ClientUpdate> us{update(0, {1.0, 1.0}), update(1, {1.0, 1.0})};
    const ParamVector out = fltrust_cosine(prev, us, root);
    CHECK(out.values[0] == doctest::Approx(1.0));
    CHECK(out.values[1] == doctest::Approx(1.0));
}

TEST_CASE("fltrust clips negated and orthogonal updates to zero weight") {
    const ParamVector prev = pv({3.0, 4.0});
    const ParamVector root = pv({1.0, 0.0});
    std::vector<ClientUpdate> negated{update(0, {-1.0, 0.0})};
    CHECK(fltrust_cosine(prev, negated, root).values == prev.values);
    std::vector<ClientUpdate> orthogonal{update(0, {0.0, 5.0})};
    CHECK(fltrust_cosine(prev, orthogonal, root).values == prev.values);
}

TEST_CASE("fltrust rescales accepted deltas to the root norm") {
    const ParamVector prev = pv({0.0});
    const ParamVector root = pv({2.0});
    std::vector<ClientUpdate> us{update(0, {10.0})};  // cos = 1, rescale to norm 2
    const ParamVector out = fltrust_cosine(prev, us, root);
    CHECK(out.values[0] == doctest::Approx(2.0));
}

TEST_CASE("fltrust rejects a zero root delta") {
    std::vector<ClientUpdate> us{update(0, {1.0})};
    CHECK_THROWS_AS(fltrust_cosine(pv({0.0}), us, pv({0.0})), InvalidInputError);
}

TEST_CASE("shap aggregation: honest identical cohort gets uniform weights") {
    const ParamVector prev = pv({0.0, 0.0});
    std::vector<ClientUpdate> us;
    for (int i = 0; i < 4; ++i) us.push_back(update(i, {0.4, -0.4}, 100, 0.9));
    const AggregationOutcome out = shap_weighted_aggregate(
        prev, us, {1.0, 1.0}, 0.9, constant_importance({1.0, 1.0}),
        [](const ParamVector&) { return 0.9; });
    CHECK_FALSE(out.rolled_back);
    double wsum = 0.0;
    for (const auto& d : out.decisions) {
        CHECK_FALSE(d.filtered);
        CHECK(d.weight == doctest::Approx(0.25).epsilon(1e-12));
        wsum += d.weight;
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.new_params.values[0] == doctest::Approx(0.4));
    CHECK(out.accepted_samples == 400);
}

TEST_CASE("shap aggregation filters the 2-sigma outlier") {
    const ParamVector prev = pv({0.0});
    std::vector<ClientUpdate> us;
    for (int i = 0; i < 9; ++i) us.push_back(scored(i, {0.1}, 0.9, 100, 0.9));
    us.push_back(scored(9, {5.0}, 0.0, 100, 0.9));
    const AggregationOutcome out = shap_weighted_aggregate(
        prev, us, {1.0}, 0.9, constant_importance({1.0}),
        [](const ParamVector&) { return 0.9; });
    CHECK(out.stats.mu == doctest::Approx(0.81));
    CHECK(out.stats.sigma == doctest::Approx(0.27));
    CHECK(out.stats.threshold == doctest::Approx(0.27));
    int filtered = 0;
    for (const auto& d : out.decisions) {
        if (d.filtered) {
            ++filtered;
            CHECK(d.agent_id == 9);
            CHECK(d.weight == 0.0);
            CHECK(d.reason == "stability-below-2sigma");
        }
    }
    CHECK(filtered == 1);
    CHECK(out.accepted_samples == 900);
}

TEST_CASE("shap aggregation weights follow s * acc * sqrt(n)") {
    const ParamVector prev = pv({0.0});
    std::vector<ClientUpdate> us{scored(0, {1.0}, 0.8, 100, 0.9),
                                 scored(1, {2.0}, 0.8, 400, 0.9)};
    const AggregationOutcome out = shap_weighted_aggregate(
        prev, us, {1.0}, 0.5, constant_importance({1.0}),
        [](const ParamVector&) { return 0.9; });
    CHECK(out.decisions[0].weight == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(out.decisions[1].weight == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(out.new_params.values[0] == doctest::Approx(1.0 / 3.0 + 2.0 * 2.0 / 3.0));
}

TEST_CASE("negative stability is kept for statistics but clamped in weights") {
    const ParamVector prev = pv({0.0});
    std::vector<ClientUpdate> us{scored(0, {1.0}, 0.9, 100, 1.0),
                                 scored(1, {-50.0}, -0.2, 100, 1.0),
                                 scored(2, {1.0}, 0.85, 100, 1.0)};
    const AggregationOutcome out = shap_weighted_aggregate(
        prev, us, {1.0}, 0.5, constant_importance({1.0}),
        [](const ParamVector&) { return 0.9; });
    // sigma is large enough that -0.2 is not 2-sigma-filtered, but its
    // weight clamps to zero.
    const auto& d1 = out.decisions[1];
    CHECK_FALSE(d1.filtered);
    CHECK(d1.weight == 0.0);
    CHECK(out.new_params.values[0] == doctest::Approx(1.0));
    CHECK(out.accepted_samples == 200);
}

TEST_CASE("rollback reverts bit-exactly on an accuracy collapse") {
    Rng rng(5);
    ParamVector prev = pv({0.0, 0.0, 0.0});
    for (double& v : prev.values) v = rng.uniform(-1.0, 1.0);
    std::vector<ClientUpdate> us;
    for (int i = 0; i < 5; ++i) us.push_back(scored(i, {9.0, -9.0, 9.0}, 0.9, 50, 0.9));
    const AggregationOutcome out = shap_weighted_aggregate(
        prev, us, {1.0, 1.0, 1.0}, 0.9, constant_importance({1.0, 1.0, 1.0}),
        [](const ParamVector&) { return 0.1; });  // candidate accuracy collapses
    CHECK(out.rolled_back);
    CHECK(out.rollback_reason == "accuracy-collapse");
    CHECK(out.new_params.values == prev.values);
    CHECK(out.accepted_samples == 0);
    for (const auto& d : out.decisions) CHECK(d.weight == 0.0);
}

TEST_CASE("all-nonpositive stabilities roll back with an empty effective cohort") {
    const ParamVector prev = pv({1.0});
    std::vector<ClientUpdate> us{scored(0, {2.0}, -0.5, 10, 1.0),
                                 scored(1, {3.0}, -0.5, 10, 1.0)};
    const AggregationOutcome out = shap_weighted_aggregate(
        prev, us, {1.0}, 0.9, constant_importance({1.0}),
        [](const ParamVector&) { return 0.9; });
    CHECK(out.rolled_back);
    CHECK(out.new_params.values == prev.values);
}

TEST_CASE("non-attested updates are refused outright") {
    ClientUpdate u = update(0, {1.0});
    u.attested = false;
    CHECK_THROWS_AS(shap_weighted_aggregate(pv({0.0}), {u}, {1.0}, 0.5,
                                            constant_importance({1.0}),
                                            [](const ParamVector&) { return 1.0; }),
                    InvalidInputError);
}

TEST_CASE("rollback guard holds across random cohorts") {
    Rng rng(6);
    for (int inst = 0; inst < 50; ++inst) {
        ParamVector prev = pv({0.0, 0.0});
        std::vector<ClientUpdate> us;
        const int n = 3 + static_cast<int>(rng.uniform_u64(6));
        for (int i = 0; i < n; ++i)
            us.push_back(scored(i, {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)},
                                rng.uniform(-0.5, 1.0), 10 + rng.uniform_u64(50),
                                rng.uniform(0.0, 1.0)));
        const double prev_acc = rng.uniform(0.2, 1.0);
        const double cand_acc = rng.uniform(0.0, 1.0);
        const AggregationOutcome out = shap_weighted_aggregate(
            prev, us, {1.0, 1.0}, prev_acc, constant_importance({1.0, 1.0}),
            [&](const ParamVector&) { return cand_acc; });
        const double out_acc = out.rolled_back ? prev_acc : out.candidate_accuracy;
        CHECK(out_acc >= 0.8 * prev_acc - 1e-12);
        if (!out.rolled_back) {
            double wsum = 0.0;
            for (const auto& d : out.decisions) wsum += d.weight;
            CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("drift tracker: constant attributions never alarm") {
    DriftTracker tr;
    for (int round = 0; round < 30; ++round)
        for (int agent = 0; agent < 5; ++agent) tr.update(agent, {0.5, 0.5, 0.5});
    for (int agent = 0; agent < 5; ++agent) CHECK(tr.cumulative(agent) == 0.0);
    CHECK(tr.alarm_default().empty());
}

TEST_CASE("drift tracker flags a synthetic slow poisoner by round 20") {
    DriftTracker tr;
    Rng rng(7);
    int flagged_round = -1;
    for (int round = 1; round <= 25; ++round) {
        for (int agent = 0; agent < 10; ++agent) {
            // Honest jitter 0.01 per round; agent 9 drifts by 0.1 per round.
            const double step = agent == 9 ? 0.1 : 0.01;
            std::vector<double> phi{0.5 + step * round, 0.5};
            tr.update(agent, phi);
        }
        const auto flagged = tr.alarm_default();
        if (flagged_round < 0 && std::find(flagged.begin(), flagged.end(), 9) != flagged.end())
            flagged_round = round;
    }
    CHECK(flagged_round > 0);
    CHECK(flagged_round <= 20);
}

TEST_CASE("drift is nondecreasing") {
    DriftTracker tr;
    Rng rng(8);
    double prev = 0.0;
    for (int round = 0; round < 50; ++round) {
        std::vector<double> phi{rng.uniform(), rng.uniform()};
        const double cum = tr.update(0, phi);
        CHECK(cum >= prev);
        prev = cum;
    }
}

TEST_CASE("slow drift evades any single-round check but accumulates") {
    // The per-round increments are tiny relative to the cohort spread, yet
    // the cumulative sum separates cleanly.
    DriftTracker tr;
    for (int round = 1; round <= 20; ++round) {
        for (int agent = 0; agent < 6; ++agent) {
            const double step = agent == 0 ? 0.05 : 0.005;
            tr.update(agent, {step * round});
        }
    }
    CHECK(tr.cumulative(0) > 3.0 * tr.median_cumulative());
}
