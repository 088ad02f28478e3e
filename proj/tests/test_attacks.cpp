#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "ztafl/attacks.hpp"
#include "ztafl/attribution.hpp"
#include "ztafl/errors.hpp"
#include "ztafl/metrics.hpp"

using namespace ztafl;

namespace {

Dataset normalized(std::size_t n, int d, int C, std::uint64_t seed) {
    Dataset ds = generate_synthetic(n, d, C, seed);
    const NormalizationMap map = minmax_fit(ds);
    minmax_apply(map, ds);
    return ds;
}

}  // namespace

TEST_CASE("compromised set is a pure function of its inputs") {
    const auto a = compromised_set(42, 0.3, 30);
    const auto b = compromised_set(42, 0.3, 30);
    CHECK(a == b);
    CHECK(a.size() == 9);
    for (int id : a) {
        CHECK(id >= 0);
        CHECK(id < 30);
    }
    const auto c = compromised_set(43, 0.3, 30);
    CHECK(a != c);
    CHECK(compromised_set(1, 0.0, 30).empty());
    CHECK_THROWS_AS(compromised_set(1, 0.5, 30), InvalidInputError);
}

TEST_CASE("label flip at p=0 is the identity") {
    const Dataset ds = normalized(100, 8, 4, 1);
    const Dataset out = label_flip(ds, 0.0, 7);
    CHECK(out.y == ds.y);
    CHECK(out.X.data() == ds.X.data());
}

TEST_CASE("label flip at p=1 on two classes inverts every label") {
    const Dataset ds = normalized(100, 8, 2, 2);
    const Dataset out = label_flip(ds, 1.0, 7);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(out.y[i] == 1 - ds.y[i]);
    CHECK(out.X.data() == ds.X.data());  // features untouched
}

TEST_CASE("label flip count stays within binomial bounds") {
    const Dataset ds = normalized(1000, 8, 4, 3);
    const double p = 0.3;
    const Dataset out = label_flip(ds, p, 11);
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (out.y[i] != ds.y[i]) ++flipped;
    const double sigma = std::sqrt(1000 * p * (1 - p));
    CHECK(flipped >= 300 - 3 * sigma);
    CHECK(flipped <= 300 + 3 * sigma);
}

TEST_CASE("label flip leaves the input shard untouched") {
    const Dataset ds = normalized(50, 8, 2, 4);
    const std::vector<int> before = ds.y;
    (void)label_flip(ds, 1.0, 5);
    CHECK(ds.y == before);
}

TEST_CASE("grad scale by 1, -1, and 0") {
    ClientUpdate u;
    u.agent_id = 3;
    u.delta.values = {1.0, -2.0, 3.0};
    u.delta.shape_tag = {3, 1};
    u.n_samples = 44;

    const ClientUpdate same = grad_scale(u, 1.0);
    CHECK(same.delta.values == u.delta.values);
    CHECK(same.n_samples == 44);

    const ClientUpdate neg = grad_scale(u, -1.0);
    CHECK(neg.delta.values == std::vector<double>{-1.0, 2.0, -3.0});

    const ClientUpdate zero = grad_scale(u, 0.0);
    for (double v : zero.delta.values) CHECK(v == 0.0);
}

TEST_CASE("backdoor poisoning hits the requested fraction and nothing else") {
    const Dataset ds = normalized(200, 10, 4, 5);
    BackdoorTrigger trig;
    trig.feature_indices = {0, 1, 2, 3};
    trig.target_class = 2;
    const Dataset out = backdoor_poison(ds, trig, 0.1, 9);
    std::size_t poisoned = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        bool triggered = true;
        for (int j : trig.feature_indices)
            if (out.X(i, j) != 1.0) triggered = false;
        const bool label_moved = out.y[i] != ds.y[i];
        if (label_moved) CHECK(out.y[i] == 2);
        if (triggered && out.y[i] == 2 && (label_moved || ds.y[i] == 2)) ++poisoned;
        // Non-trigger features are always preserved.
        for (std::size_t j = 4; j < ds.dim(); ++j) CHECK(out.X(i, j) == ds.X(i, j));
    }
    CHECK(poisoned >= 20);  // 10% of 200, possibly a few already-class-2 rows
}

TEST_CASE("asr of untrained models hovers near chance") {
    const Dataset ds = normalized(300, 10, 6, 6);
    BackdoorTrigger trig;
    trig.target_class = 1;
    double total = 0.0;
    const int models = 30;
    for (int i = 0; i < models; ++i) {
        Rng rng(100 + i);
        const MlpModel m = init_mlp({10, 16, 6}, rng);
        total += measure_asr(m, ds, trig);
    }
    const double mean_asr = total / models;
    CHECK(mean_asr < 0.45);  // 1/C = 0.167 plus generous sampling slack
}

TEST_CASE("a model trained on fully triggered data saturates the asr") {
    const Dataset ds = normalized(400, 10, 4, 7);
    BackdoorTrigger trig;
    trig.target_class = 0;
    const Dataset poisoned = backdoor_poison(ds, trig, 1.0, 3);
    Rng rng(8);
    MlpModel m0 = init_mlp({10, 16, 4}, rng);
    const MlpModel m = local_train(m0, poisoned.X, poisoned.y, {8, 64, 1e-2}, 9);
    CHECK(measure_asr(m, ds, trig) >= 0.95);
}

TEST_CASE("measure_asr excludes target-class rows from the denominator") {
    Dataset ds;
    ds.X = Matrix(4, 3, 0.5);
    ds.y = {0, 0, 0, 0};
    ds.class_names = {"a", "b"};
    BackdoorTrigger trig;
    trig.target_class = 0;
    const MlpModel m = make_mlp({3, 2});
    CHECK_THROWS_AS(measure_asr(m, ds, trig), InvalidInputError);
}

TEST_CASE("forged sybil tokens are rejected as unknown identities") {
    Rng rng(10);
    const KeyPair manufacturer = make_keypair(rng);
    ReferenceRegistry registry(manufacturer.pk);
    TrustDb trustdb;
    const AgentIdentity honest = make_identity("agent-0", rng);
    registry.register_agent(honest);
    trustdb.register_agent("agent-0");

    Rng attacker_rng(11);
    const AttestationToken forged = sybil_forge("agent-999", 1000, attacker_rng);
    CHECK(registry.verify_token(forged, trustdb, 1100) == VerifyStatus::unknown_identity);
}

TEST_CASE("a replayed capture is rejected inside and outside the window") {
    Rng rng(12);
    const KeyPair manufacturer = make_keypair(rng);
    ReferenceRegistry registry(manufacturer.pk);
    TrustDb trustdb;
    const AgentIdentity agent = make_identity("agent-0", rng);
    registry.register_agent(agent);
    trustdb.register_agent("agent-0");

    const AttestationToken token = issue_token(agent, 1000, rng);
    CHECK(registry.verify_token(token, trustdb, 1100) == VerifyStatus::accept);
    const AttestationToken captured = replay_capture(token);
    CHECK(registry.verify_token(captured, trustdb, 30'000) == VerifyStatus::replay);
    CHECK(registry.verify_token(captured, trustdb, 200'000) == VerifyStatus::stale);
}

TEST_CASE("an infinite constraint reduces to unconstrained poisoning") {
    const Dataset ds = normalized(150, 8, 3, 13);
    Rng rng(14);
    MlpModel m0 = init_mlp({8, 12, 3}, rng);
    const MlpModel global = local_train(m0, ds.X, ds.y, {3, 32, 5e-3}, 15);

    int importance_calls = 0;
    const ImportanceFn imp = [&](const ParamVector&) {
        ++importance_calls;
        AttributionVector a;
        a.phi.assign(8, 0.0);
        return a;
    };
    const std::vector<double> phi_prev(8, 0.0);
    const auto unconstrained = shap_constrained_attack(
        global, ds, std::numeric_limits<double>::infinity(), imp, phi_prev, 3, 0.05, 99);
    CHECK(importance_calls == 0);  // the infinite radius skips attribution

    const auto huge_tau =
        shap_constrained_attack(global, ds, 1e18, imp, phi_prev, 3, 0.05, 99);
    CHECK(unconstrained.delta.values == huge_tau.delta.values);
    CHECK(l2_norm(unconstrained.delta) > 0.0);
}

TEST_CASE("emitted constrained updates always satisfy the constraint") {
    const Dataset ds = normalized(150, 8, 3, 16);
    Rng rng(17);
    MlpModel m0 = init_mlp({8, 12, 3}, rng);
    const MlpModel global = local_train(m0, ds.X, ds.y, {3, 32, 5e-3}, 18);

    const BackgroundSet bg = draw_background(ds, 8, 4);
    const Dataset evals = take(ds, {0, 1, 2, 3});
    const ImportanceFn imp = [&](const ParamVector& p) {
        const MlpModel m{global.layer_dims, p};
        return model_importance(m, evals, bg, 4);
    };
    const std::vector<double> phi_prev = imp(global.params).phi;

    const double tau = 0.05;
    const auto res = shap_constrained_attack(global, ds, tau, imp, phi_prev, 4, 0.1, 19);
    REQUIRE(res.feasible);
    CHECK(res.phi_distance < tau);

    // Independent recomputation of the emitted point's attribution distance.
    const std::vector<double> phi_out = imp((global.params + res.delta)).phi;
    double dist = 0.0;
    for (std::size_t j = 0; j < phi_out.size(); ++j)
        dist += (phi_out[j] - phi_prev[j]) * (phi_out[j] - phi_prev[j]);
    CHECK(std::sqrt(dist) < tau);
}

TEST_CASE("an infeasible starting point emits a zero delta") {
    const Dataset ds = normalized(100, 6, 2, 20);
    Rng rng(21);
    MlpModel m0 = init_mlp({6, 8, 2}, rng);
    const ImportanceFn imp = [](const ParamVector&) {
        AttributionVector a;
        a.phi.assign(6, 5.0);  // far from phi_prev below
        return a;
    };
    const std::vector<double> phi_prev(6, 0.0);
    const auto res = shap_constrained_attack(m0, ds, 0.01, imp, phi_prev, 3, 0.05, 22);
    CHECK_FALSE(res.feasible);
    for (double v : res.delta.values) CHECK(v == 0.0);
}

TEST_CASE("slow poison offset grows linearly along a fixed direction") {
    ParamVector shape;
    shape.values.assign(50, 0.0);
    shape.shape_tag = {50, 1};

    const ParamVector zero = slow_poison_offset(5, 0.0, 7, shape);
    CHECK(l2_norm(zero) == 0.0);

    const ParamVector r1 = slow_poison_offset(1, 0.05, 7, shape);
    const ParamVector r4 = slow_poison_offset(4, 0.05, 7, shape);
    CHECK(l2_norm(r1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(l2_norm(r4) == doctest::Approx(0.20).epsilon(1e-9));
    for (std::size_t j = 0; j < 50; ++j)
        CHECK(r4.values[j] == doctest::Approx(4.0 * r1.values[j]).epsilon(1e-9));

    // Different seed, different direction.
    const ParamVector other = slow_poison_offset(1, 0.05, 8, shape);
    CHECK(other.values != r1.values);

    CHECK_THROWS_AS(slow_poison_offset(1, 0.1, 7, shape), InvalidInputError);
}
