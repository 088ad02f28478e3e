#include "ztafl/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ztafl/errors.hpp"

namespace ztafl {

const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::none: return "none";
        case AttackKind::label_flip: return "label_flip";
        case AttackKind::grad_scale: return "grad_scale";
        case AttackKind::backdoor: return "backdoor";
        case AttackKind::sybil: return "sybil";
        case AttackKind::replay: return "replay";
        case AttackKind::shap_constrained: return "shap_constrained";
        case AttackKind::slow_poison: return "slow_poison";
    }
    return "none";
}

AttackKind attack_kind_from_string(const std::string& s) {
    for (AttackKind k : {AttackKind::none, AttackKind::label_flip, AttackKind::grad_scale,
                         AttackKind::backdoor, AttackKind::sybil, AttackKind::replay,
                         AttackKind::shap_constrained, AttackKind::slow_poison})
        if (s == to_string(k)) return k;
    throw InvalidInputError("unknown attack kind: " + s);
}

std::vector<int> compromised_set(std::uint64_t seed, double beta, int n_agents) {
    if (beta < 0.0 || beta >= 0.5)
        throw InvalidInputError("compromised_set: beta must be in [0, 0.5)");
    const std::size_t k = static_cast<std::size_t>(std::floor(beta * n_agents));
    Rng rng(derive_seed(seed, "compromised-set"));
    auto picks = rng.sample_without_replacement(static_cast<std::size_t>(n_agents), k);
    std::vector<int> out(picks.begin(), picks.end());
    std::sort(out.begin(), out.end());
    return out;
}

Dataset label_flip(const Dataset& shard, double p_flip, std::uint64_t seed) {
    if (p_flip < 0.0 || p_flip > 1.0) throw InvalidInputError("label_flip: p_flip out of [0,1]");
    Dataset out = shard;
    const int C = shard.num_classes();
    Rng rng(seed);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (rng.uniform() < p_flip) out.y[i] = C - 1 - out.y[i];
    return out;
}

ClientUpdate grad_scale(ClientUpdate update, double alpha) {
    update.delta *= alpha;
    return update;
}

void apply_trigger(std::span<double> x, const BackdoorTrigger& trigger) {
    for (int j : trigger.feature_indices)
        if (j >= 0 && j < static_cast<int>(x.size())) x[j] = trigger.trigger_value;
}

Dataset backdoor_poison(const Dataset& shard, const BackdoorTrigger& trigger, double rate,
                        std::uint64_t seed) {
    if (rate <= 0.0 || rate > 1.0) throw InvalidInputError("backdoor_poison: rate out of (0,1]");
    Dataset out = shard;
    Rng rng(seed);
    const std::size_t k = static_cast<std::size_t>(
        std::floor(rate * static_cast<double>(shard.size()) + 0.5));
    for (std::size_t idx : rng.sample_without_replacement(shard.size(), k)) {
        apply_trigger(out.X.row(idx), trigger);
        out.y[idx] = trigger.target_class;
    }
    return out;
}

double measure_asr(const MlpModel& model, const Dataset& clean_testset,
                   const BackdoorTrigger& trigger) {
    std::size_t total = 0, hits = 0;
    std::vector<double> x(clean_testset.dim());
    for (std::size_t i = 0; i < clean_testset.size(); ++i) {
        if (clean_testset.y[i] == trigger.target_class) continue;
        ++total;
        std::copy(clean_testset.X.row(i).begin(), clean_testset.X.row(i).end(), x.begin());
        apply_trigger(x, trigger);
        const std::vector<double> probs = forward_one(model, x);
        int best = 0;
        for (std::size_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[best]) best = static_cast<int>(j);
        if (best == trigger.target_class) ++hits;
    }
    if (total == 0) throw InvalidInputError("measure_asr: test set has only target-class rows");
    return static_cast<double>(hits) / static_cast<double>(total);
}

AttestationToken sybil_forge(const std::string& fake_id, std::int64_t now_ms, Rng& rng) {
    AgentIdentity fake;
    fake.agent_id = fake_id;
    fake.keys = make_keypair(rng);  // never registered anywhere
    fake.pcr_state = sha256("fw-1.0:" + fake_id);
    return issue_token(fake, now_ms, rng);
}

AttestationToken replay_capture(const AttestationToken& token) { return token; }

ConstrainedAttackResult shap_constrained_attack(const MlpModel& global_model,
                                                const Dataset& shard, double constraint_tau,
                                                const ImportanceFn& importance,
                                                const std::vector<double>& phi_prev, int steps,
                                                double lr, std::uint64_t seed) {
    if (constraint_tau <= 0.0)
        throw InvalidInputError("shap_constrained_attack: constraint_tau must be > 0");
    const bool unconstrained = !std::isfinite(constraint_tau);

    const auto phi_dist = [&](const ParamVector& params) {
        const AttributionVector phi = importance(params);
        double s = 0.0;
        for (std::size_t j = 0; j < phi.phi.size(); ++j) {
            const double d = phi.phi[j] - phi_prev[j];
            s += d * d;
        }
        return std::sqrt(s);
    };

    ConstrainedAttackResult res;
    res.delta = zeros_like(global_model.params);

    if (!unconstrained) {
        res.phi_distance = phi_dist(global_model.params);
        if (res.phi_distance >= constraint_tau) {
            res.feasible = false;  // cannot move at all; emit a no-op update
            return res;
        }
    }

    const Dataset flipped = label_flip(shard, 1.0, derive_seed(seed, "poison-labels"));
    MlpModel theta = global_model;
    for (int step = 0; step < steps; ++step) {
        const LossGrad lg = loss_and_grad(theta, flipped.X, flipped.y);
        double h = lr;
        bool moved = false;
        for (int halving = 0; halving <= 20; ++halving) {
            MlpModel trial = theta;
            for (std::size_t j = 0; j < trial.params.values.size(); ++j)
                trial.params.values[j] -= h * lg.grad.values[j];
            if (unconstrained) {
                theta = std::move(trial);
                moved = true;
                break;
            }
            const double dist = phi_dist(trial.params);
            if (dist < constraint_tau) {
                theta = std::move(trial);
                res.phi_distance = dist;
                moved = true;
                break;
            }
            h *= 0.5;
        }
        if (!moved) break;
        res.steps_taken = step + 1;
    }
    res.delta = theta.params - global_model.params;
    if (unconstrained) res.phi_distance = std::numeric_limits<double>::quiet_NaN();
    return res;
}

ParamVector slow_poison_offset(int round_t, double alpha_per_round,
                               std::uint64_t direction_seed, const ParamVector& shape) {
    if (alpha_per_round < 0.0 || alpha_per_round >= 0.1)
        throw InvalidInputError("slow_poison: per-round alpha must be in [0, 0.1)");
    ParamVector offset = zeros_like(shape);
    if (alpha_per_round == 0.0 || round_t <= 0) return offset;
    Rng rng(derive_seed(direction_seed, "slow-poison-direction"));
    for (double& v : offset.values) v = rng.normal();
    const double norm = l2_norm(offset);
    const double scale = norm == 0.0 ? 0.0 : (round_t * alpha_per_round) / norm;
    for (double& v : offset.values) v *= scale;
    return offset;
}

}  // namespace ztafl
