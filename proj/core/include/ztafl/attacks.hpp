#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ztafl/aggregation.hpp"
#include "ztafl/attestation.hpp"
#include "ztafl/dataset.hpp"
#include "ztafl/mlp.hpp"

namespace ztafl {

enum class AttackKind {
    none,
    label_flip,
    grad_scale,
    backdoor,
    sybil,
    replay,
    shap_constrained,
    slow_poison,
};

const char* to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct BackdoorTrigger {
    std::vector<int> feature_indices = {0, 1, 2, 3};
    double trigger_value = 1.0;
    int target_class = 0;
};

struct AttackConfig {
    AttackKind kind = AttackKind::none;
    double beta = 0.0;  // compromised fraction, < 0.5
    // kind-specific parameters
    double p_flip = 1.0;            // label_flip
    double alpha = 5.0;             // grad_scale magnitude
    BackdoorTrigger trigger;        // backdoor
    double poison_rate = 0.1;       // backdoor poisoning rate
    double per_round_alpha = 0.05;  // slow_poison injection per round
    double constraint_tau = 0.5;    // shap_constrained radius
    int poison_steps = 3;           // shap_constrained / unconstrained GD steps
    double poison_lr = 0.05;        // shap_constrained step size
};

// The compromised agents: floor(beta*N) ids, a pure function of the inputs.
std::vector<int> compromised_set(std::uint64_t seed, double beta, int n_agents);

// Each sample independently relabeled c -> C-1-c with probability p_flip.
Dataset label_flip(const Dataset& shard, double p_flip, std::uint64_t seed);

// delta <- alpha * delta; metadata untouched.
ClientUpdate grad_scale(ClientUpdate update, double alpha);

// A rate-fraction of samples get the trigger features set and the label
// moved to the target class.
Dataset backdoor_poison(const Dataset& shard, const BackdoorTrigger& trigger, double rate,
                        std::uint64_t seed);

// Applies the trigger to a single feature row in place.
void apply_trigger(std::span<double> x, const BackdoorTrigger& trigger);

// Fraction of non-target-class clean test samples classified as the target
// class once the trigger is applied.
double measure_asr(const MlpModel& model, const Dataset& clean_testset,
                   const BackdoorTrigger& trigger);

// Syntactically valid token signed with a fresh unregistered key.
AttestationToken sybil_forge(const std::string& fake_id, std::int64_t now_ms, Rng& rng);

// Byte-identical copy of a captured token.
AttestationToken replay_capture(const AttestationToken& token);

struct ConstrainedAttackResult {
    ParamVector delta;
    bool feasible = true;   // false: constraint already violated at step 0
    int steps_taken = 0;
    double phi_distance = 0.0;  // ||phi(theta~) - phi_prev|| at the emitted point
};

// Projected poisoning: gradient descent on the flipped-label objective with
// backtracking (up to 20 halvings per step) so that the attacker's own
// attribution stays inside the constraint ball around phi_prev. An infinite
// constraint_tau skips every attribution call and is plain poisoning.
ConstrainedAttackResult shap_constrained_attack(const MlpModel& global_model,
                                                const Dataset& shard, double constraint_tau,
                                                const ImportanceFn& importance,
                                                const std::vector<double>& phi_prev, int steps,
                                                double lr, std::uint64_t seed);

// Cumulative slow-poison offset for the given round: round_t * alpha per-round
// injections along a fixed seed-drawn unit direction.
ParamVector slow_poison_offset(int round_t, double alpha_per_round,
                               std::uint64_t direction_seed, const ParamVector& shape);

}  // namespace ztafl
