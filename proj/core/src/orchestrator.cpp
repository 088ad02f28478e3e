#include "ztafl/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "ztafl/adversarial.hpp"
#include "ztafl/aggregation.hpp"
#include "ztafl/attestation.hpp"
#include "ztafl/attribution.hpp"
#include "ztafl/errors.hpp"
#include "ztafl/metrics.hpp"
#include "ztafl/partition.hpp"
#include "ztafl/quantize.hpp"

namespace ztafl {

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

struct FogState {
    int id = 0;
    std::vector<int> cohort;
    ReferenceRegistry registry;
    Dataset val_subset;
    BackgroundSet background;
    Dataset eval_samples;
    Dataset root_shard;
    DriftTracker drift;
    std::optional<std::vector<double>> phi_ref;  // recomputed each round
    // Fog-validation accuracy of this fog's last accepted aggregate; the
    // rollback guard compares each candidate against the fog's own
    // aggregated-accuracy trajectory. A fog aggregate mixes only its cohort
    // and sits structurally below the cloud-mixed global mid-training, so the
    // global's accuracy is the wrong baseline.
    double last_agg_acc = -1.0;

    explicit FogState(const PublicKey32& manufacturer_key) : registry(manufacturer_key) {}
};

class Simulation {
public:
    Simulation(const ExperimentConfig& config, std::uint64_t seed)
        : cfg_(config), seed_(seed), root_(seed) {
        cfg_.validate();
        setup();
    }

    RunResult run() {
        for (int r = 1; r <= cfg_.rounds; ++r) run_round(r);
        finalize();
        return std::move(result_);
    }

private:
    void setup();
    void run_round(int round);
    void finalize();

    AttributionVector importance(const FogState& fog, const ParamVector& params) const {
        const MlpModel m{layer_dims_, params};
        return model_importance(m, fog.eval_samples, fog.background, cfg_.shap.ig_steps);
    }

    void ensure_phi_ref(FogState& fog) {
        if (!fog.phi_ref) fog.phi_ref = importance(fog, global_.params).phi;
    }

    double subset_accuracy(const ParamVector& params, const Dataset& ds) const {
        const MlpModel m{layer_dims_, params};
        return accuracy(m, ds.X, ds.y);
    }

    bool is_compromised(int agent) const {
        return std::binary_search(result_.compromised.begin(), result_.compromised.end(), agent);
    }

    void audit(int round, std::string agent, std::string event, std::string detail,
               double tau = -1.0) {
        result_.audit_rows.push_back(
            {round, std::move(agent), std::move(event), std::move(detail), tau});
    }

    static std::string agent_name(int id) { return "agent-" + std::to_string(id); }

    ExperimentConfig cfg_;
    std::uint64_t seed_;
    Rng root_;
    std::vector<int> layer_dims_;
    Topology topo_;

    Dataset val_, test_;
    std::vector<AgentShard> shards_;
    std::vector<AgentIdentity> identities_;
    std::vector<Rng> nonce_rngs_;
    KeyPair manufacturer_;
    TrustDb trustdb_;
    std::vector<FogState> fogs_;
    MlpModel global_;
    std::map<int, AttestationToken> captured_tokens_;  // replay attack state
    std::uint64_t slow_direction_seed_ = 0;

    RunResult result_;
};

void Simulation::setup() {
    topo_ = {cfg_.topology.agents, cfg_.topology.fogs};
    layer_dims_ = cfg_.layer_dims();
    trustdb_ = TrustDb(cfg_.attestation.tau_min);

    // Data pipeline: synthesize, stratified split, min-max normalize on the
    // training bounds, then the non-IID partition.
    Dataset full = generate_synthetic(cfg_.data.samples, cfg_.data.features, cfg_.data.classes,
                                      derive_seed(seed_, "data"));
    SplitResult split = split_dataset(full, derive_seed(seed_, "split"));
    const NormalizationMap bounds = minmax_fit(split.train);
    minmax_apply(bounds, split.train);
    minmax_apply(bounds, split.val);
    minmax_apply(bounds, split.test);
    val_ = std::move(split.val);
    test_ = std::move(split.test);

    PartitionSpec pspec;
    pspec.n_agents = cfg_.topology.agents;
    pspec.classes_per_agent = cfg_.partition.classes_per_agent;
    pspec.min_samples = cfg_.partition.min_samples;
    pspec.max_samples = cfg_.partition.max_samples;
    pspec.power_law_exponent = cfg_.partition.power_law_exponent;
    if (cfg_.partition.feature_skew_groups > 0) {
        const int g = cfg_.partition.feature_skew_groups;
        const int d = cfg_.data.features;
        pspec.feature_skew_groups.resize(g);
        for (int j = 0; j < d; ++j)
            pspec.feature_skew_groups[(j * g) / d].push_back(j);
    }
    shards_ = partition_noniid(split.train, pspec, derive_seed(seed_, "partition"));

    // Attack roles and data poisoning.
    if (cfg_.attack.kind != AttackKind::none && cfg_.attack.beta > 0.0)
        result_.compromised =
            compromised_set(derive_seed(seed_, "attack"), cfg_.attack.beta, topo_.agents);
    slow_direction_seed_ = derive_seed(seed_, "slow-direction");
    for (int a : result_.compromised) {
        if (cfg_.attack.kind == AttackKind::label_flip) {
            shards_[a].train = label_flip(shards_[a].train, cfg_.attack.p_flip,
                                          derive_seed(seed_, "flip", a));
        } else if (cfg_.attack.kind == AttackKind::backdoor) {
            shards_[a].train = backdoor_poison(shards_[a].train, cfg_.attack.trigger,
                                               cfg_.attack.poison_rate,
                                               derive_seed(seed_, "backdoor", a));
        }
    }

    // Identities, per-fog verifier state, trust entries.
    manufacturer_ = [&] {
        Rng r(derive_seed(seed_, "manufacturer"));
        return make_keypair(r);
    }();
    identities_.reserve(topo_.agents);
    nonce_rngs_.reserve(topo_.agents);
    for (int a = 0; a < topo_.agents; ++a) {
        Rng key_rng(derive_seed(seed_, "keys", a));
        identities_.push_back(make_identity(agent_name(a), key_rng));
        nonce_rngs_.emplace_back(derive_seed(seed_, "nonce", a));
        trustdb_.register_agent(agent_name(a));
    }

    fogs_.reserve(topo_.fogs);
    for (int f = 0; f < topo_.fogs; ++f) {
        FogState fog(manufacturer_.pk);
        fog.id = f;
        for (int a = 0; a < topo_.agents; ++a)
            if (topo_.fog_of(a) == f) {
                fog.cohort.push_back(a);
                fog.registry.register_agent(identities_[a]);
            }
        // The fog's shared validation subset; backgrounds, importance eval
        // samples, and the FLTrust root shard all come from it.
        Rng fog_rng(derive_seed(seed_, "fog", f));
        const std::size_t sub = std::min<std::size_t>(val_.size(), 400);
        fog.val_subset = take(val_, fog_rng.sample_without_replacement(val_.size(), sub));
        fog.background =
            draw_background(fog.val_subset, cfg_.shap.background, derive_seed(seed_, "bg", f));
        Rng eval_rng(derive_seed(seed_, "eval", f));
        fog.eval_samples = take(
            fog.val_subset,
            eval_rng.sample_without_replacement(
                fog.val_subset.size(), std::min(cfg_.shap.eval_samples, fog.val_subset.size())));
        Rng root_rng(derive_seed(seed_, "root", f));
        const std::size_t root_n =
            std::max<std::size_t>(1, fog.val_subset.size() / 20);  // 5% root shard
        fog.root_shard =
            take(fog.val_subset, root_rng.sample_without_replacement(fog.val_subset.size(), root_n));
        fogs_.push_back(std::move(fog));
    }

    Rng init_rng(derive_seed(seed_, "init"));
    global_ = init_mlp(layer_dims_, init_rng);

    result_.seed = seed_;
    result_.records.reserve(cfg_.rounds);
}

void Simulation::run_round(int round) {
    const std::int64_t now_ms = static_cast<std::int64_t>(round) * 1000;
    const std::size_t pbytes = param_wire_bytes(global_.params.size());

    RoundRecord rec;
    rec.round = round;

    // The stability pipeline engages after the FedAvg warm-up phase.
    const bool shap_active = cfg_.aggregation.rule == AggregationRule::ztafl &&
                             round > cfg_.warmup_rounds;

    // phi_ref (importance of the previous accepted global model) is needed by
    // the ztafl rule and by white-box constrained attackers.
    for (auto& fog : fogs_) fog.phi_ref.reset();
    const bool need_phi = shap_active || cfg_.attack.kind == AttackKind::shap_constrained;
    if (need_phi)
        for (auto& fog : fogs_) ensure_phi_ref(fog);

    // --- Edge phase -------------------------------------------------------
    std::vector<std::vector<ClientUpdate>> cohorts(fogs_.size());
    int active_participants = 0;
    for (int a = 0; a < topo_.agents; ++a) {
        FogState& fog = fogs_[topo_.fog_of(a)];
        const std::string name = agent_name(a);
        const TrustEntry& entry = trustdb_.entry(name);

        if (entry.state == AgentState::quarantined) {
            // Remediation channel only: no broadcast, no model bytes.
            bool valid = true;
            if (cfg_.attestation.enabled) {
                AttestationToken token;
                if (cfg_.attack.kind == AttackKind::replay && is_compromised(a) &&
                    captured_tokens_.count(a)) {
                    token = replay_capture(captured_tokens_.at(a));
                } else {
                    token = issue_token(identities_[a], now_ms, nonce_rngs_[a]);
                }
                rec.bytes_attest += kTokenWireBytes + kSealEnvelopeBytes;
                valid = fog.registry.attestation_valid(token, now_ms, cfg_.attestation.dt_max_ms);
            }
            const AgentState st = trustdb_.quarantine_step(name, valid);
            if (st == AgentState::active)
                audit(round, name, "rejoin", "tau=0.65", trustdb_.entry(name).tau);
            else
                audit(round, name, "quarantine_step", valid ? "valid" : "invalid",
                      trustdb_.entry(name).tau);
            continue;
        }

        ++active_participants;

        if (cfg_.attestation.enabled) {
            AttestationToken token;
            const bool replaying = cfg_.attack.kind == AttackKind::replay && is_compromised(a) &&
                                   captured_tokens_.count(a) > 0;
            if (replaying) {
                token = replay_capture(captured_tokens_.at(a));
            } else {
                token = issue_token(identities_[a], now_ms, nonce_rngs_[a]);
                if (cfg_.attack.kind == AttackKind::replay && is_compromised(a))
                    captured_tokens_[a] = token;  // capture once, replay forever
            }
            rec.bytes_attest += kTokenWireBytes + kSealEnvelopeBytes;

            if (cfg_.attack.kind == AttackKind::sybil && is_compromised(a)) {
                Rng sybil_rng(derive_seed(seed_, "sybil", static_cast<std::uint64_t>(a) * 100000 +
                                                              static_cast<std::uint64_t>(round)));
                const AttestationToken forged =
                    sybil_forge("sybil-" + std::to_string(a), now_ms, sybil_rng);
                rec.bytes_attest += kTokenWireBytes + kSealEnvelopeBytes;
                const VerifyStatus forged_status =
                    fog.registry.verify_token(forged, trustdb_, now_ms, cfg_.attestation.dt_max_ms);
                audit(round, "sybil-" + std::to_string(a), "verify_reject",
                      to_string(forged_status));
            }

            const VerifyStatus status =
                fog.registry.verify_token(token, trustdb_, now_ms, cfg_.attestation.dt_max_ms);
            if (status != VerifyStatus::accept) {
                audit(round, name, "verify_reject", to_string(status), entry.tau);
                const TrustEntry after = trustdb_.penalize(name);
                audit(round, name, "penalty", "attestation", after.tau);
                if (after.state == AgentState::quarantined)
                    audit(round, name, "quarantine", "tau-below-min", after.tau);
                // The rejected upload still crossed the wire before the fog
                // discarded it.
                rec.bytes_model_up += cfg_.quantize_updates
                                          ? quant_wire_bytes(global_.params.size())
                                          : pbytes;
                continue;
            }
            audit(round, name, "verify_accept", "", entry.tau);
        }

        // Local training (with on-device adversarial augmentation if enabled).
        const std::uint64_t train_seed =
            derive_seed(derive_seed(seed_, "agent", a), "round", round);
        MlpModel trained;
        if (cfg_.adversarial_training.enabled) {
            AdvTrainOptions opts;
            opts.train = {cfg_.optimizer.epochs, cfg_.optimizer.batch_size,
                          cfg_.optimizer.learning_rate};
            opts.budget = cfg_.adversarial_training.steps <= 1
                              ? AttackBudget::fgsm(cfg_.adversarial_training.eps)
                              : AttackBudget::pgd(cfg_.adversarial_training.eps,
                                                  cfg_.adversarial_training.steps);
            opts.ratio = cfg_.adversarial_training.ratio;
            trained = adv_local_train(global_, shards_[a].train, opts, train_seed);
        } else {
            const TrainOptions opts{cfg_.optimizer.epochs, cfg_.optimizer.batch_size,
                                    cfg_.optimizer.learning_rate};
            trained = local_train(global_, shards_[a].train.X, shards_[a].train.y, opts,
                                  train_seed);
        }
        ParamVector delta = trained.params - global_.params;

        // Update-level attack roles.
        if (is_compromised(a)) {
            switch (cfg_.attack.kind) {
                case AttackKind::grad_scale:
                    delta *= cfg_.attack.alpha;
                    break;
                case AttackKind::slow_poison:
                    delta += slow_poison_offset(round, cfg_.attack.per_round_alpha,
                                                slow_direction_seed_, delta);
                    break;
                case AttackKind::shap_constrained: {
                    const ImportanceFn imp = [this, &fog](const ParamVector& p) {
                        return importance(fog, p);
                    };
                    const ConstrainedAttackResult res = shap_constrained_attack(
                        global_, shards_[a].train, cfg_.attack.constraint_tau, imp, *fog.phi_ref,
                        cfg_.attack.poison_steps, cfg_.attack.poison_lr,
                        derive_seed(seed_, "constrained", a));
                    delta = res.delta;
                    result_.constrained_rows.push_back({round, a, res.feasible, res.phi_distance});
                    break;
                }
                default:
                    break;
            }
        }

        if (cfg_.quantize_updates) {
            delta = dequantize(quantize(delta));
            rec.bytes_model_up += quant_wire_bytes(delta.size());
        } else {
            rec.bytes_model_up += pbytes;
        }

        ClientUpdate update;
        update.agent_id = a;
        update.delta = std::move(delta);
        update.n_samples = shards_[a].train.size();
        update.attested = true;
        cohorts[topo_.fog_of(a)].push_back(std::move(update));
    }

    rec.bytes_model_down =
        static_cast<std::uint64_t>(fogs_.size()) * pbytes +
        static_cast<std::uint64_t>(active_participants) * pbytes;

    // --- Fog phase --------------------------------------------------------
    std::vector<ParamVector> fog_models(fogs_.size());
    std::vector<std::size_t> fog_weights(fogs_.size(), 0);
    for (std::size_t f = 0; f < fogs_.size(); ++f) {
        FogState& fog = fogs_[f];
        std::vector<ClientUpdate>& cohort = cohorts[f];
        rec.bytes_fog_cloud += pbytes;

        const double prev_acc = subset_accuracy(global_.params, fog.val_subset);
        if (cohort.empty()) {
            fog_models[f] = global_.params;
            fog_weights[f] = 0;
            result_.fog_rows.push_back(
                {round, fog.id, prev_acc, prev_acc, prev_acc, true, "empty-cohort", 0});
            audit(round, "fog-" + std::to_string(fog.id), "rollback", "empty-cohort");
            rec.rolled_back = true;
            continue;
        }

        // Fog-measured validation accuracy per update.
        for (auto& u : cohort)
            u.fog_accuracy = subset_accuracy(global_.params + u.delta, fog.val_subset);

        std::size_t cohort_samples = 0;
        for (const auto& u : cohort) cohort_samples += u.n_samples;

        const AggregationRule effective_rule =
            (cfg_.aggregation.rule == AggregationRule::ztafl && !shap_active)
                ? AggregationRule::fedavg
                : cfg_.aggregation.rule;
        switch (effective_rule) {
            case AggregationRule::fedavg:
                fog_models[f] = fedavg(global_.params, cohort);
                fog_weights[f] = cohort_samples;
                {
                    const double cand = subset_accuracy(fog_models[f], fog.val_subset);
                    fog.last_agg_acc = cand;
                    result_.fog_rows.push_back(
                        {round, fog.id, prev_acc, cand, cand, false, "", cohort_samples});
                }
                break;
            case AggregationRule::krum: {
                int kf = cfg_.aggregation.krum_f >= 0
                             ? cfg_.aggregation.krum_f
                             : static_cast<int>(std::floor(cfg_.attack.beta *
                                                           static_cast<double>(cohort.size())));
                while (kf > 0 && cohort.size() < static_cast<std::size_t>(2 * kf + 3)) --kf;
                if (cohort.size() < 3) {
                    fog_models[f] = fedavg(global_.params, cohort);
                    audit(round, "fog-" + std::to_string(fog.id), "fallback",
                          "krum-infeasible-fedavg");
                } else {
                    fog_models[f] = krum(global_.params, cohort, kf);
                }
                fog_weights[f] = cohort_samples;
                {
                    const double cand = subset_accuracy(fog_models[f], fog.val_subset);
                    fog.last_agg_acc = cand;
                    result_.fog_rows.push_back(
                        {round, fog.id, prev_acc, cand, cand, false, "", cohort_samples});
                }
                break;
            }
            case AggregationRule::trimmed_mean: {
                const std::size_t k = static_cast<std::size_t>(
                    std::floor(cfg_.aggregation.trim_frac * static_cast<double>(cohort.size())));
                if (2 * k >= cohort.size()) {
                    fog_models[f] = fedavg(global_.params, cohort);
                    audit(round, "fog-" + std::to_string(fog.id), "fallback",
                          "trim-infeasible-fedavg");
                } else {
                    fog_models[f] = trimmed_mean(global_.params, cohort, cfg_.aggregation.trim_frac);
                }
                fog_weights[f] = cohort_samples;
                {
                    const double cand = subset_accuracy(fog_models[f], fog.val_subset);
                    fog.last_agg_acc = cand;
                    result_.fog_rows.push_back(
                        {round, fog.id, prev_acc, cand, cand, false, "", cohort_samples});
                }
                break;
            }
            case AggregationRule::geometric_median:
                fog_models[f] = geometric_median(global_.params, cohort);
                fog_weights[f] = cohort_samples;
                {
                    const double cand = subset_accuracy(fog_models[f], fog.val_subset);
                    fog.last_agg_acc = cand;
                    result_.fog_rows.push_back(
                        {round, fog.id, prev_acc, cand, cand, false, "", cohort_samples});
                }
                break;
            case AggregationRule::fltrust: {
                const TrainOptions opts{cfg_.optimizer.epochs, cfg_.optimizer.batch_size,
                                        cfg_.optimizer.learning_rate};
                const MlpModel root_model =
                    local_train(global_, fog.root_shard.X, fog.root_shard.y, opts,
                                derive_seed(seed_, "root-train",
                                            static_cast<std::uint64_t>(f) * 100000 +
                                                static_cast<std::uint64_t>(round)));
                const ParamVector root_delta = root_model.params - global_.params;
                if (l2_norm(root_delta) == 0.0) {
                    fog_models[f] = fedavg(global_.params, cohort);
                    audit(round, "fog-" + std::to_string(fog.id), "fallback",
                          "zero-root-delta-fedavg");
                } else {
                    fog_models[f] = fltrust_cosine(global_.params, cohort, root_delta);
                }
                fog_weights[f] = cohort_samples;
                {
                    const double cand = subset_accuracy(fog_models[f], fog.val_subset);
                    fog.last_agg_acc = cand;
                    result_.fog_rows.push_back(
                        {round, fog.id, prev_acc, cand, cand, false, "", cohort_samples});
                }
                break;
            }
            case AggregationRule::ztafl: {
                // Stability scoring (and drift tracking) per admitted update.
                for (auto& u : cohort) {
                    const AttributionVector phi = importance(fog, global_.params + u.delta);
                    u.stability =
                        stability_score(phi.phi, *fog.phi_ref, cfg_.shap.eps, u.agent_id);
                    fog.drift.update(u.agent_id, phi.phi);
                }
                const ImportanceFn imp = [this, &fog](const ParamVector& p) {
                    return importance(fog, p);
                };
                const ModelAccuracyFn acc_fn = [this, &fog](const ParamVector& p) {
                    return subset_accuracy(p, fog.val_subset);
                };
                ShapAggregationConfig scfg;
                scfg.stability_eps = cfg_.shap.eps;
                const double baseline = fog.last_agg_acc >= 0.0 ? fog.last_agg_acc : prev_acc;
                const AggregationOutcome outcome = shap_weighted_aggregate(
                    global_.params, cohort, *fog.phi_ref, baseline, imp, acc_fn, scfg);
                if (!outcome.rolled_back) fog.last_agg_acc = outcome.candidate_accuracy;

                for (const auto& d : outcome.decisions) {
                    result_.filter_rows.push_back({round, fog.id, d.agent_id, d.stability,
                                                   outcome.stats.mu, outcome.stats.sigma,
                                                   d.filtered, d.reason, d.weight});
                    const std::string aname = agent_name(d.agent_id);
                    if (d.filtered) {
                        ++rec.filtered_count;
                        const TrustEntry after = trustdb_.penalize(aname);
                        audit(round, aname, "penalty", "filter", after.tau);
                        if (after.state == AgentState::quarantined)
                            audit(round, aname, "quarantine", "tau-below-min", after.tau);
                    } else if (d.stability > outcome.stats.mu) {
                        trustdb_.update_success(aname, true);
                        audit(round, aname, "trust_up", "above-average",
                              trustdb_.entry(aname).tau);
                    }
                }
                if (fog.cohort.size() <= 5 && cohort.size() <= 5)
                    audit(round, "fog-" + std::to_string(fog.id), "warning",
                          "cohort<=5-2sigma-blind-spot");

                // Drift alarm state for this fog's cohort.
                const auto flagged = fog.drift.alarm_default();
                for (int a : fog.cohort)
                    if (fog.drift.tracked(a))
                        result_.drift_rows.push_back(
                            {round, a, fog.drift.cumulative(a),
                             std::find(flagged.begin(), flagged.end(), a) != flagged.end()});

                fog_models[f] = outcome.new_params;
                fog_weights[f] = outcome.accepted_samples;
                const double out_acc =
                    outcome.rolled_back ? prev_acc : outcome.candidate_accuracy;
                result_.fog_rows.push_back({round, fog.id, baseline, out_acc,
                                            outcome.candidate_accuracy, outcome.rolled_back,
                                            outcome.rollback_reason, outcome.accepted_samples});
                if (outcome.rolled_back) {
                    rec.rolled_back = true;
                    audit(round, "fog-" + std::to_string(fog.id), "rollback",
                          outcome.rollback_reason);
                }
                break;
            }
        }
    }

    // --- Cloud phase ------------------------------------------------------
    std::size_t total_weight = 0;
    for (std::size_t w : fog_weights) total_weight += w;
    if (total_weight == 0) {
        rec.rolled_back = true;
        audit(round, "cloud", "rollback", "no-accepted-samples");
    } else {
        ParamVector merged = zeros_like(global_.params);
        for (std::size_t f = 0; f < fogs_.size(); ++f) {
            if (fog_weights[f] == 0) continue;
            const double w =
                static_cast<double>(fog_weights[f]) / static_cast<double>(total_weight);
            for (std::size_t j = 0; j < merged.values.size(); ++j)
                merged.values[j] += w * fog_models[f].values[j];
        }
        global_.params = std::move(merged);
    }

    // --- Metrics ----------------------------------------------------------
    rec.val_acc = accuracy(global_, val_.X, val_.y);
    const EvalResult test_eval = evaluate(global_, test_.X, test_.y);
    rec.test_acc = test_eval.accuracy;
    rec.macro_f1 = test_eval.macro_f1;
    if (cfg_.attack.kind == AttackKind::backdoor)
        rec.asr = measure_asr(global_, test_, cfg_.attack.trigger);
    if (round % cfg_.robust_eval.every == 0 || round == cfg_.rounds) {
        const AttackBudget b = cfg_.robust_eval.steps <= 1
                                   ? AttackBudget::fgsm(cfg_.robust_eval.eps)
                                   : AttackBudget::pgd(cfg_.robust_eval.eps, cfg_.robust_eval.steps);
        rec.robust_acc = robust_eval(global_, test_, b, derive_seed(seed_, "robust", round));
    }
    rec.bytes_model = rec.bytes_model_down + rec.bytes_model_up + rec.bytes_fog_cloud;
    result_.records.push_back(rec);
}

void Simulation::finalize() {
    result_.final_model = global_;
    result_.val = val_;
    result_.test = test_;
    result_.final_val_acc = result_.records.empty() ? 0.0 : result_.records.back().val_acc;
    result_.final_test_acc = result_.records.empty() ? 0.0 : result_.records.back().test_acc;
    for (double eps : {0.0, 0.05, 0.10, 0.15, 0.20}) {
        const double r = robust_eval(global_, test_, AttackBudget::fgsm(eps),
                                     derive_seed(seed_, "eps-sweep"));
        result_.eps_sweep.emplace_back(eps, r);
    }
}

}  // namespace

RunResult simulate(const ExperimentConfig& config, std::uint64_t seed) {
    Simulation sim(config, seed);
    return sim.run();
}

int convergence_round(const std::vector<RoundRecord>& records, double frac) {
    if (records.empty()) throw InvalidInputError("convergence_round: no records");
    const double target = frac * records.back().val_acc;
    for (const auto& r : records)
        if (r.val_acc >= target) return r.round;
    return records.back().round;
}

std::string metrics_csv(const RunResult& r) {
    std::ostringstream out;
    out << "round,val_acc,test_acc,macro_f1,asr,robust_acc,rolled_back,bytes_model,"
           "bytes_attest,filtered_count\n";
    for (const auto& rec : r.records) {
        out << rec.round << ',' << fmt_g(rec.val_acc) << ',' << fmt_g(rec.test_acc) << ','
            << fmt_g(rec.macro_f1) << ',';
        if (rec.asr >= 0.0) out << fmt_g(rec.asr);
        out << ',';
        if (rec.robust_acc >= 0.0) out << fmt_g(rec.robust_acc);
        out << ',' << (rec.rolled_back ? 1 : 0) << ',' << rec.bytes_model << ','
            << rec.bytes_attest << ',' << rec.filtered_count << '\n';
    }
    return out.str();
}

std::string filter_csv(const RunResult& r) {
    std::ostringstream out;
    out << "round,fog,agent,s_i,mu_s,sigma_s,filtered,reason,weight\n";
    for (const auto& row : r.filter_rows)
        out << row.round << ',' << row.fog << ',' << row.agent << ',' << fmt_g(row.s) << ','
            << fmt_g(row.mu) << ',' << fmt_g(row.sigma) << ',' << (row.filtered ? 1 : 0) << ','
            << row.reason << ',' << fmt_g(row.weight) << '\n';
    return out.str();
}

std::string audit_csv(const RunResult& r) {
    std::ostringstream out;
    out << "round,agent,event,detail,tau_after\n";
    for (const auto& row : r.audit_rows) {
        out << row.round << ',' << row.agent << ',' << row.event << ',' << row.detail << ',';
        if (row.tau_after >= 0.0) out << fmt_g(row.tau_after);
        out << '\n';
    }
    return out.str();
}

std::string eps_sweep_csv(const RunResult& r) {
    std::ostringstream out;
    out << "eps,robust_acc\n";
    for (const auto& [eps, acc] : r.eps_sweep) out << fmt_g(eps) << ',' << fmt_g(acc) << '\n';
    return out.str();
}

std::string meta_json(const RunResult& r) {
    nlohmann::json j;
    j["seed"] = r.seed;
    j["compromised"] = r.compromised;
    j["final_val_acc"] = r.final_val_acc;
    j["final_test_acc"] = r.final_test_acc;
    j["convergence_round"] = convergence_round(r.records);
    const auto& last = r.records.back();
    if (last.asr >= 0.0) j["final_asr"] = last.asr;
    if (last.robust_acc >= 0.0) j["final_robust_acc"] = last.robust_acc;
    return j.dump(2) + "\n";
}

SeedStats seed_stats(const std::vector<double>& values) {
    SeedStats st;
    if (values.empty()) return st;
    for (double v : values) st.mean += v;
    st.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return st;
}

ExperimentSummary run_experiment_in_memory(const ExperimentConfig& config) {
    ExperimentSummary summary;
    summary.seeds = config.effective_seeds();
    std::vector<double> vals, tests, asrs, robusts, convs;
    for (std::uint64_t s : summary.seeds) {
        RunResult r = simulate(config, s);
        vals.push_back(r.final_val_acc);
        tests.push_back(r.final_test_acc);
        if (!r.records.empty() && r.records.back().asr >= 0.0)
            asrs.push_back(r.records.back().asr);
        if (!r.records.empty() && r.records.back().robust_acc >= 0.0)
            robusts.push_back(r.records.back().robust_acc);
        convs.push_back(static_cast<double>(convergence_round(r.records)));
        summary.runs.push_back(std::move(r));
    }
    summary.final_val_acc = seed_stats(vals);
    summary.final_test_acc = seed_stats(tests);
    summary.final_asr = seed_stats(asrs);
    summary.final_robust_acc = seed_stats(robusts);
    summary.convergence = seed_stats(convs);
    return summary;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write " + path.string());
    out << content;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    save_config(config, (fs::path(out_dir) / "config.json").string());

    ExperimentSummary summary = run_experiment_in_memory(config);
    for (const RunResult& r : summary.runs) {
        const fs::path dir = fs::path(out_dir) / ("seed_" + std::to_string(r.seed));
        fs::create_directories(dir);
        write_file(dir / "metrics.csv", metrics_csv(r));
        write_file(dir / "filter.csv", filter_csv(r));
        write_file(dir / "audit.csv", audit_csv(r));
        write_file(dir / "eps_sweep.csv", eps_sweep_csv(r));
        write_file(dir / "meta.json", meta_json(r));
    }

    nlohmann::json j;
    j["seeds"] = summary.seeds;
    j["final_val_acc"] = {{"mean", summary.final_val_acc.mean},
                          {"std", summary.final_val_acc.stddev}};
    j["final_test_acc"] = {{"mean", summary.final_test_acc.mean},
                           {"std", summary.final_test_acc.stddev}};
    j["final_asr"] = {{"mean", summary.final_asr.mean}, {"std", summary.final_asr.stddev}};
    j["final_robust_acc"] = {{"mean", summary.final_robust_acc.mean},
                             {"std", summary.final_robust_acc.stddev}};
    j["convergence_round"] = {{"mean", summary.convergence.mean},
                              {"std", summary.convergence.stddev}};
    j["rule"] = to_string(config.aggregation.rule);
    j["attack"] = to_string(config.attack.kind);
    j["beta"] = config.attack.beta;
    write_file(fs::path(out_dir) / "summary.json", j.dump(2) + "\n");
    return summary;
}

void sweep(const std::vector<std::pair<std::string, ExperimentConfig>>& configs,
           const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ostringstream table;
    table << "config,rule,attack,beta,final_val_acc_mean,final_val_acc_std,final_test_acc_mean,"
             "final_test_acc_std,asr_mean,robust_acc_mean,convergence_mean\n";
    for (const auto& [name, config] : configs) {
        const ExperimentSummary s = run_experiment(config, (fs::path(out_dir) / name).string());
        table << name << ',' << to_string(config.aggregation.rule) << ','
              << to_string(config.attack.kind) << ',' << fmt_g(config.attack.beta) << ','
              << fmt_g(s.final_val_acc.mean) << ',' << fmt_g(s.final_val_acc.stddev) << ','
              << fmt_g(s.final_test_acc.mean) << ',' << fmt_g(s.final_test_acc.stddev) << ','
              << fmt_g(s.final_asr.mean) << ',' << fmt_g(s.final_robust_acc.mean) << ','
              << fmt_g(s.convergence.mean) << '\n';
    }
    write_file(fs::path(out_dir) / "comparison.csv", table.str());
}

}  // namespace ztafl
