#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ztafl/dataset.hpp"
#include "ztafl/mlp.hpp"

namespace ztafl {

// L-infinity attack budget. steps = 1 is FGSM; step_size defaults to eps for
// one step and eps/4 for iterated attacks.
struct AttackBudget {
    double eps = 0.1;
    int steps = 1;
    double step_size = 0.1;
    bool random_start = false;

    static AttackBudget fgsm(double eps) { return {eps, 1, eps, false}; }
    static AttackBudget pgd(double eps, int steps) { return {eps, steps, eps / 4.0, true}; }
};

// Single signed-gradient step, clipped to [0,1]^d.
std::vector<double> fgsm_example(const MlpModel& model, std::span<const double> x, int y,
                                 double eps);

// Iterated signed-gradient ascent projected onto the eps-ball and [0,1]^d.
// With steps=1, step_size=eps, random_start=false this reduces to FGSM.
std::vector<double> pgd_example(const MlpModel& model, std::span<const double> x, int y,
                                const AttackBudget& budget, std::uint64_t seed);

// Replaces a seed-selected `ratio` fraction of the shard with adversarial
// versions generated against the given model. Labels and shard size are
// unchanged.
Dataset adv_augment(const MlpModel& model, const Dataset& shard, double ratio,
                    const AttackBudget& budget, std::uint64_t seed);

// Accuracy on per-sample white-box adversarial examples.
double robust_eval(const MlpModel& model, const Dataset& testset, const AttackBudget& budget,
                   std::uint64_t seed = 0);

struct AdvTrainOptions {
    TrainOptions train;
    AttackBudget budget = AttackBudget::fgsm(0.1);
    double ratio = 0.30;  // adversarial fraction of each epoch's data
};

// Local training with on-device adversarial augmentation. The adversarial
// subset is fixed by the seed; its examples are regenerated against the
// current model at the start of every epoch.
MlpModel adv_local_train(const MlpModel& model, const Dataset& shard,
                         const AdvTrainOptions& opts, std::uint64_t seed);

}  // namespace ztafl
