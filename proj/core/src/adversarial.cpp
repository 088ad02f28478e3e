#include "ztafl/adversarial.hpp"

#include <algorithm>
#include <cmath>

#include "ztafl/errors.hpp"
#include "ztafl/rng.hpp"

namespace ztafl {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_budget(const AttackBudget& b) {
    if (b.eps < 0.0) throw InvalidInputError("attack budget: eps must be >= 0");
    if (b.steps < 1) throw InvalidInputError("attack budget: steps must be >= 1");
    if (b.step_size > b.eps + 1e-15) throw InvalidInputError("attack budget: step_size > eps");
}

void project(std::span<const double> x0, std::vector<double>& x, double eps) {
    for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = std::clamp(x[j], x0[j] - eps, x0[j] + eps);
        x[j] = std::clamp(x[j], 0.0, 1.0);
    }
}

}  // namespace

std::vector<double> fgsm_example(const MlpModel& model, std::span<const double> x, int y,
                                 double eps) {
    const std::vector<double> g = input_gradient(model, x, y);
    for (double v : g)
        if (!std::isfinite(v)) throw NumericError("fgsm: non-finite input gradient");
    std::vector<double> adv(x.begin(), x.end());
    for (std::size_t j = 0; j < adv.size(); ++j)
        adv[j] = std::clamp(adv[j] + eps * sign(g[j]), 0.0, 1.0);
    return adv;
}

std::vector<double> pgd_example(const MlpModel& model, std::span<const double> x, int y,
                                const AttackBudget& budget, std::uint64_t seed) {
    check_budget(budget);
    std::vector<double> adv(x.begin(), x.end());
    if (budget.random_start) {
        Rng rng(seed);
        for (double& v : adv) v += rng.uniform(-budget.eps, budget.eps);
        project(x, adv, budget.eps);
    }
    for (int k = 0; k < budget.steps; ++k) {
        const std::vector<double> g = input_gradient(model, adv, y);
        for (double v : g)
            if (!std::isfinite(v)) throw NumericError("pgd: non-finite input gradient");
        for (std::size_t j = 0; j < adv.size(); ++j) adv[j] += budget.step_size * sign(g[j]);
        project(x, adv, budget.eps);
    }
    return adv;
}

Dataset adv_augment(const MlpModel& model, const Dataset& shard, double ratio,
                    const AttackBudget& budget, std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) throw InvalidInputError("adv_augment: ratio out of [0,1]");
    Dataset out = shard;
    if (ratio == 0.0 || shard.size() == 0) return out;

    Rng rng(seed);
    const std::size_t k = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(shard.size()) + 0.5));
    const auto picks = rng.sample_without_replacement(shard.size(), k);
    for (std::size_t idx : picks) {
        const std::uint64_t sample_seed = derive_seed(seed, "pgd-start", idx);
        const std::vector<double> adv =
            pgd_example(model, shard.X.row(idx), shard.y[idx], budget, sample_seed);
        std::copy(adv.begin(), adv.end(), out.X.row(idx).begin());
    }
    return out;
}

double robust_eval(const MlpModel& model, const Dataset& testset, const AttackBudget& budget,
                   std::uint64_t seed) {
    if (testset.size() == 0) throw InvalidInputError("robust_eval: empty test set");
    long correct = 0;
    for (std::size_t i = 0; i < testset.size(); ++i) {
        std::vector<double> adv;
        if (budget.eps == 0.0) {
            adv.assign(testset.X.row(i).begin(), testset.X.row(i).end());
        } else {
            adv = pgd_example(model, testset.X.row(i), testset.y[i], budget,
                              derive_seed(seed, "robust", i));
        }
        const std::vector<double> probs = forward_one(model, adv);
        int best = 0;
        for (std::size_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[best]) best = static_cast<int>(j);
        if (best == testset.y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(testset.size());
}

MlpModel adv_local_train(const MlpModel& model, const Dataset& shard,
                         const AdvTrainOptions& opts, std::uint64_t seed) {
    if (shard.size() == 0) throw InvalidInputError("adv_local_train: empty shard");
    MlpModel trained = model;
    AdamState adam = make_adam(model.params.size(), opts.train.lr);
    Rng rng(seed);
    std::vector<std::size_t> order(shard.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < opts.train.epochs; ++e) {
        const Dataset epoch_data =
            adv_augment(trained, shard, opts.ratio, opts.budget, derive_seed(seed, "adv-epoch", e));
        rng.shuffle(order);
        train_one_epoch(trained, adam, epoch_data.X, epoch_data.y, order, opts.train.batch_size);
    }
    return trained;
}

}  // namespace ztafl
