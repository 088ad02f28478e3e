#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ztafl/dataset.hpp"
#include "ztafl/matrix.hpp"
#include "ztafl/mlp.hpp"

namespace ztafl {

// Background samples for attribution, drawn from a validation split.
struct BackgroundSet {
    Matrix samples;  // b x d
    std::uint64_t seed = 0;
};

// Drawn without replacement when the validation split is large enough.
BackgroundSet draw_background(const Dataset& validation, std::size_t b, std::uint64_t seed);

enum class AttributionBasis { exact, montecarlo, gradient_path };

struct AttributionVector {
    std::vector<double> phi;
    AttributionBasis basis = AttributionBasis::gradient_path;
    std::size_t eval_count = 0;
};

using ScoreFn = std::function<double(std::span<const double>)>;

// Differentiable scorer: score and its input gradient.
struct DiffScorer {
    ScoreFn score;
    std::function<std::vector<double>(std::span<const double>)> grad;
};

// Model adapters scoring the probability of a fixed class.
ScoreFn true_class_prob(const MlpModel& model, int y);
DiffScorer model_scorer(const MlpModel& model, int y);

// Classic Shapley values of v(S) = mean over background of score(composite),
// where the composite takes features in S from x and the rest from the
// background row. Full coalition enumeration; refuses d > 12.
AttributionVector exact_shapley(const ScoreFn& score, std::span<const double> x,
                                const Matrix& background);

// Unbiased permutation-sampling estimate of exact_shapley.
AttributionVector mc_shapley(const ScoreFn& score, std::span<const double> x,
                             const Matrix& background, int n_perms, std::uint64_t seed);

// Midpoint-rule integrated gradients from each background row to x, averaged
// over the background.
AttributionVector path_attribution(const DiffScorer& scorer, std::span<const double> x,
                                   const Matrix& background, int m_steps = 32);

// Batched model version of path_attribution (one backward pass per sample).
AttributionVector path_attribution(const MlpModel& model, std::span<const double> x, int y,
                                   const Matrix& background, int m_steps = 32);

// Global importance: mean |path attribution| over labeled eval samples.
// Nonnegative; this is the phi_i / phi_ref of the aggregation pipeline.
AttributionVector model_importance(const MlpModel& model, const Dataset& eval_samples,
                                   const BackgroundSet& background, int m_steps = 32);

struct StabilityScore {
    double s = 0.0;
    int agent_id = -1;
};

// s = 1 - ||phi_i - phi_ref|| / (||phi_ref|| + eps). No clamping here;
// clamping to nonnegative happens only in the aggregation weight product.
StabilityScore stability_score(const std::vector<double>& phi_i,
                               const std::vector<double>& phi_ref, double eps = 1e-6,
                               int agent_id = -1);

struct CohortStats {
    double mu = 0.0;
    double sigma = 0.0;      // population standard deviation
    double threshold = 0.0;  // mu - 2*sigma
};

CohortStats cohort_threshold(const std::vector<double>& scores);

}  // namespace ztafl
