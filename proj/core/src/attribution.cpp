#include "ztafl/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "ztafl/errors.hpp"
#include "ztafl/rng.hpp"

namespace ztafl {

BackgroundSet draw_background(const Dataset& validation, std::size_t b, std::uint64_t seed) {
    if (b < 1) throw InvalidInputError("draw_background: need b >= 1");
    if (validation.size() == 0) throw InvalidInputError("draw_background: empty validation set");
    Rng rng(seed);
    BackgroundSet bg;
    bg.seed = seed;
    if (validation.size() >= b) {
        const auto picks = rng.sample_without_replacement(validation.size(), b);
        bg.samples = Matrix(b, validation.dim());
        for (std::size_t i = 0; i < b; ++i)
            std::copy(validation.X.row(picks[i]).begin(), validation.X.row(picks[i]).end(),
                      bg.samples.row(i).begin());
    } else {
        bg.samples = Matrix(b, validation.dim());
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t src = rng.uniform_u64(validation.size());
            std::copy(validation.X.row(src).begin(), validation.X.row(src).end(),
                      bg.samples.row(i).begin());
        }
    }
    return bg;
}

ScoreFn true_class_prob(const MlpModel& model, int y) {
    return [&model, y](std::span<const double> x) { return forward_one(model, x)[y]; };
}

DiffScorer model_scorer(const MlpModel& model, int y) {
    DiffScorer s;
    s.score = true_class_prob(model, y);
    s.grad = [&model, y](std::span<const double> x) {
        Matrix X(1, x.size());
        std::copy(x.begin(), x.end(), X.data().begin());
        Matrix g = score_input_gradients(model, X, {y});
        return g.data();
    };
    return s;
}

namespace {

double background_mean_score(const ScoreFn& score, const Matrix& composite) {
    double sum = 0.0;
    for (std::size_t i = 0; i < composite.rows(); ++i) sum += score(composite.row(i));
    return sum / static_cast<double>(composite.rows());
}

}  // namespace

AttributionVector exact_shapley(const ScoreFn& score, std::span<const double> x,
                                const Matrix& background) {
    const std::size_t d = x.size();
    if (d > 12) throw InvalidInputError("exact_shapley: refuses d > 12 (2^d enumeration)");
    if (background.cols() != d) throw ShapeError("exact_shapley: background width mismatch");
    const std::size_t b = background.rows();
    if (b == 0) throw InvalidInputError("exact_shapley: empty background");

    // v(S) for every coalition mask.
    const std::size_t n_masks = std::size_t{1} << d;
    std::vector<double> v(n_masks, 0.0);
    Matrix composite = background;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        composite = background;
        for (std::size_t j = 0; j < d; ++j)
            if (mask & (std::size_t{1} << j))
                for (std::size_t i = 0; i < b; ++i) composite(i, j) = x[j];
        v[mask] = background_mean_score(score, composite);
    }

    // w(s) = s! (d-1-s)! / d!
    std::vector<double> w(d, 0.0);
    for (std::size_t s = 0; s < d; ++s) {
        double lw = 0.0;
        for (std::size_t i = 2; i <= s; ++i) lw += std::log(static_cast<double>(i));
        for (std::size_t i = 2; i <= d - 1 - s; ++i) lw += std::log(static_cast<double>(i));
        for (std::size_t i = 2; i <= d; ++i) lw -= std::log(static_cast<double>(i));
        w[s] = std::exp(lw);
    }

    AttributionVector out;
    out.basis = AttributionBasis::exact;
    out.eval_count = n_masks * b;
    out.phi.assign(d, 0.0);
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t j = 0; j < d; ++j) {
            if (mask & (std::size_t{1} << j)) continue;
            out.phi[j] += w[s] * (v[mask | (std::size_t{1} << j)] - v[mask]);
        }
    }
    return out;
}

AttributionVector mc_shapley(const ScoreFn& score, std::span<const double> x,
                             const Matrix& background, int n_perms, std::uint64_t seed) {
    if (n_perms < 1) throw InvalidInputError("mc_shapley: need n_perms >= 1");
    const std::size_t d = x.size();
    if (background.cols() != d) throw ShapeError("mc_shapley: background width mismatch");
    Rng rng(seed);

    AttributionVector out;
    out.basis = AttributionBasis::montecarlo;
    out.phi.assign(d, 0.0);
    std::vector<std::size_t> perm(d);
    for (std::size_t j = 0; j < d; ++j) perm[j] = j;

    Matrix composite = background;
    for (int p = 0; p < n_perms; ++p) {
        rng.shuffle(perm);
        composite = background;
        double v_prev = background_mean_score(score, composite);
        for (std::size_t j : perm) {
            for (std::size_t i = 0; i < composite.rows(); ++i) composite(i, j) = x[j];
            const double v_cur = background_mean_score(score, composite);
            out.phi[j] += v_cur - v_prev;
            v_prev = v_cur;
        }
    }
    for (double& p : out.phi) p /= static_cast<double>(n_perms);
    out.eval_count = static_cast<std::size_t>(n_perms) * (d + 1) * background.rows();
    return out;
}

AttributionVector path_attribution(const DiffScorer& scorer, std::span<const double> x,
                                   const Matrix& background, int m_steps) {
    const std::size_t d = x.size();
    if (background.cols() != d) throw ShapeError("path_attribution: background width mismatch");
    if (m_steps < 1) throw InvalidInputError("path_attribution: need m_steps >= 1");
    const std::size_t b = background.rows();

    AttributionVector out;
    out.basis = AttributionBasis::gradient_path;
    out.phi.assign(d, 0.0);
    std::vector<double> point(d);
    for (std::size_t i = 0; i < b; ++i) {
        std::span<const double> x0 = background.row(i);
        std::vector<double> grad_sum(d, 0.0);
        for (int k = 0; k < m_steps; ++k) {
            const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(m_steps);
            for (std::size_t j = 0; j < d; ++j) point[j] = x0[j] + t * (x[j] - x0[j]);
            const std::vector<double> g = scorer.grad(point);
            for (std::size_t j = 0; j < d; ++j) grad_sum[j] += g[j];
        }
        for (std::size_t j = 0; j < d; ++j)
            out.phi[j] += (x[j] - x0[j]) * grad_sum[j] / static_cast<double>(m_steps);
    }
    for (double& p : out.phi) p /= static_cast<double>(b);
    out.eval_count = b * static_cast<std::size_t>(m_steps);
    return out;
}

AttributionVector path_attribution(const MlpModel& model, std::span<const double> x, int y,
                                   const Matrix& background, int m_steps) {
    const std::size_t d = x.size();
    if (background.cols() != d) throw ShapeError("path_attribution: background width mismatch");
    if (m_steps < 1) throw InvalidInputError("path_attribution: need m_steps >= 1");
    const std::size_t b = background.rows();
    const std::size_t m = static_cast<std::size_t>(m_steps);

    // All b*m path points in one batched backward pass.
    Matrix points(b * m, d);
    for (std::size_t i = 0; i < b; ++i) {
        std::span<const double> x0 = background.row(i);
        for (std::size_t k = 0; k < m; ++k) {
            const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
            double* row = points.row(i * m + k).data();
            for (std::size_t j = 0; j < d; ++j) row[j] = x0[j] + t * (x[j] - x0[j]);
        }
    }
    const std::vector<int> ys(b * m, y);
    const Matrix grads = score_input_gradients(model, points, ys);

    AttributionVector out;
    out.basis = AttributionBasis::gradient_path;
    out.phi.assign(d, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        std::span<const double> x0 = background.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            double gsum = 0.0;
            for (std::size_t k = 0; k < m; ++k) gsum += grads(i * m + k, j);
            out.phi[j] += (x[j] - x0[j]) * gsum / static_cast<double>(m);
        }
    }
    for (double& p : out.phi) p /= static_cast<double>(b);
    out.eval_count = b * m;
    return out;
}

AttributionVector model_importance(const MlpModel& model, const Dataset& eval_samples,
                                   const BackgroundSet& background, int m_steps) {
    if (eval_samples.size() == 0) throw InvalidInputError("model_importance: empty eval set");
    AttributionVector out;
    out.basis = AttributionBasis::gradient_path;
    out.phi.assign(eval_samples.dim(), 0.0);
    for (std::size_t i = 0; i < eval_samples.size(); ++i) {
        const AttributionVector a = path_attribution(model, eval_samples.X.row(i),
                                                     eval_samples.y[i], background.samples,
                                                     m_steps);
        for (std::size_t j = 0; j < out.phi.size(); ++j) out.phi[j] += std::abs(a.phi[j]);
        out.eval_count += a.eval_count;
    }
    for (double& p : out.phi) p /= static_cast<double>(eval_samples.size());
    // Unit L2 scaling: stability compares importance profiles, not raw
    // attribution magnitudes, which track model confidence rather than
    // feature use. A zero vector stays zero.
    double norm = 0.0;
    for (double p : out.phi) norm += p * p;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& p : out.phi) p /= norm;
    return out;
}

StabilityScore stability_score(const std::vector<double>& phi_i,
                               const std::vector<double>& phi_ref, double eps, int agent_id) {
    if (phi_i.size() != phi_ref.size()) throw ShapeError("stability_score: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < phi_i.size(); ++j) {
        const double d = phi_i[j] - phi_ref[j];
        num += d * d;
        den += phi_ref[j] * phi_ref[j];
    }
    StabilityScore sc;
    sc.agent_id = agent_id;
    sc.s = 1.0 - std::sqrt(num) / (std::sqrt(den) + eps);
    return sc;
}

CohortStats cohort_threshold(const std::vector<double>& scores) {
    if (scores.size() < 2) throw InvalidInputError("cohort_threshold: need at least 2 scores");
    CohortStats st;
    for (double s : scores) st.mu += s;
    st.mu /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - st.mu) * (s - st.mu);
    var /= static_cast<double>(scores.size());
    st.sigma = std::sqrt(var);
    st.threshold = st.mu - 2.0 * st.sigma;
    return st;
}

}  // namespace ztafl
