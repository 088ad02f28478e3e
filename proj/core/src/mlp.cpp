#include "ztafl/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "ztafl/errors.hpp"

namespace ztafl {

namespace {

struct LayerView {
    const double* w;  // fan_in x fan_out, row-major
    const double* b;  // fan_out
    int fan_in;
    int fan_out;
};

std::vector<LayerView> layer_views(const MlpModel& model) {
    std::vector<LayerView> views;
    const double* p = model.params.values.data();
    for (std::size_t k = 0; k + 1 < model.layer_dims.size(); ++k) {
        LayerView v;
        v.fan_in = model.layer_dims[k];
        v.fan_out = model.layer_dims[k + 1];
        v.w = p;
        p += static_cast<std::size_t>(v.fan_in) * v.fan_out;
        v.b = p;
        p += v.fan_out;
        views.push_back(v);
    }
    return views;
}

void check_model(const MlpModel& model) {
    if (model.layer_dims.size() < 2) throw InvalidInputError("mlp: need at least 2 layer dims");
    for (int d : model.layer_dims)
        if (d <= 0) throw InvalidInputError("mlp: layer dims must be positive");
    if (model.params.values.size() != param_count(model.layer_dims))
        throw ShapeError("mlp: params length does not match layer dims");
}

void check_batch(const MlpModel& model, const Matrix& X) {
    if (X.rows() == 0) throw InvalidInputError("mlp: empty batch");
    if (X.cols() != static_cast<std::size_t>(model.input_dim()))
        throw ShapeError("mlp: input width does not match layer_dims[0]");
    if (!X.all_finite()) throw NumericError("mlp: non-finite input");
}

void check_labels(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    if (y.size() != X.rows()) throw ShapeError("mlp: label count does not match batch");
    for (int c : y)
        if (c < 0 || c >= model.num_classes())
            throw InvalidInputError("mlp: label out of [0, C)");
}

// Z = A * W + b (Z preallocated n x fan_out).
void affine(const Matrix& a, const LayerView& l, Matrix& z) {
    const std::size_t n = a.rows();
    z = Matrix(n, static_cast<std::size_t>(l.fan_out));
    for (std::size_t i = 0; i < n; ++i) {
        double* zr = z.data().data() + i * l.fan_out;
        for (int j = 0; j < l.fan_out; ++j) zr[j] = l.b[j];
        const double* ar = a.data().data() + i * l.fan_in;
        for (int p = 0; p < l.fan_in; ++p) {
            const double av = ar[p];
            if (av == 0.0) continue;
            const double* wr = l.w + static_cast<std::size_t>(p) * l.fan_out;
            for (int j = 0; j < l.fan_out; ++j) zr[j] += av * wr[j];
        }
    }
}

void relu_inplace(Matrix& z) {
    for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
}

void softmax_rows_inplace(Matrix& z) {
    const std::size_t n = z.rows(), c = z.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* r = z.data().data() + i * c;
        double mx = r[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < c; ++j) r[j] /= sum;
    }
}

struct ForwardCache {
    // acts[0] = X, acts[k] = post-activation output of layer k (k >= 1;
    // the last entry holds logits before softmax is applied in-place).
    std::vector<Matrix> acts;
};

void forward_cached(const MlpModel& model, const Matrix& X, ForwardCache& cache,
                    const std::vector<LayerView>& views) {
    cache.acts.assign(views.size() + 1, Matrix());
    cache.acts[0] = X;
    for (std::size_t k = 0; k < views.size(); ++k) {
        affine(cache.acts[k], views[k], cache.acts[k + 1]);
        if (k + 1 < views.size()) relu_inplace(cache.acts[k + 1]);
    }
}

// Backpropagates dlogits through the cached forward pass. Fills param_grad
// (same layout as params) when non-null and input_grad (n x d) when non-null.
void backprop(const MlpModel& model, const std::vector<LayerView>& views,
              const ForwardCache& cache, Matrix dlogits, ParamVector* param_grad,
              Matrix* input_grad) {
    const std::size_t L = views.size();
    std::vector<double>* g = nullptr;
    if (param_grad) {
        *param_grad = zeros_like(model.params);
        g = &param_grad->values;
    }
    // Offsets of each layer's weight block in the flat vector.
    std::vector<std::size_t> w_off(L), b_off(L);
    {
        std::size_t off = 0;
        for (std::size_t k = 0; k < L; ++k) {
            w_off[k] = off;
            off += static_cast<std::size_t>(views[k].fan_in) * views[k].fan_out;
            b_off[k] = off;
            off += views[k].fan_out;
        }
    }

    Matrix delta = std::move(dlogits);  // n x fan_out of current layer
    for (std::size_t k = L; k-- > 0;) {
        const LayerView& l = views[k];
        const Matrix& a = cache.acts[k];  // n x fan_in
        const std::size_t n = a.rows();
        if (g) {
            double* gw = g->data() + w_off[k];
            double* gb = g->data() + b_off[k];
            for (std::size_t i = 0; i < n; ++i) {
                const double* ar = a.data().data() + i * l.fan_in;
                const double* dr = delta.data().data() + i * l.fan_out;
                for (int p = 0; p < l.fan_in; ++p) {
                    const double av = ar[p];
                    if (av == 0.0) continue;
                    double* grow = gw + static_cast<std::size_t>(p) * l.fan_out;
                    for (int j = 0; j < l.fan_out; ++j) grow[j] += av * dr[j];
                }
                for (int j = 0; j < l.fan_out; ++j) gb[j] += dr[j];
            }
        }
        const bool need_da = (k > 0) || (input_grad != nullptr);
        if (!need_da) break;
        Matrix da(delta.rows(), static_cast<std::size_t>(l.fan_in));
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            const double* dr = delta.data().data() + i * l.fan_out;
            double* dar = da.data().data() + i * l.fan_in;
            for (int p = 0; p < l.fan_in; ++p) {
                const double* wr = l.w + static_cast<std::size_t>(p) * l.fan_out;
                double s = 0.0;
                for (int j = 0; j < l.fan_out; ++j) s += wr[j] * dr[j];
                dar[p] = s;
            }
        }
        if (k > 0) {
            // Gate through the rectifier of the previous layer.
            const Matrix& hidden = cache.acts[k];
            for (std::size_t i = 0; i < da.data().size(); ++i)
                if (hidden.data()[i] <= 0.0) da.data()[i] = 0.0;
        }
        delta = std::move(da);
        if (k == 0 && input_grad) *input_grad = std::move(delta);
    }
}

}  // namespace

MlpModel make_mlp(std::vector<int> layer_dims) {
    MlpModel m;
    m.layer_dims = std::move(layer_dims);
    m.params.shape_tag = m.layer_dims;
    m.params.values.assign(param_count(m.layer_dims), 0.0);
    check_model(m);
    return m;
}

MlpModel init_mlp(std::vector<int> layer_dims, Rng& rng) {
    MlpModel m = make_mlp(std::move(layer_dims));
    double* p = m.params.values.data();
    for (std::size_t k = 0; k + 1 < m.layer_dims.size(); ++k) {
        const int fan_in = m.layer_dims[k], fan_out = m.layer_dims[k + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (int i = 0; i < fan_in * fan_out; ++i) *p++ = rng.uniform(-bound, bound);
        p += fan_out;  // biases stay 0
    }
    return m;
}

Matrix forward(const MlpModel& model, const Matrix& X) {
    check_model(model);
    check_batch(model, X);
    const auto views = layer_views(model);
    ForwardCache cache;
    forward_cached(model, X, cache, views);
    Matrix probs = std::move(cache.acts.back());
    softmax_rows_inplace(probs);
    return probs;
}

std::vector<double> forward_one(const MlpModel& model, std::span<const double> x) {
    Matrix X(1, x.size());
    std::copy(x.begin(), x.end(), X.data().begin());
    Matrix p = forward(model, X);
    return p.data();
}

LossGrad loss_and_grad(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    check_model(model);
    check_batch(model, X);
    check_labels(model, X, y);
    const auto views = layer_views(model);
    ForwardCache cache;
    forward_cached(model, X, cache, views);

    const std::size_t n = X.rows();
    const std::size_t C = static_cast<std::size_t>(model.num_classes());
    const Matrix& logits = cache.acts.back();

    // Loss via log-sum-exp; dlogits = (softmax - onehot) / n.
    double loss = 0.0;
    Matrix dlogits(n, C);
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.data().data() + i * C;
        double mx = z[0];
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < C; ++j) sum += std::exp(z[j] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - z[y[i]];
        double* dr = dlogits.data().data() + i * C;
        for (std::size_t j = 0; j < C; ++j) dr[j] = std::exp(z[j] - lse) / static_cast<double>(n);
        dr[y[i]] -= 1.0 / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);

    LossGrad out;
    out.loss = loss;
    backprop(model, views, cache, std::move(dlogits), &out.grad, nullptr);
    return out;
}

double cross_entropy(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    check_model(model);
    check_batch(model, X);
    check_labels(model, X, y);
    const auto views = layer_views(model);
    ForwardCache cache;
    forward_cached(model, X, cache, views);
    const std::size_t n = X.rows();
    const std::size_t C = static_cast<std::size_t>(model.num_classes());
    const Matrix& logits = cache.acts.back();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.data().data() + i * C;
        double mx = z[0];
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < C; ++j) sum += std::exp(z[j] - mx);
        loss += mx + std::log(sum) - z[y[i]];
    }
    return loss / static_cast<double>(n);
}

std::vector<double> input_gradient(const MlpModel& model, std::span<const double> x, int y) {
    Matrix X(1, x.size());
    std::copy(x.begin(), x.end(), X.data().begin());
    check_model(model);
    check_batch(model, X);
    check_labels(model, X, {y});
    const auto views = layer_views(model);
    ForwardCache cache;
    forward_cached(model, X, cache, views);
    const std::size_t C = static_cast<std::size_t>(model.num_classes());
    const double* z = cache.acts.back().data().data();
    double mx = z[0];
    for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < C; ++j) sum += std::exp(z[j] - mx);
    const double lse = mx + std::log(sum);
    Matrix dlogits(1, C);
    for (std::size_t j = 0; j < C; ++j) dlogits.data()[j] = std::exp(z[j] - lse);
    dlogits.data()[static_cast<std::size_t>(y)] -= 1.0;
    Matrix input_grad;
    backprop(model, views, cache, std::move(dlogits), nullptr, &input_grad);
    return input_grad.data();
}

Matrix score_input_gradients(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    check_model(model);
    check_batch(model, X);
    check_labels(model, X, y);
    const auto views = layer_views(model);
    ForwardCache cache;
    forward_cached(model, X, cache, views);
    const std::size_t n = X.rows();
    const std::size_t C = static_cast<std::size_t>(model.num_classes());
    Matrix probs = cache.acts.back();
    softmax_rows_inplace(probs);
    // d p_y / d logit_j = p_y * (delta_{jy} - p_j)
    Matrix dlogits(n, C);
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = probs.data().data() + i * C;
        double* dr = dlogits.data().data() + i * C;
        const double py = p[y[i]];
        for (std::size_t j = 0; j < C; ++j) dr[j] = -py * p[j];
        dr[y[i]] += py;
    }
    Matrix input_grad;
    backprop(model, views, cache, std::move(dlogits), nullptr, &input_grad);
    return input_grad;
}

AdamState make_adam(std::size_t n_params, double lr) {
    AdamState st;
    st.m.assign(n_params, 0.0);
    st.v.assign(n_params, 0.0);
    st.lr = lr;
    return st;
}

void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state) {
    if (params.values.size() != grad.values.size() || params.values.size() != state.m.size())
        throw ShapeError("adam_step: size mismatch");
    if (!grad.all_finite()) throw NumericError("adam_step: non-finite gradient");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double g = grad.values[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params.values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

void train_one_epoch(MlpModel& model, AdamState& adam, const Matrix& X,
                     const std::vector<int>& y, const std::vector<std::size_t>& order,
                     int batch_size) {
    const std::size_t n = order.size();
    const std::size_t d = X.cols();
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t bn = std::min<std::size_t>(batch_size, n - start);
        Matrix bx(bn, d);
        std::vector<int> by(bn);
        for (std::size_t i = 0; i < bn; ++i) {
            const std::size_t src = order[start + i];
            std::copy(X.row(src).begin(), X.row(src).end(), bx.row(i).begin());
            by[i] = y[src];
        }
        LossGrad lg = loss_and_grad(model, bx, by);
        adam_step(model.params, lg.grad, adam);
    }
}

MlpModel local_train(const MlpModel& model, const Matrix& X, const std::vector<int>& y,
                     const TrainOptions& opts, std::uint64_t seed) {
    if (X.rows() == 0) throw InvalidInputError("local_train: empty shard");
    if (y.size() != X.rows()) throw ShapeError("local_train: label count mismatch");
    MlpModel trained = model;
    AdamState adam = make_adam(model.params.size(), opts.lr);
    Rng rng(seed);
    std::vector<std::size_t> order(X.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < opts.epochs; ++e) {
        rng.shuffle(order);
        train_one_epoch(trained, adam, X, y, order, opts.batch_size);
    }
    return trained;
}

}  // namespace ztafl
