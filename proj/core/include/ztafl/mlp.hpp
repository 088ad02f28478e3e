#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ztafl/matrix.hpp"
#include "ztafl/param_vector.hpp"
#include "ztafl/rng.hpp"

namespace ztafl {

// Multilayer perceptron: rectifier hidden layers, softmax output.
// Parameters are stored flat, per layer: weight matrix (fan_in x fan_out,
// row-major) followed by the bias row.
struct MlpModel {
    std::vector<int> layer_dims;  // first = input features, last = classes
    ParamVector params;

    int input_dim() const { return layer_dims.front(); }
    int num_classes() const { return layer_dims.back(); }
    std::size_t num_layers() const { return layer_dims.size() - 1; }
};

// Zero-initialized model (useful for tests and as a shape template).
MlpModel make_mlp(std::vector<int> layer_dims);

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
MlpModel init_mlp(std::vector<int> layer_dims, Rng& rng);

// Batch forward pass; returns an n x C matrix of softmax rows.
Matrix forward(const MlpModel& model, const Matrix& X);

// Class probabilities for a single sample.
std::vector<double> forward_one(const MlpModel& model, std::span<const double> x);

struct LossGrad {
    double loss = 0.0;  // mean cross-entropy over the batch
    ParamVector grad;   // same shape as model params
};

// Mean cross-entropy and its gradient w.r.t. the parameters.
LossGrad loss_and_grad(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

// Mean cross-entropy alone (log-sum-exp form).
double cross_entropy(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

// Gradient of the single-sample cross-entropy w.r.t. the input.
std::vector<double> input_gradient(const MlpModel& model, std::span<const double> x, int y);

// Rows of d p_{y_i} / d x for a batch; the workhorse of path attribution.
Matrix score_input_gradients(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(std::size_t n_params, double lr = 1e-3);

// One bias-corrected Adam update; increments state.step.
void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state);

struct TrainOptions {
    int epochs = 5;
    int batch_size = 128;
    double lr = 1e-3;
};

// Trains a copy of the model on the shard. Pure function of
// (model, X, y, opts, seed); the shuffle order is fixed by the seed.
MlpModel local_train(const MlpModel& model, const Matrix& X, const std::vector<int>& y,
                     const TrainOptions& opts, std::uint64_t seed);

// One pass over the samples in `order`, minibatched. Shared by local_train
// and the adversarial-training wrapper.
void train_one_epoch(MlpModel& model, AdamState& adam, const Matrix& X,
                     const std::vector<int>& y, const std::vector<std::size_t>& order,
                     int batch_size);

}  // namespace ztafl
