#pragma once

#include <vector>

#include "ztafl/matrix.hpp"
#include "ztafl/mlp.hpp"

namespace ztafl {

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::vector<long>> confusion;  // [true][predicted]
    std::vector<double> per_class_f1;
    double macro_f1 = 0.0;
};

// Predicted class per row (first index wins ties).
std::vector<int> predict(const MlpModel& model, const Matrix& X);

EvalResult evaluate(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

double accuracy(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

// Metrics from a prebuilt confusion matrix (used by tests and robust eval).
EvalResult metrics_from_confusion(const std::vector<std::vector<long>>& confusion);

}  // namespace ztafl
