#include "ztafl/metrics.hpp"

#include "ztafl/errors.hpp"

namespace ztafl {

std::vector<int> predict(const MlpModel& model, const Matrix& X) {
    const Matrix probs = forward(model, X);
    std::vector<int> preds(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const double* r = probs.data().data() + i * probs.cols();
        int best = 0;
        for (std::size_t j = 1; j < probs.cols(); ++j)
            if (r[j] > r[best]) best = static_cast<int>(j);
        preds[i] = best;
    }
    return preds;
}

EvalResult metrics_from_confusion(const std::vector<std::vector<long>>& confusion) {
    const std::size_t C = confusion.size();
    EvalResult res;
    res.confusion = confusion;
    long total = 0, correct = 0;
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            total += confusion[i][j];
            if (i == j) correct += confusion[i][j];
        }
    if (total == 0) throw InvalidInputError("metrics: empty confusion matrix");
    res.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    res.per_class_f1.resize(C, 0.0);
    double f1_sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        long tp = confusion[c][c], fp = 0, fn = 0;
        for (std::size_t i = 0; i < C; ++i) {
            if (i != c) {
                fp += confusion[i][c];
                fn += confusion[c][i];
            }
        }
        const long denom = 2 * tp + fp + fn;
        res.per_class_f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
        f1_sum += res.per_class_f1[c];
    }
    res.macro_f1 = f1_sum / static_cast<double>(C);
    return res;
}

EvalResult evaluate(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    if (X.rows() == 0) throw InvalidInputError("evaluate: empty dataset");
    const std::vector<int> preds = predict(model, X);
    const std::size_t C = static_cast<std::size_t>(model.num_classes());
    std::vector<std::vector<long>> confusion(C, std::vector<long>(C, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) confusion[y[i]][preds[i]] += 1;
    return metrics_from_confusion(confusion);
}

double accuracy(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    const std::vector<int> preds = predict(model, X);
    long correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace ztafl
