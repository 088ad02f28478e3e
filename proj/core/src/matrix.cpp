#include "ztafl/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace ztafl {

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
    out = Matrix(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out.data().data() + i * m;
        const double* ar = a.data().data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ar[p];
            if (av == 0.0) continue;
            const double* br = b.data().data() + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
}

void matmul_bt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_bt: inner dims differ");
    out = Matrix(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ar = a.data().data() + i * k;
        double* o = out.data().data() + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const double* br = b.data().data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            o[j] = s;
        }
    }
}

void matmul_at(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_at: inner dims differ");
    out = Matrix(a.cols(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ar = a.data().data() + i * k;
        const double* br = b.data().data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ar[p];
            if (av == 0.0) continue;
            double* o = out.data().data() + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
}

}  // namespace ztafl
