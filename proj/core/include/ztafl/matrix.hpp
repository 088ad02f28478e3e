#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ztafl {

// Dense row-major matrix of doubles. Just enough linear algebra for an MLP.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = a * b. Shapes (n x k) * (k x m) -> (n x m).
void matmul(const Matrix& a, const Matrix& b, Matrix& out);

// out = a * b^T. Shapes (n x k) * (m x k) -> (n x m).
void matmul_bt(const Matrix& a, const Matrix& b, Matrix& out);

// out = a^T * b. Shapes (n x k) * (n x m) -> (k x m).
void matmul_at(const Matrix& a, const Matrix& b, Matrix& out);

}  // namespace ztafl
