#include "ztafl/param_vector.hpp"

#include <cmath>

#include "ztafl/errors.hpp"

namespace ztafl {

bool ParamVector::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {
void check_shapes(const ParamVector& a, const ParamVector& b) {
    if (!a.same_shape(b) || a.values.size() != b.values.size())
        throw ShapeError("ParamVector: shape_tag mismatch in arithmetic");
}
}  // namespace

ParamVector& ParamVector::operator+=(const ParamVector& rhs) {
    check_shapes(*this, rhs);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += rhs.values[i];
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& rhs) {
    check_shapes(*this, rhs);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= rhs.values[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
}

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double l2_norm(const ParamVector& v) { return l2_norm(v.values); }

double l2_distance(const ParamVector& a, const ParamVector& b) {
    check_shapes(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double dot(const ParamVector& a, const ParamVector& b) {
    check_shapes(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

ParamVector zeros_like(const ParamVector& shape) {
    ParamVector out;
    out.shape_tag = shape.shape_tag;
    out.values.assign(shape.values.size(), 0.0);
    return out;
}

std::size_t param_count(const std::vector<int>& layer_dims) {
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k)
        n += static_cast<std::size_t>(layer_dims[k] + 1) * static_cast<std::size_t>(layer_dims[k + 1]);
    return n;
}

std::uint64_t param_wire_bytes(std::size_t n_values) {
    return 8 + 4ULL * n_values;
}

}  // namespace ztafl
