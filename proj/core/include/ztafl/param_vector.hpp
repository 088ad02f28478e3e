#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ztafl {

// Flat model parameters plus the layer-dims descriptor they belong to.
// The unit of exchange between agents, fogs, and the cloud.
struct ParamVector {
    std::vector<double> values;
    std::vector<int> shape_tag;  // layer dims, e.g. {40, 64, 32, 6}

    std::size_t size() const { return values.size(); }

    bool all_finite() const;
    bool same_shape(const ParamVector& other) const { return shape_tag == other.shape_tag; }

    // Elementwise arithmetic; throws ShapeError on shape_tag mismatch.
    ParamVector& operator+=(const ParamVector& rhs);
    ParamVector& operator-=(const ParamVector& rhs);
    ParamVector& operator*=(double s);

    friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
    friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
    friend ParamVector operator*(ParamVector a, double s) { return a *= s; }
    friend ParamVector operator*(double s, ParamVector a) { return a *= s; }

    bool operator==(const ParamVector&) const = default;
};

double l2_norm(const std::vector<double>& v);
double l2_norm(const ParamVector& v);
double l2_distance(const ParamVector& a, const ParamVector& b);
double dot(const ParamVector& a, const ParamVector& b);

// Zero vector with the same shape as the template.
ParamVector zeros_like(const ParamVector& shape);

// Expected parameter count for a layer-dims list: sum (dims[k]+1)*dims[k+1].
std::size_t param_count(const std::vector<int>& layer_dims);

// Wire sizes used for byte accounting (values carried as 32-bit reals with an
// 8-byte length prefix).
std::uint64_t param_wire_bytes(std::size_t n_values);

}  // namespace ztafl
