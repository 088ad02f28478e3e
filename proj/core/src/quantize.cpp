#include "ztafl/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "ztafl/errors.hpp"

namespace ztafl {

namespace {

// Explicit banker's rounding; independent of the ambient fenv mode.
double round_half_even(double x) {
    const double fl = std::floor(x);
    const double diff = x - fl;
    if (diff > 0.5) return fl + 1.0;
    if (diff < 0.5) return fl;
    return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

}  // namespace

QuantizedUpdate quantize(const ParamVector& delta) {
    if (delta.values.empty()) throw InvalidInputError("quantize: empty vector");
    if (!delta.all_finite()) throw NumericError("quantize: non-finite values");

    const auto [mn_it, mx_it] = std::minmax_element(delta.values.begin(), delta.values.end());
    const double mn = *mn_it, mx = *mx_it;

    QuantizedUpdate q;
    q.shape_tag = delta.shape_tag;
    q.zero_point = mn;
    q.scale = (mx - mn) / 255.0;
    q.codes.resize(delta.values.size());
    if (q.scale == 0.0) {
        std::fill(q.codes.begin(), q.codes.end(), std::uint8_t{0});
        return q;
    }
    for (std::size_t i = 0; i < delta.values.size(); ++i) {
        double c = round_half_even((delta.values[i] - mn) / q.scale);
        c = std::clamp(c, 0.0, 255.0);
        q.codes[i] = static_cast<std::uint8_t>(c);
    }
    return q;
}

ParamVector dequantize(const QuantizedUpdate& q) {
    if (q.codes.empty()) throw InvalidInputError("dequantize: empty update");
    ParamVector out;
    out.shape_tag = q.shape_tag;
    out.values.resize(q.codes.size());
    for (std::size_t i = 0; i < q.codes.size(); ++i)
        out.values[i] = q.zero_point + q.scale * static_cast<double>(q.codes[i]);
    return out;
}

std::uint64_t quant_wire_bytes(std::size_t n_values) {
    return 8 + n_values + 16;
}

}  // namespace ztafl
