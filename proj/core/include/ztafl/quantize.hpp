#pragma once

#include <cstdint>
#include <vector>

#include "ztafl/param_vector.hpp"

namespace ztafl {

// Affine 8-bit encoding of a parameter delta: value = zero_point + scale*code.
struct QuantizedUpdate {
    std::vector<std::uint8_t> codes;
    double scale = 0.0;
    double zero_point = 0.0;
    std::vector<int> shape_tag;

    std::size_t length() const { return codes.size(); }

    // Codes plus the two 8-byte reals.
    std::uint64_t payload_bytes() const { return codes.size() + 16; }
};

// scale = (max-min)/255, zero_point = min, codes rounded half-even.
// A constant vector maps to scale 0 with all codes 0.
QuantizedUpdate quantize(const ParamVector& delta);

ParamVector dequantize(const QuantizedUpdate& q);

// Wire size with the 8-byte length prefix.
std::uint64_t quant_wire_bytes(std::size_t n_values);

}  // namespace ztafl
