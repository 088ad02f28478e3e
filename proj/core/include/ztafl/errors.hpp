#pragma once

#include <stdexcept>
#include <string>

namespace ztafl {

// Dimension / shape-tag mismatch between operands.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Argument violates a documented precondition (empty batch, bad range, ...).
struct InvalidInputError : std::invalid_argument {
    explicit InvalidInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation applied to an object in the wrong state (e.g. quarantine step on
// an active agent).
struct InvalidStateError : std::logic_error {
    explicit InvalidStateError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace ztafl
