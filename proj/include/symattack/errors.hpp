#pragma once

#include <stdexcept>
#include <string>

namespace symattack {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when the first layer has full column rank: ker(W) = {0}, the
// symmetry group is trivial and no attack generator exists.
struct TrivialSymmetryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a generator degenerates (zero kernel projection, zero
// direction) even though the kernel itself is nontrivial.
struct DegenerateGeneratorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedVersionError : ParseError {
    using ParseError::ParseError;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace symattack
