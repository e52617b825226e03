#pragma once

#include <stdexcept>
#include <string>

namespace glvl {

// Error taxonomy; the CLI maps these onto stable exit codes
// (2 usage/input, 3 compatibility, 4 internal invariant).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad coordinates, out-of-bounds access.
struct RangeError : Error {
    using Error::Error;
};

// Invalid configuration values (tile_size > map, unknown provider, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed files: bad magic, wrong dtype, wrong rank.
struct FormatError : Error {
    using Error::Error;
};

// Dimension / length mismatches between otherwise valid inputs.
struct ShapeError : Error {
    using Error::Error;
};

// Mathematically invalid values (negative where nonnegative required,
// non-finite logits, labels out of range).
struct DomainError : Error {
    using Error::Error;
};

// Degenerate numerical situations: zero vectors, collinear point sets,
// non-invertible homographies, projection at infinity.
struct DegenerateError : Error {
    using Error::Error;
};

// Fingerprint mismatches between artifacts built with different configs.
struct CompatError : Error {
    using Error::Error;
};

// A metric that is undefined on the given inputs (e.g. ALE with no
// successfully localized frames).
struct MetricError : Error {
    using Error::Error;
};

}  // namespace glvl
