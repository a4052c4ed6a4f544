#pragma once

#include <stdexcept>
#include <string>

namespace acs {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between tensors, buffers, or prob vectors.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid static configuration (bit widths, fractions, intervals, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Operation attempted in a state that does not admit it (uncalibrated
// quantizer, stale forward trace, missing teacher, ...).
struct StateError : Error {
    using Error::Error;
};

// Malformed caller-supplied values (ids out of range, empty sets, ...).
struct InputError : Error {
    using Error::Error;
};

// Unparseable or corrupt on-disk payload. Messages name the byte offset
// of the first offending field where one exists.
struct FormatError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of a function.
struct DomainError : Error {
    using Error::Error;
};

// A training or experiment run failed mid-flight (divergence, child
// process of a sweep, ...).
struct RunError : Error {
    using Error::Error;
};

} // namespace acs
