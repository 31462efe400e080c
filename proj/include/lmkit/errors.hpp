#pragma once

#include <stdexcept>
#include <string>

namespace lmkit {

// Base for everything the toolkit throws on purpose. Each subclass maps to
// one failure category so callers (and the CLI exit-code mapping) can
// dispatch on type instead of parsing messages.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor extents do not line up (matmul inner dims, elementwise shapes, ...).
struct ShapeError : Error {
    using Error::Error;
};

// A token id / class index is outside the valid range.
struct IndexError : Error {
    using Error::Error;
};

// A sequence does not fit the model context.
struct LengthError : Error {
    using Error::Error;
};

// Bad configuration value or unknown target name.
struct ConfigError : Error {
    using Error::Error;
};

// An on-disk artifact (dataset, tokenizer, checkpoint) violates its contract.
struct FormatError : Error {
    using Error::Error;
};

// Checkpoint was written by an incompatible config or format version.
struct VersionError : Error {
    using Error::Error;
};

// Operation is invalid in the object's current state (e.g. merge without adapters).
struct StateError : Error {
    using Error::Error;
};

// Input is structurally valid but empty/degenerate (empty corpus, all-false mask).
struct DegenerateInputError : Error {
    using Error::Error;
};

// An entry being added collides with one that already exists.
struct ConflictError : Error {
    using Error::Error;
};

// NaN/Inf detected, or training aborted on a non-finite gradient.
struct NumericError : Error {
    using Error::Error;
};

// API misuse that the type system cannot express (e.g. backward on a non-scalar).
struct ContractError : Error {
    using Error::Error;
};

}  // namespace lmkit
