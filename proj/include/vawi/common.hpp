#pragma once

#include <stdexcept>
#include <string>

namespace vawi {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// map failures to exit codes (config/usage -> 1, runtime/numeric -> 2).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between tensors (reported with both shapes).
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration value or combination.
struct ConfigError : Error {
    using Error::Error;
};

// Precondition violation on an operation (e.g. backward on a non-scalar).
struct ContractError : Error {
    using Error::Error;
};

// Unrecognized or corrupted file header.
struct FormatError : Error {
    using Error::Error;
};

// File ends mid-record or carries trailing garbage.
struct IntegrityError : Error {
    using Error::Error;
};

// Malformed input data (JSONL lines, lexicon entries).
struct ParseError : Error {
    using Error::Error;
};

// Sequence exceeds a configured maximum length.
struct LengthError : Error {
    using Error::Error;
};

// Non-finite value where finiteness is guaranteed (e.g. NaN loss).
struct NumericError : Error {
    using Error::Error;
};

} // namespace vawi
