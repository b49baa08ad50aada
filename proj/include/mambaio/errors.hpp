#pragma once

#include <stdexcept>
#include <string>

namespace mambaio {

// Base for everything thrown by the library. The CLI maps subclasses to
// exit codes: ConfigError/ParseError -> 2, DataError -> 3, the rest -> 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad flags, bad config values, bad generator parameters.
struct ConfigError : Error {
    using Error::Error;
};

// A file that cannot be read at all (truncated, wrong column count, ...).
struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};

// A file that parses but fails semantic validation (non-monotone time, ...).
struct DataError : Error {
    using Error::Error;
};

// Mismatched tensor shapes between operands.
struct ShapeError : Error {
    using Error::Error;
};

// A precondition stated by an operation's contract was violated.
struct ContractError : Error {
    using Error::Error;
};

// Non-finite values encountered during computation.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace mambaio
