#pragma once

#include <stdexcept>
#include <string>

namespace einfact {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed model string, flag value or other textual input.
struct ParseError : Error {
    using Error::Error;
};

/// Shapes, bindings and operand lists that do not agree with each other.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration, e.g. a loss with no multiplicative update.
struct ConfigError : Error {
    using Error::Error;
};

/// A loss evaluated outside of its domain (x = 0 under a log term, ...).
struct DomainError : Error {
    using Error::Error;
};

/// File format or filesystem failures.
struct IoError : Error {
    using Error::Error;
};

} // namespace einfact
