#pragma once

#include <stdexcept>
#include <string>

namespace skyfuse {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor/matrix shapes or violated structural contracts.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration or argument values.
struct ValueError : Error {
    using Error::Error;
};

/// Malformed file contents (bad magic, truncated payload, unparseable text).
struct FormatError : Error {
    using Error::Error;
};

/// Filesystem-level failures (missing paths, unwritable destinations).
struct IoError : Error {
    using Error::Error;
};

/// Non-finite values where the numeric contract requires finite ones.
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace skyfuse
