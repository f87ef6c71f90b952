#pragma once

#include <stdexcept>
#include <string>

namespace s3d {

/// Shape or extent violation (mismatched operands, bad pooling geometry, ...).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed file content: bad netpbm header, broken manifest line, ...
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem-level trouble: missing or unreadable/unwritable paths.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent checkpoint contents.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace s3d
