#pragma once

#include <stdexcept>
#include <string>

namespace c2f {

/// Shape or extent disagreement between tensors.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid model / run configuration (bad kernel size, unknown variant, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated call contract (non-scalar loss, label out of range, reused tape).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file content (checkpoint magic, truncation, manifest mismatch).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failure (unwritable output directory, short write).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace c2f
