#pragma once

#include <stdexcept>
#include <string>

namespace flatgcd {

// Error taxonomy used across the library. All derive from std::runtime_error
// so callers that do not care about the category can catch one type.

// Tensor shapes do not line up for the requested operation.
struct DimError : std::runtime_error {
    explicit DimError(const std::string& msg) : std::runtime_error(msg) {}
};

// A computation produced NaN/Inf, or would (log of non-positive, etc.).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// An API precondition was violated (non-scalar backward seed, overlapping
// anchor/labeled sets, batch too small, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value (temperature <= 0, infeasible separation, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O failure; message carries the offending path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace flatgcd
