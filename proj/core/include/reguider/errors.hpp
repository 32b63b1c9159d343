#ifndef REGUIDER_ERRORS_HPP
#define REGUIDER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace reguider {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / rank violations.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// API contract violations (non-scalar loss, detached tensor, bad argument).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Malformed input data (CSV cells, file headers, spec strings).
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Configuration problems: missing paths, invalid keys, bad fractions.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem / serialization failures.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Non-finite values encountered while training.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace reguider

#endif
