#pragma once

#include <stdexcept>
#include <string>

namespace clumo {

// Dimension or shape disagreement between tensors.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad values: out-of-range labels, empty inputs, non-finite data.
struct ValueError : std::invalid_argument {
    explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

// Out-of-range key / prompt / task index.
struct IndexError : std::out_of_range {
    explicit IndexError(const std::string& what) : std::out_of_range(what) {}
};

// API misuse: wrong call order, frozen state, mismatched task ids.
struct UsageError : std::logic_error {
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Invalid or infeasible configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File read/write failure; message carries the path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace clumo
