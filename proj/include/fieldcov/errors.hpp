#pragma once

#include <stdexcept>
#include <string>

namespace fieldcov {

// Thrown for invalid configuration: bad parameter ranges, mismatched
// dimensions, unsupported scheme combinations. CLI maps these to exit 1.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for defective input data: non-finite values, malformed files,
// out-of-domain observations. CLI maps these to exit 2.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation fails numerically (factorization breakdown,
// overflow). CLI maps these to exit 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fieldcov
