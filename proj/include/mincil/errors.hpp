#pragma once

#include <stdexcept>
#include <string>

namespace mincil {

/// Bad input: wrong shapes, out-of-range hyperparameters, malformed files.
/// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values or a failed factorization. The CLI maps this to exit code 2.
class NumericalBreakdown : public std::runtime_error {
public:
    explicit NumericalBreakdown(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mincil
