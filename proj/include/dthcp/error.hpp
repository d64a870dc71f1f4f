#pragma once

#include <stdexcept>
#include <string>

namespace dthcp {

/// Caller supplied something malformed: bad dimensions, missing file, out-of-range config.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// An internal invariant did not hold. Indicates a bug or a violated precondition
/// that could not be detected at the API boundary.
class InvariantViolation : public std::logic_error {
public:
    explicit InvariantViolation(const std::string& what) : std::logic_error(what) {}
};

}  // namespace dthcp
