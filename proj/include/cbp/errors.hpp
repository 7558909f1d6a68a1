#pragma once

#include <stdexcept>
#include <string>

namespace cbp {

// Error taxonomy mirrored by the CLI exit codes:
//   ValidationError -> 1 (bad arguments, bad config, preconditions)
//   NumericError    -> 2 (NaN, integer overflow)
//   InvariantError  -> 3 (a checked runtime invariant failed)
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class InvariantError : public std::runtime_error {
public:
    explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cbp
