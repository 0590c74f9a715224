#pragma once

#include <stdexcept>
#include <string>

namespace fishtrack {

// Bad run configuration: missing files, invalid parameter combinations.
// Maps to exit code 1 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data: unparseable rows, violated file invariants.
// Maps to exit code 2 in the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fishtrack
