#pragma once

#include <stdexcept>
#include <string>

namespace ftop {

// Error categories map to process exit codes in the CLI:
// ConfigError -> 2, SolverError -> 3, IoError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ftop
