#pragma once

#include <stdexcept>
#include <string>

namespace fastturn {

// Error taxonomy mirrored by CLI exit codes:
//   ConfigError -> 2, IoError -> 3, PrereqError -> 4, TrainError -> 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PrereqError : std::runtime_error {
    explicit PrereqError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fastturn
