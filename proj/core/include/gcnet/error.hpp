#pragma once

#include <stdexcept>
#include <string>

namespace gcnet {

// Base for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition / API-misuse violations.
struct ContractError : Error {
    using Error::Error;
};

// Bad user-supplied configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input files.
struct ParseError : Error {
    using Error::Error;
};

// Not enough history for the requested window.
struct WindowError : Error {
    using Error::Error;
};

// Training data unusable for a given model (single class, singular covariance).
struct DegenerateTrainingError : Error {
    using Error::Error;
};

}  // namespace gcnet
