#pragma once

#include <stdexcept>
#include <string>

namespace url {

// Contract / shape / configuration problems. CLI exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem and serialization problems. CLI exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or other numeric breakdowns. CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace url
