#pragma once

#include <stdexcept>
#include <string>

namespace bcpanel {

/// Bad inputs: malformed files, inconsistent configuration, violated
/// structural assumptions. CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Sampler failed to produce usable draws (e.g. every warm-up transition
/// diverged). CLI maps this to exit code 3.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem problems: missing files, unwritable output directories,
/// artifact version mismatches. CLI maps this to exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bcpanel
