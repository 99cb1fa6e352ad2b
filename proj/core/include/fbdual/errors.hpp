#pragma once

#include <stdexcept>
#include <string>

namespace fbdual {

// Invalid run configuration (bad parameters, malformed config file, unknown keys).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation (e.g. y <= 0 for a conjugate).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure failed (non-convergence, singular system). Carries the
// last iterate when the failing procedure has one.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double last_iterate = 0.0)
        : std::runtime_error(what), last_iterate_(last_iterate) {}
    double last_iterate() const { return last_iterate_; }

private:
    double last_iterate_;
};

} // namespace fbdual
