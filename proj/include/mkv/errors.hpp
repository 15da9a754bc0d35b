#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mkv {

// Bad combination of inputs or missing capability (maps to CLI exit 2 when
// raised during config validation).
class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operand shapes disagree (grid mismatch, particle count mismatch).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical breakdown inside a time-stepping loop.
class SimulationFault : public std::runtime_error {
public:
    SimulationFault(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// A functional returned a non-finite value.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mkv
