/**
 * @file policy.hpp
 * @brief Piecewise-constant closed-loop feedback policies.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mkv/path_measure.hpp"

namespace mkv {

struct ActionSet {
    std::vector<double> values;  // finite list, or the search grid of an interval
    double lo = 0.0;
    double hi = 0.0;
    bool is_interval = false;

    static ActionSet finite(std::vector<double> values);
    static ActionSet interval(double lo, double hi, std::size_t grid_points);
    bool contains(double a) const;
};

// Feedback reads the particle's path only up to the interval start.
using Feedback = std::function<double(const PathView& observed)>;

class PiecewisePolicy {
public:
    PiecewisePolicy() = default;
    // breakpoints t_0 < ... < t_n, one feedback per interval [t_i, t_{i+1})
    PiecewisePolicy(std::vector<double> breakpoints, std::vector<Feedback> feedback, std::string label = {});

    static PiecewisePolicy constant(double t, double horizon, double action);

    std::size_t intervals() const noexcept { return feedback_.size(); }
    double start(std::size_t i) const { return breakpoints_.at(i); }
    double end(std::size_t i) const { return breakpoints_.at(i + 1); }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    double action(std::size_t i, const PathView& observed) const { return feedback_.at(i)(observed); }
    const std::string& label() const noexcept { return label_; }

private:
    std::vector<double> breakpoints_;
    std::vector<Feedback> feedback_;
    std::string label_;
};

// One quantized observation: value of component 0 at `time`, minus its value
// at `reference` when given, binned by `edges` (cell = #edges <= value).
struct Observation {
    double time = 0.0;
    std::optional<double> reference;
    std::vector<double> edges;

    std::size_t cells() const noexcept { return edges.size() + 1; }
    std::size_t cell(const PathView& p) const;
};

// Lookup-table feedback over the product of observation cells.
struct TableFeedback {
    std::vector<Observation> observations;
    std::vector<std::size_t> table;  // action index per joint cell, row-major
    std::vector<double> actions;

    std::size_t cells() const;
    std::size_t joint_cell(const PathView& p) const;
    double operator()(const PathView& p) const;
};

// Limits of the table quantization.
inline constexpr std::size_t kMaxObservations = 4;
inline constexpr std::size_t kMaxCells = 9;
inline constexpr std::size_t kMaxActions = 9;

}  // namespace mkv
