/**
 * @file path_measure.hpp
 * @brief Time grids, sampled paths and uniform-weight empirical path measures.
 *
 * Storage is particle-major: particle i occupies one contiguous block of
 * (M+1)*d doubles, grid point k at offset k*d.
 */
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mkv {

class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t k) const;

    // Greatest grid index whose time is <= t. Throws std::domain_error when t
    // lies outside [0, T].
    std::size_t index_at_or_below(double t) const;

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_ = 1.0;
    std::size_t steps_ = 1;
};

// Read-only view of one particle, optionally truncated at grid index `last`
// so that consumers cannot look past the current time.
class PathView {
public:
    PathView(const TimeGrid& grid, std::size_t dim, std::span<const double> values, std::size_t last);

    const TimeGrid& grid() const noexcept { return *grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t last() const noexcept { return last_; }
    double value(std::size_t k, std::size_t j = 0) const;
    std::span<const double> point(std::size_t k) const;

private:
    const TimeGrid* grid_;
    std::size_t dim_;
    std::span<const double> values_;
    std::size_t last_;
};

class SamplePath {
public:
    SamplePath(TimeGrid grid, std::size_t dim, std::vector<double> values);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    double value(std::size_t k, std::size_t j = 0) const { return values_[k * dim_ + j]; }
    std::span<const double> point(std::size_t k) const { return {values_.data() + k * dim_, dim_}; }
    std::span<const double> values() const noexcept { return values_; }
    PathView view() const { return {grid_, dim_, values_, grid_.steps()}; }

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::vector<double> values_;
};

SamplePath stop_path(const SamplePath& p, double t);

// max over grid points of the Euclidean distance between values.
double path_sup_distance(const SamplePath& p, const SamplePath& q);
double path_sup_distance(const PathView& p, const PathView& q);

class PathMeasure {
public:
    PathMeasure(TimeGrid grid, std::size_t dim, std::size_t count);
    PathMeasure(TimeGrid grid, std::size_t dim, std::size_t count, std::vector<double> data);

    static PathMeasure from_paths(const std::vector<SamplePath>& paths);
    // Every particle constant in time at the given d-vector (points is count*d).
    static PathMeasure constant(TimeGrid grid, std::size_t dim, const std::vector<double>& points);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return count_; }
    std::size_t stride() const noexcept { return (grid_.steps() + 1) * dim_; }

    double value(std::size_t i, std::size_t k, std::size_t j = 0) const {
        return data_[i * stride() + k * dim_ + j];
    }
    double& value(std::size_t i, std::size_t k, std::size_t j = 0) {
        return data_[i * stride() + k * dim_ + j];
    }
    std::span<const double> point(std::size_t i, std::size_t k) const {
        return {data_.data() + i * stride() + k * dim_, dim_};
    }
    std::span<double> point(std::size_t i, std::size_t k) {
        return {data_.data() + i * stride() + k * dim_, dim_};
    }
    std::span<const double> particle(std::size_t i) const { return {data_.data() + i * stride(), stride()}; }
    std::span<double> particle(std::size_t i) { return {data_.data() + i * stride(), stride()}; }

    PathView path(std::size_t i) const { return path(i, grid_.steps()); }
    PathView path(std::size_t i, std::size_t last) const;
    SamplePath sample(std::size_t i) const;

    const std::vector<double>& data() const noexcept { return data_; }

    // Particles frozen after the grid point at-or-below t.
    PathMeasure stop(double t) const;
    // Same as stop but by grid index.
    PathMeasure stop_index(std::size_t k) const;

    bool operator==(const PathMeasure&) const = default;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::size_t count_;
    std::vector<double> data_;
};

// Sample mean of component j at grid index k, summed in fixed pairwise order.
double mean_at(const PathMeasure& mu, std::size_t k, std::size_t j = 0);

}  // namespace mkv
