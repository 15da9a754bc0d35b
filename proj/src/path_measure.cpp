#include "mkv/path_measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/stats.hpp"

namespace mkv {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::domain_error("TimeGrid: horizon must be > 0");
    if (steps == 0) throw std::domain_error("TimeGrid: steps must be positive");
}

double TimeGrid::time(std::size_t k) const {
    if (k > steps_) throw std::out_of_range("TimeGrid::time index past horizon");
    if (k == steps_) return horizon_;
    return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
}

std::size_t TimeGrid::index_at_or_below(double t) const {
    const double tol = 1e-12 * horizon_;
    if (!(t >= -tol && t <= horizon_ + tol))
        throw std::domain_error("time " + std::to_string(t) + " outside [0, T]");
    // the 1e-9 nudge keeps times like 0.3 with dt = 0.1 on their own grid point
    const double x = t / horizon_ * static_cast<double>(steps_);
    const double k = std::floor(x + 1e-9);
    if (k <= 0.0) return 0;
    return std::min(steps_, static_cast<std::size_t>(k));
}

PathView::PathView(const TimeGrid& grid, std::size_t dim, std::span<const double> values, std::size_t last)
    : grid_(&grid), dim_(dim), values_(values), last_(last) {}

double PathView::value(std::size_t k, std::size_t j) const {
    if (k > last_) throw std::out_of_range("PathView: read beyond observable time");
    return values_[k * dim_ + j];
}

std::span<const double> PathView::point(std::size_t k) const {
    if (k > last_) throw std::out_of_range("PathView: read beyond observable time");
    return values_.subspan(k * dim_, dim_);
}

SamplePath::SamplePath(TimeGrid grid, std::size_t dim, std::vector<double> values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw ShapeError("SamplePath: dimension must be positive");
    if (values_.size() != (grid_.steps() + 1) * dim_) throw ShapeError("SamplePath: values length != (M+1)*d");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::domain_error("SamplePath: non-finite value");
}

SamplePath stop_path(const SamplePath& p, double t) {
    const std::size_t k = p.grid().index_at_or_below(t);
    std::vector<double> v(p.values().begin(), p.values().end());
    const std::size_t d = p.dim();
    for (std::size_t m = k + 1; m <= p.grid().steps(); ++m)
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(k * d), d, v.begin() + static_cast<std::ptrdiff_t>(m * d));
    return {p.grid(), d, std::move(v)};
}

double path_sup_distance(const PathView& p, const PathView& q) {
    if (!(p.grid() == q.grid()) || p.dim() != q.dim()) throw ShapeError("path_sup_distance: grid mismatch");
    const std::size_t last = std::min(p.last(), q.last());
    double best = 0.0;
    for (std::size_t k = 0; k <= last; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.dim(); ++j) {
            const double e = p.value(k, j) - q.value(k, j);
            s += e * e;
        }
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

double path_sup_distance(const SamplePath& p, const SamplePath& q) { return path_sup_distance(p.view(), q.view()); }

PathMeasure::PathMeasure(TimeGrid grid, std::size_t dim, std::size_t count)
    : grid_(grid), dim_(dim), count_(count), data_(count * (grid.steps() + 1) * dim, 0.0) {
    if (count == 0) throw std::domain_error("PathMeasure: empty measure");
    if (dim == 0) throw ShapeError("PathMeasure: dimension must be positive");
}

PathMeasure::PathMeasure(TimeGrid grid, std::size_t dim, std::size_t count, std::vector<double> data)
    : grid_(grid), dim_(dim), count_(count), data_(std::move(data)) {
    if (count == 0) throw std::domain_error("PathMeasure: empty measure");
    if (dim == 0) throw ShapeError("PathMeasure: dimension must be positive");
    if (data_.size() != count * stride()) throw ShapeError("PathMeasure: data length != N*(M+1)*d");
}

PathMeasure PathMeasure::from_paths(const std::vector<SamplePath>& paths) {
    if (paths.empty()) throw std::domain_error("PathMeasure: empty measure");
    const TimeGrid g = paths.front().grid();
    const std::size_t d = paths.front().dim();
    std::vector<double> data;
    data.reserve(paths.size() * (g.steps() + 1) * d);
    for (const auto& p : paths) {
        if (!(p.grid() == g) || p.dim() != d) throw ShapeError("PathMeasure: particles on different grids");
        data.insert(data.end(), p.values().begin(), p.values().end());
    }
    return {g, d, paths.size(), std::move(data)};
}

PathMeasure PathMeasure::constant(TimeGrid grid, std::size_t dim, const std::vector<double>& points) {
    if (dim == 0 || points.size() % dim != 0) throw ShapeError("PathMeasure::constant: bad point array");
    PathMeasure mu(grid, dim, points.size() / dim);
    for (std::size_t i = 0; i < mu.count(); ++i)
        for (std::size_t k = 0; k <= grid.steps(); ++k)
            for (std::size_t j = 0; j < dim; ++j) mu.value(i, k, j) = points[i * dim + j];
    return mu;
}

PathView PathMeasure::path(std::size_t i, std::size_t last) const {
    return {grid_, dim_, particle(i), std::min(last, grid_.steps())};
}

SamplePath PathMeasure::sample(std::size_t i) const {
    auto p = particle(i);
    return {grid_, dim_, std::vector<double>(p.begin(), p.end())};
}

PathMeasure PathMeasure::stop(double t) const { return stop_index(grid_.index_at_or_below(t)); }

PathMeasure PathMeasure::stop_index(std::size_t k) const {
    PathMeasure out = *this;
    for (std::size_t i = 0; i < count_; ++i) {
        auto src = point(i, k);
        for (std::size_t m = k + 1; m <= grid_.steps(); ++m) std::copy(src.begin(), src.end(), out.point(i, m).begin());
    }
    return out;
}

double mean_at(const PathMeasure& mu, std::size_t k, std::size_t j) {
    std::vector<double> x(mu.count());
    for (std::size_t i = 0; i < mu.count(); ++i) x[i] = mu.value(i, k, j);
    return pairwise_mean(x);
}

}  // namespace mkv
