#include "mkv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mkv/errors.hpp"

namespace mkv {

ActionSet ActionSet::finite(std::vector<double> values) {
    if (values.empty()) throw ConfigurationError("ActionSet: empty action list");
    ActionSet a;
    a.values = std::move(values);
    a.lo = *std::min_element(a.values.begin(), a.values.end());
    a.hi = *std::max_element(a.values.begin(), a.values.end());
    return a;
}

ActionSet ActionSet::interval(double lo, double hi, std::size_t grid_points) {
    if (!(lo <= hi) || grid_points == 0) throw ConfigurationError("ActionSet: bad interval");
    ActionSet a;
    a.lo = lo;
    a.hi = hi;
    a.is_interval = true;
    if (grid_points == 1) {
        a.values = {0.5 * (lo + hi)};
    } else {
        for (std::size_t i = 0; i < grid_points; ++i)
            a.values.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1));
    }
    return a;
}

bool ActionSet::contains(double a) const {
    if (!std::isfinite(a)) return false;
    if (is_interval) return a >= lo - 1e-12 && a <= hi + 1e-12;
    return std::find(values.begin(), values.end(), a) != values.end();
}

PiecewisePolicy::PiecewisePolicy(std::vector<double> breakpoints, std::vector<Feedback> feedback, std::string label)
    : breakpoints_(std::move(breakpoints)), feedback_(std::move(feedback)), label_(std::move(label)) {
    if (feedback_.empty() || breakpoints_.size() != feedback_.size() + 1)
        throw ConfigurationError("PiecewisePolicy: need n+1 breakpoints for n feedback maps");
    for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i)
        if (!(breakpoints_[i] < breakpoints_[i + 1])) throw ConfigurationError("PiecewisePolicy: breakpoints not increasing");
}

PiecewisePolicy PiecewisePolicy::constant(double t, double horizon, double action) {
    return {{t, horizon}, {[action](const PathView&) { return action; }}, "constant"};
}

std::size_t Observation::cell(const PathView& p) const {
    const std::size_t k = p.grid().index_at_or_below(time);
    double v = p.value(k, 0);
    if (reference) v -= p.value(p.grid().index_at_or_below(*reference), 0);
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

std::size_t TableFeedback::cells() const {
    std::size_t c = 1;
    for (const auto& o : observations) c *= o.cells();
    return c;
}

std::size_t TableFeedback::joint_cell(const PathView& p) const {
    std::size_t c = 0;
    for (const auto& o : observations) c = c * o.cells() + o.cell(p);
    return c;
}

double TableFeedback::operator()(const PathView& p) const { return actions.at(table.at(joint_cell(p))); }

}  // namespace mkv
