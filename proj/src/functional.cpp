#include "mkv/functional.hpp"

#include "mkv/errors.hpp"

namespace mkv {

double MeasureFunctional::dt(double, const PathMeasure&) const {
    throw ConfigurationError(id() + ": no closed-form time derivative");
}

Eigen::MatrixXd MeasureFunctional::dmu(double, const PathMeasure&) const {
    throw ConfigurationError(id() + ": no closed-form Lions derivative");
}

Eigen::MatrixXd MeasureFunctional::dxdmu(double, const PathMeasure&) const {
    throw ConfigurationError(id() + ": no closed-form pathwise derivative");
}

LambdaFunctional::LambdaFunctional(std::string id, Value value, Value dt, Matrix dmu, Matrix dxdmu)
    : id_(std::move(id)), value_(std::move(value)), dt_(std::move(dt)), dmu_(std::move(dmu)), dxdmu_(std::move(dxdmu)) {
    if (!value_) throw ConfigurationError("LambdaFunctional: value callable required");
}

double LambdaFunctional::dt(double t, const PathMeasure& mu) const {
    return dt_ ? dt_(t, mu) : MeasureFunctional::dt(t, mu);
}

Eigen::MatrixXd LambdaFunctional::dmu(double t, const PathMeasure& mu) const {
    return dmu_ ? dmu_(t, mu) : MeasureFunctional::dmu(t, mu);
}

Eigen::MatrixXd LambdaFunctional::dxdmu(double t, const PathMeasure& mu) const {
    return dxdmu_ ? dxdmu_(t, mu) : MeasureFunctional::dxdmu(t, mu);
}

double running_integral(const PathMeasure& mu, std::size_t i, double t, std::size_t j) {
    const TimeGrid& g = mu.grid();
    const std::size_t k = g.index_at_or_below(t);
    const double h = g.dt();
    double s = 0.0;
    for (std::size_t m = 0; m < k; ++m) s += mu.value(i, m, j);
    return s * h + mu.value(i, k, j) * (t - g.time(k));
}

}  // namespace mkv
