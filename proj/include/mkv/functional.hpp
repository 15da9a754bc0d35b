/**
 * @file functional.hpp
 * @brief Scalar functionals f(t, mu) of empirical path measures, with optional
 * closed-form derivative bundles.
 */
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>

#include "mkv/path_measure.hpp"

namespace mkv {

class MeasureFunctional {
public:
    virtual ~MeasureFunctional() = default;

    virtual std::string id() const = 0;
    // Must depend on mu only through mu.stop(t).
    virtual double value(double t, const PathMeasure& mu) const = 0;

    virtual bool has_derivatives() const { return false; }
    // Right time derivative along the stopped extension.
    virtual double dt(double t, const PathMeasure& mu) const;
    // Lions derivative at every particle: N x d.
    virtual Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const;
    // Pathwise derivative of dmu at every particle: N x (d*d), row-major d x d.
    virtual Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const;

    // Growth metadata.
    virtual bool bounded_dt() const { return true; }
    virtual bool linear_growth() const { return true; }
};

using FunctionalPtr = std::shared_ptr<const MeasureFunctional>;

// Functional assembled from callables; derivative slots may be left empty.
class LambdaFunctional : public MeasureFunctional {
public:
    using Value = std::function<double(double, const PathMeasure&)>;
    using Matrix = std::function<Eigen::MatrixXd(double, const PathMeasure&)>;

    LambdaFunctional(std::string id, Value value, Value dt = {}, Matrix dmu = {}, Matrix dxdmu = {});

    std::string id() const override { return id_; }
    double value(double t, const PathMeasure& mu) const override { return value_(t, mu); }
    bool has_derivatives() const override { return dt_ && dmu_ && dxdmu_; }
    double dt(double t, const PathMeasure& mu) const override;
    Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const override;
    Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const override;

private:
    std::string id_;
    Value value_, dt_;
    Matrix dmu_, dxdmu_;
};

// Left-point running integral of component j from 0 to t along the path,
// with the cell containing t counted up to t: sum_{m<k} x_m dt + x_k (t - t_k).
double running_integral(const PathMeasure& mu, std::size_t i, double t, std::size_t j = 0);

}  // namespace mkv
