/**
 * @file lions.hpp
 * @brief Finite-difference time, Lions and pathwise derivatives, and the
 * functional Ito residual.
 */
#pragma once

#include <Eigen/Dense>
#include <optional>

#include "mkv/functional.hpp"
#include "mkv/simulate.hpp"

namespace mkv {

// (f(t+h, mu.stop(t)) - f(t, mu)) / h, Richardson-combined over h and h/2.
double time_derivative(const MeasureFunctional& f, double t, const PathMeasure& mu, double h, bool richardson = true);

// Default bump size 1e-4 * (1 + max |value| of particle i up to t).
double default_bump(const PathMeasure& mu, double t, std::size_t i);

// Component k: N (f(bump +eps e_k) - f(bump -eps e_k)) / (2 eps), the bump
// added to particle i at every grid point at or after the stop point of t.
Eigen::VectorXd lions_derivative(const MeasureFunctional& f, double t, const PathMeasure& mu, std::size_t i,
                                 std::optional<double> eps = std::nullopt);

// Entry (k,l): N times the central mixed second difference in (e_k eps1,
// e_l eps2). Carries an O(1/N) contribution from the cross-measure term.
Eigen::MatrixXd second_pathwise_derivative(const MeasureFunctional& f, double t, const PathMeasure& mu, std::size_t i,
                                           std::optional<double> eps1 = std::nullopt,
                                           std::optional<double> eps2 = std::nullopt);

// Wraps a functional and supplies missing derivatives by finite differences.
class NumericDerivatives : public MeasureFunctional {
public:
    explicit NumericDerivatives(FunctionalPtr base, double h = 0.0, double eps_scale = 1.0);
    std::string id() const override { return base_->id() + "+numeric"; }
    double value(double t, const PathMeasure& mu) const override { return base_->value(t, mu); }
    bool has_derivatives() const override { return true; }
    double dt(double t, const PathMeasure& mu) const override;
    Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const override;
    Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const override;

private:
    FunctionalPtr base_;
    double h_;
    double eps_scale_;
};

enum class QVConvention { IncrementSquare, DiffusionDt };

struct ItoOptions {
    std::optional<QVConvention> convention;  // default: DiffusionDt when sigma was recorded
    bool numeric_fallback = false;
};

struct ItoReport {
    double lhs = 0.0;       // f(t_end) - f(t_start)
    double rhs = 0.0;       // sum of the expansion terms
    double residual = 0.0;  // lhs - rhs
    double relative = 0.0;  // |residual| / |lhs|
    double se = 0.0;        // standard error of the quadratic-variation term
    std::size_t particles = 0;
    std::size_t steps = 0;
    QVConvention convention = QVConvention::IncrementSquare;
};

ItoReport ito_residual(const MeasureFunctional& f, const SimulationResult& trajectory, double t_end,
                       const ItoOptions& opt = {});

}  // namespace mkv
