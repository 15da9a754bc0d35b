#include "mkv/lions.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/stats.hpp"

namespace mkv {

namespace {

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw EvaluationError(std::string("non-finite functional value in ") + what);
    return v;
}

// Adds `amount` to component j of particle i at grid indices >= k.
void bump(PathMeasure& mu, std::size_t i, std::size_t k, std::size_t j, double amount) {
    for (std::size_t m = k; m <= mu.grid().steps(); ++m) mu.value(i, m, j) += amount;
}

}  // namespace

double time_derivative(const MeasureFunctional& f, double t, const PathMeasure& mu, double h, bool richardson) {
    if (!(h > 0.0)) throw std::domain_error("time_derivative: h must be > 0");
    if (t + h > mu.grid().horizon() * (1.0 + 1e-12)) throw std::domain_error("time_derivative: t + h beyond horizon");
    const PathMeasure stopped = mu.stop(t);
    const double f0 = checked(f.value(t, mu), "time_derivative");
    const double d1 = (checked(f.value(t + h, stopped), "time_derivative") - f0) / h;
    if (!richardson) return d1;
    const double d2 = (checked(f.value(t + 0.5 * h, stopped), "time_derivative") - f0) / (0.5 * h);
    return 2.0 * d2 - d1;
}

double default_bump(const PathMeasure& mu, double t, std::size_t i) {
    const std::size_t k = mu.grid().index_at_or_below(t);
    double scale = 0.0;
    for (std::size_t m = 0; m <= k; ++m)
        for (std::size_t j = 0; j < mu.dim(); ++j) scale = std::max(scale, std::abs(mu.value(i, m, j)));
    return 1e-4 * (1.0 + scale);
}

Eigen::VectorXd lions_derivative(const MeasureFunctional& f, double t, const PathMeasure& mu, std::size_t i,
                                 std::optional<double> eps) {
    if (i >= mu.count()) throw std::out_of_range("lions_derivative: particle index");
    const double e = eps.value_or(default_bump(mu, t, i));
    if (!(e > 0.0)) throw std::domain_error("lions_derivative: eps must be > 0");
    const std::size_t k = mu.grid().index_at_or_below(t);
    const double n = static_cast<double>(mu.count());
    PathMeasure work = mu;
    Eigen::VectorXd out(static_cast<Eigen::Index>(mu.dim()));
    for (std::size_t j = 0; j < mu.dim(); ++j) {
        bump(work, i, k, j, e);
        const double fp = checked(f.value(t, work), "lions_derivative");
        bump(work, i, k, j, -2.0 * e);
        const double fm = checked(f.value(t, work), "lions_derivative");
        // restore exactly from the source rather than adding e back
        for (std::size_t m = k; m <= mu.grid().steps(); ++m) work.value(i, m, j) = mu.value(i, m, j);
        out(static_cast<Eigen::Index>(j)) = n * (fp - fm) / (2.0 * e);
    }
    return out;
}

Eigen::MatrixXd second_pathwise_derivative(const MeasureFunctional& f, double t, const PathMeasure& mu, std::size_t i,
                                           std::optional<double> eps1, std::optional<double> eps2) {
    if (i >= mu.count()) throw std::out_of_range("second_pathwise_derivative: particle index");
    const double base = 10.0 * default_bump(mu, t, i);
    const double e1 = eps1.value_or(base), e2 = eps2.value_or(base);
    if (!(e1 > 0.0 && e2 > 0.0)) throw std::domain_error("second_pathwise_derivative: eps must be > 0");
    const std::size_t k = mu.grid().index_at_or_below(t);
    const std::size_t d = mu.dim();
    const double n = static_cast<double>(mu.count());
    PathMeasure work = mu;
    auto restore = [&] {
        for (std::size_t m = k; m <= mu.grid().steps(); ++m)
            for (std::size_t j = 0; j < d; ++j) work.value(i, m, j) = mu.value(i, m, j);
    };
    auto eval = [&](std::size_t a, double sa, std::size_t b, double sb) {
        bump(work, i, k, a, sa);
        bump(work, i, k, b, sb);
        const double v = checked(f.value(t, work), "second_pathwise_derivative");
        restore();
        return v;
    };
    Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            const double fpp = eval(a, e1, b, e2);
            const double fpm = eval(a, e1, b, -e2);
            const double fmp = eval(a, -e1, b, e2);
            const double fmm = eval(a, -e1, b, -e2);
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = n * (fpp - fpm - fmp + fmm) / (4.0 * e1 * e2);
        }
    return out;
}

NumericDerivatives::NumericDerivatives(FunctionalPtr base, double h, double eps_scale)
    : base_(std::move(base)), h_(h), eps_scale_(eps_scale) {
    if (!base_) throw ConfigurationError("NumericDerivatives: null functional");
}

double NumericDerivatives::dt(double t, const PathMeasure& mu) const {
    const double room = mu.grid().horizon() - t;
    const double h = h_ > 0.0 ? h_ : std::min(1e-3, 0.5 * room);
    if (!(room > 0.0)) throw std::domain_error("time derivative undefined at the horizon");
    return time_derivative(*base_, t, mu, std::min(h, room), true);
}

Eigen::MatrixXd NumericDerivatives::dmu(double t, const PathMeasure& mu) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(mu.count()), static_cast<Eigen::Index>(mu.dim()));
    for (std::size_t i = 0; i < mu.count(); ++i)
        out.row(static_cast<Eigen::Index>(i)) =
            lions_derivative(*base_, t, mu, i, eps_scale_ * default_bump(mu, t, i)).transpose();
    return out;
}

Eigen::MatrixXd NumericDerivatives::dxdmu(double t, const PathMeasure& mu) const {
    const std::size_t d = mu.dim();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(mu.count()), static_cast<Eigen::Index>(d * d));
    for (std::size_t i = 0; i < mu.count(); ++i) {
        const double e = 10.0 * eps_scale_ * default_bump(mu, t, i);
        const Eigen::MatrixXd g = second_pathwise_derivative(*base_, t, mu, i, e, e);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a * d + b)) =
                    g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    return out;
}

ItoReport ito_residual(const MeasureFunctional& f, const SimulationResult& trajectory, double t_end,
                       const ItoOptions& opt) {
    const PathMeasure& X = trajectory.paths;
    const TimeGrid& g = X.grid();
    const std::size_t d = X.dim(), n = X.count(), M = g.steps();
    const std::size_t k0 = trajectory.start_index;
    const std::size_t kend = g.index_at_or_below(t_end);
    if (kend < k0 || kend > trajectory.end_index) throw std::domain_error("ito_residual: t_end outside the simulated window");

    const bool have_sigma = trajectory.diffusion.size() == n * M * d * d;
    ItoReport rep;
    rep.convention = opt.convention.value_or(have_sigma ? QVConvention::DiffusionDt : QVConvention::IncrementSquare);
    if (rep.convention == QVConvention::DiffusionDt && !have_sigma)
        throw ConfigurationError("ito_residual: sigma sigma^T convention needs a trajectory with recorded diffusion");

    std::unique_ptr<NumericDerivatives> numeric;
    const MeasureFunctional* df = &f;
    if (!f.has_derivatives()) {
        if (!opt.numeric_fallback) throw ConfigurationError("ito_residual: " + f.id() + " has no derivatives and numeric fallback is off");
        numeric = std::make_unique<NumericDerivatives>(FunctionalPtr(&f, [](const MeasureFunctional*) {}));
        df = numeric.get();
    }

    const double h = g.dt();
    double sum = 0.0;
    std::vector<double> qv_noise(n, 0.0), step_terms(n);
    for (std::size_t k = k0; k < kend; ++k) {
        const double tk = g.time(k);
        const double ft = df->dt(tk, X);
        const Eigen::MatrixXd Z = df->dmu(tk, X);
        const Eigen::MatrixXd G = df->dxdmu(tk, X);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            double lin = 0.0, quad = 0.0, quad_sq = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                const double da = X.value(i, k + 1, a) - X.value(i, k, a);
                lin += Z(ii, static_cast<Eigen::Index>(a)) * da;
                for (std::size_t b = 0; b < d; ++b) {
                    const double db = X.value(i, k + 1, b) - X.value(i, k, b);
                    const double gs = 0.5 * (G(ii, static_cast<Eigen::Index>(a * d + b)) + G(ii, static_cast<Eigen::Index>(b * d + a)));
                    quad_sq += gs * da * db;
                    if (have_sigma) quad += gs * trajectory.diffusion[(i * M + k) * d * d + a * d + b] * h;
                }
            }
            const double q = rep.convention == QVConvention::IncrementSquare ? quad_sq : quad;
            step_terms[i] = lin + 0.5 * q;
            if (have_sigma) qv_noise[i] += 0.5 * (quad_sq - quad);
        }
        sum += ft * h + pairwise_mean(step_terms);
    }
    rep.lhs = f.value(g.time(kend), X) - f.value(g.time(k0), X);
    rep.rhs = sum;
    rep.residual = rep.lhs - rep.rhs;
    rep.relative = rep.lhs != 0.0 ? std::abs(rep.residual) / std::abs(rep.lhs) : (rep.residual == 0.0 ? 0.0 : INFINITY);
    rep.se = have_sigma ? mean_and_stderr(qv_noise).se : 0.0;
    rep.particles = n;
    rep.steps = kend - k0;
    return rep;
}

}  // namespace mkv
