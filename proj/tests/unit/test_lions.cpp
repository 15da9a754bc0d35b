#include <doctest.h>

#include <cmath>

#include "mkv/closed_forms.hpp"
#include "mkv/lions.hpp"
#include "mkv/simulate.hpp"

using namespace mkv;

namespace {

DynamicsSpec brownian() {
    DynamicsSpec d;
    d.drift = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 0.0; };
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    return d;
}

}  // namespace

TEST_CASE("finite-difference derivatives agree with closed forms") {
    const auto f = example_quadratic();
    const TimeGrid g(1.0, 40);
    const PathMeasure mu = random_walk_measure(g, 1, 25, 13);
    const double t = g.time(17);
    const Eigen::MatrixXd Z = f->dmu(t, mu), G = f->dxdmu(t, mu);
    for (std::size_t i : {0u, 7u, 24u}) {
        CHECK(lions_derivative(*f, t, mu, i)(0) == doctest::Approx(Z(i, 0)).epsilon(1e-5));
        CHECK(second_pathwise_derivative(*f, t, mu, i)(0, 0) == doctest::Approx(G(i, 0)).epsilon(1e-3));
    }
    CHECK(default_bump(mu, t, 0) > 0.0);
    const NumericDerivatives num(f);
    CHECK((num.dmu(t, mu) - Z).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((num.dxdmu(t, mu) - G).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("time derivative along the stopped extension") {
    const ReferenceEntry heat = heat_solution("quadratic");
    const TimeGrid g(1.0, 100);
    const PathMeasure mu = random_walk_measure(g, 1, 30, 2);
    const double t = g.time(40);
    CHECK(time_derivative(*heat.functional, t, mu, 1e-3) == doctest::Approx(heat.functional->dt(t, mu)).epsilon(1e-5));
    CHECK(heat.functional->dt(t, mu) == doctest::Approx(-1.0));
}

TEST_CASE("ito residual is small for the heat quadratic under brownian motion") {
    const ReferenceEntry heat = heat_solution("quadratic");
    const TimeGrid g(1.0, 50);
    const PathMeasure delta0 = PathMeasure::constant(g, 1, {0.0});
    SimulationOptions opt;
    opt.record_diffusion = true;
    const auto sim = simulate_mkv(0.0, delta0, brownian(), nullptr, 5000, 4, opt);
    const ItoReport r = ito_residual(*heat.functional, sim, 1.0);
    CHECK(r.convention == QVConvention::DiffusionDt);
    CHECK(std::abs(r.residual) <= 1e-9 + 3.0 * r.se);
    ItoOptions inc;
    inc.convention = QVConvention::IncrementSquare;
    const ItoReport r2 = ito_residual(*heat.functional, sim, 1.0, inc);
    CHECK(r2.lhs == r.lhs);
    CHECK(std::abs(r2.residual) < 0.1);
}
