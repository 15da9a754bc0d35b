#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mkv/coupling.hpp"
#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/simulate.hpp"
#include "mkv/transport.hpp"

using namespace mkv;

namespace {

double brute_force(const std::vector<double>& cost, std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    double best = INFINITY;
    do best = std::min(best, assignment_cost(cost, n, p));
    while (std::next_permutation(p.begin(), p.end()));
    return best;
}

}  // namespace

TEST_CASE("assignment matches brute force on small problems") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (std::size_t n = 1; n <= 7; ++n) {
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> c(n * n);
            for (auto& x : c) x = u(rng);
            const auto perm = solve_assignment(c, n);
            CHECK(assignment_cost(c, n, perm) == brute_force(c, n));
        }
    }
}

TEST_CASE("assignment handles ties and degenerate costs") {
    const std::vector<double> zero(16, 0.0);
    const auto p = solve_assignment(zero, 4);
    std::vector<std::size_t> s = p;
    std::sort(s.begin(), s.end());
    CHECK(s == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("sinkhorn plan has uniform marginals and approaches the exact cost") {
    const TimeGrid g(1.0, 5);
    const PathMeasure a = random_walk_measure(g, 1, 12, 1), b = random_walk_measure(g, 1, 12, 2);
    const auto cost = sup_cost_matrix(a, b);
    const SinkhornResult s = sinkhorn(cost, 12, 1e-3);
    CHECK(s.marginal_error < 1e-6);
    const double exact = assignment_cost(cost, 12, solve_assignment(cost, 12)) / 12.0;
    CHECK(s.cost >= exact - 1e-9);
    CHECK(s.cost == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("wasserstein pseudometric properties") {
    const TimeGrid g(1.0, 10);
    const PathMeasure a = random_walk_measure(g, 1, 9, 1), b = random_walk_measure(g, 1, 9, 2), c = random_walk_measure(g, 1, 9, 3);
    CHECK(wasserstein2(a, a).cost == 0.0);
    CHECK(wasserstein2(a, b).cost == wasserstein2(b, a).cost);
    CHECK(wasserstein2(a, c).cost <= wasserstein2(a, b).cost + wasserstein2(b, c).cost + 1e-12);
    // measures only differing after t are at distance 0 once stopped
    PathMeasure a2 = a;
    for (std::size_t i = 0; i < a.count(); ++i) a2.value(i, 10) += 1.0;
    CHECK(wasserstein2(a.stop(0.5), a2.stop(0.5)).cost == 0.0);
    CHECK(theta_distance(0.5, a, 0.5, a2) == 0.0);
    CHECK(theta_distance(0.25, a, 0.5, a) >= 0.5);
}

TEST_CASE("wasserstein of shifted measures equals the shift") {
    const TimeGrid g(1.0, 4);
    const PathMeasure a = PathMeasure::constant(g, 1, {0.0, 1.0, 2.0});
    const PathMeasure b = PathMeasure::constant(g, 1, {0.5, 1.5, 2.5});
    CHECK(wasserstein2(a, b).cost == doctest::Approx(0.5));
}

TEST_CASE("entropic branch is used above the cutoff") {
    const TimeGrid g(1.0, 3);
    const PathMeasure a = random_walk_measure(g, 1, 20, 5), b = random_walk_measure(g, 1, 20, 6);
    TransportOptions opt;
    opt.exact_cutoff = 10;
    const TransportResult r = wasserstein2(a, b, opt);
    CHECK_FALSE(r.coupling.exact);
    CHECK(r.cost >= wasserstein2(a, b).cost - 1e-9);
}

TEST_CASE("quantile transport pushes samples onto the target law") {
    std::vector<double> zeta(1000);
    for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] = counter_normal(8, i, 0, 0);
    const auto phi = quantile_transport(zeta, std::vector<double>{-1.0, 3.0});
    const auto pushed = phi.push_samples();
    const auto ones = std::count(pushed.begin(), pushed.end(), 3.0);
    CHECK(ones == 500);
    CHECK(std::count(pushed.begin(), pushed.end(), -1.0) == 500);
    // monotone
    for (std::size_t i = 0; i < zeta.size(); ++i)
        for (std::size_t j = 0; j < 20; ++j)
            if (zeta[i] < zeta[j]) CHECK(phi(zeta[i]) <= phi(zeta[j]));
    const auto uni = quantile_transport(zeta, [](double x) { return std::clamp(x, 0.0, 1.0); }, 0.0, 1.0);
    CHECK(uni.quantile(0.25) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK_THROWS(quantile_transport({}, std::vector<double>{1.0}));
}

TEST_CASE("noise-measurable coupling is reproducible from the lookup") {
    const TimeGrid g(1.0, 8);
    const PathMeasure mu = random_walk_measure(g, 1, 15, 21), nu = random_walk_measure(g, 1, 15, 22);
    const std::vector<double> pi{0.0, 0.25, 0.5};
    const CoupledSystem cs = build_coupling(mu, nu, pi, 1e-3, 0.1, 3);
    CHECK(cs.distance <= cs.optimal_distance + 1e-3);
    CHECK(reconstruct_xi_pi(cs.lookup, pi_marginals(cs.eta, cs.pi_index), cs.btilde, 0.1, cs.substeps) ==
          pi_marginals(cs.xi, cs.pi_index));
    std::vector<std::size_t> src = cs.xi_source;
    std::sort(src.begin(), src.end());
    for (std::size_t i = 0; i < src.size(); ++i) CHECK(src[i] == i);
    CHECK_THROWS_AS(build_coupling(mu, random_walk_measure(g, 1, 14, 1), pi, 1e-3, 0.1, 3), ConfigurationError);
    CHECK_THROWS(build_coupling(mu, nu, pi, 0.0, 0.1, 3));
}
