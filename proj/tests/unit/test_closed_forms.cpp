#include <doctest.h>

#include <cmath>

#include "mkv/closed_forms.hpp"
#include "mkv/errors.hpp"
#include "mkv/simulate.hpp"

using namespace mkv;

TEST_CASE("gauss-hermite rule reproduces normal moments") {
    const GaussRule r = gauss_hermite_normal(12);
    double m0 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t k = 0; k < r.nodes.size(); ++k) {
        m0 += r.weights[k];
        m2 += r.weights[k] * std::pow(r.nodes[k], 2);
        m4 += r.weights[k] * std::pow(r.nodes[k], 4);
    }
    CHECK(m0 == doctest::Approx(1.0));
    CHECK(m2 == doctest::Approx(1.0));
    CHECK(m4 == doctest::Approx(3.0));
    CHECK_THROWS_AS(gauss_hermite_normal(0), ConfigurationError);
}

TEST_CASE("heat values at a point mass") {
    const TimeGrid g(1.0, 10);
    const PathMeasure d0 = PathMeasure::constant(g, 1, {0.0});
    CHECK(heat_solution("quadratic").functional->value(0.0, d0) == 1.0);
    CHECK(heat_solution("linear").functional->value(0.0, d0) == 0.0);
    CHECK(heat_solution("cosine").functional->value(0.0, d0) == doctest::Approx(std::exp(-0.5)));
    CHECK(heat_solution("normal_cdf").functional->value(0.0, d0) == doctest::Approx(0.5));
    CHECK(heat_solution("logistic").functional->value(0.0, d0) == doctest::Approx(0.5));
    HeatOptions mc;
    mc.mc_draws = 20000;
    CHECK(heat_solution("logistic", "zero", mc).functional->value(0.0, d0) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK_THROWS_AS(heat_solution("nope"), ConfigurationError);
}

TEST_CASE("distortion functions") {
    for (double p : {0.0, 0.2, 0.5, 1.0}) CHECK(distortion_kappa("identity", p) == p);
    for (std::size_t n : {4u, 16u, 64u})
        for (double p = 0.0; p <= 1.0; p += 0.01)
            CHECK(std::abs(distortion_kappa("kinked_mollified", p, n) - distortion_kappa("kinked", p)) <= 0.75 / n + 1e-12);
    const TimeGrid g(1.0, 10);
    const PathMeasure d0 = PathMeasure::constant(g, 1, {0.0});
    CHECK(distortion_value("identity").functional->value(0.0, d0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK_THROWS_AS(distortion_kappa("nope", 0.5), ConfigurationError);
}

TEST_CASE("semilinear envelope and pairing rules") {
    CHECK(semilinear_b("zero", "neg_logcosh", 0.3) == doctest::Approx(0.3));
    CHECK(semilinear_b("zero", "neg_logcosh", -2.0) == doctest::Approx(2.0));
    // quadratic G1: sup_{|y|<=1} a y - y^2/2 = a^2/2 inside, |a| - 1/2 outside
    CHECK(semilinear_b("quadratic", "neg_logcosh", 0.5) == doctest::Approx(0.125));
    CHECK(semilinear_b("quadratic", "neg_logcosh", 2.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(semilinear_solution("neg_quadratic", "neg_logcosh"), ConfigurationError);
    CHECK_THROWS_AS(semilinear_solution("quadratic", "logcosh"), ConfigurationError);
    const ReferenceEntry e = semilinear_solution("quadratic", "neg_logcosh");
    const TimeGrid g(1.0, 50);
    const PathMeasure mu = random_walk_measure(g, 1, 40, 9);
    CHECK(std::abs(classical_residual(*e.functional, e.generator, 0.4, mu)) < 1e-6);
}

TEST_CASE("reference registry") {
    for (const auto& id : reference_ids()) CHECK(reference_by_id(id).functional != nullptr);
    CHECK(reference_by_id("heat:cosine:linear").id == "heat:cosine:linear");
    CHECK_THROWS_AS(reference_by_id("heat"), ConfigurationError);
    CHECK_THROWS_AS(reference_by_id("distortion:kinked_mollified:x"), ConfigurationError);
    CHECK_THROWS_AS(reference_by_id("unknown"), ConfigurationError);
}

TEST_CASE("state dependence instance has equal time-t marginals") {
    const StateDependenceInstance s = state_dependence_instance(10, 8);
    const std::size_t k = s.mu_a.grid().index_at_or_below(s.t);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < 10; ++i) {
        a.push_back(s.mu_a.value(i, k));
        b.push_back(s.mu_b.value(i, k));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK_FALSE(s.mu_a == s.mu_b);
    CHECK_THROWS_AS(state_dependence_instance(9, 8), ConfigurationError);
    CHECK_THROWS_AS(state_dependence_instance(10, 6), ConfigurationError);
    CHECK(counterexample_instances().size() == 3);
}
