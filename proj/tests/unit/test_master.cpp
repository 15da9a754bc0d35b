#include <doctest.h>

#include <cmath>

#include "mkv/closed_forms.hpp"
#include "mkv/master.hpp"
#include "mkv/simulate.hpp"

using namespace mkv;

TEST_CASE("heat generators are Lipschitz and monotone") {
    const ReferenceEntry heat = heat_solution("cosine", "linear");
    const TimeGrid g(1.0, 20);
    const PathMeasure mu = random_walk_measure(g, 1, 20, 1);
    const GeneratorAudit a = audit_generator(heat.generator, 0.3, mu, 50, 2);
    CHECK(a.trials == 50);
    CHECK(a.lipschitz_violations == 0);
    CHECK(a.monotonicity_violations == 0);
    CHECK(std::abs(classical_residual(*heat.functional, heat.generator, 0.3, mu)) < 1e-6);
}

TEST_CASE("exponential change keeps solutions solutions") {
    const ReferenceEntry heat = heat_solution("quadratic");
    const TimeGrid g(1.0, 20);
    const PathMeasure mu = random_walk_measure(g, 1, 20, 3);
    const auto [V, G] = exponential_change(heat.functional, heat.generator, 0.7);
    CHECK(V->value(0.4, mu) == doctest::Approx(std::exp(0.28) * heat.functional->value(0.4, mu)));
    CHECK(std::abs(classical_residual(*V, G, 0.4, mu, 0.7)) < 1e-9);
    CHECK(std::abs(classical_residual(*V, G, 0.4, mu, 0.0)) > 0.1);
}

TEST_CASE("paraboloid passes through y at the base point") {
    const ReferenceEntry heat = heat_solution("quadratic");
    const TimeGrid g(1.0, 20);
    const PathMeasure mu = random_walk_measure(g, 1, 10, 4);
    const JetSpec jet = jet_from_candidate(*heat.functional, 0.5, mu, 0.1, 1.0, JetSide::Sub, 0.0);
    CHECK(paraboloid_eval(jet, 0.5, mu) == doctest::Approx(heat.functional->value(0.5, mu)));
    CHECK(paraboloid_functional(jet)->value(0.5, mu) == doctest::Approx(jet.y));
}

TEST_CASE("jet membership accepts slack jets and refutes wrong ones") {
    const ReferenceEntry lin = heat_solution("linear");
    const TimeGrid g(1.0, 200);
    const PathMeasure mu = random_walk_measure(g, 1, 50, 5);
    SamplerConfig cfg;
    cfg.samples = 100;
    const JetSpec sub = jet_from_candidate(*lin.functional, 0.5, mu, 0.05, 1.0, JetSide::Sub, 0.1);
    const JetSpec super = jet_from_candidate(*lin.functional, 0.5, mu, 0.05, 1.0, JetSide::Super, 0.1);
    CHECK_FALSE(jet_membership_test(*lin.functional, sub, 0.5, mu, cfg).refuted);
    CHECK_FALSE(jet_membership_test(*lin.functional, super, 0.5, mu, cfg).refuted);
    JetSpec wrong = sub;
    wrong.v = -1.0;
    const MembershipReport r = jet_membership_test(*lin.functional, wrong, 0.5, mu, cfg);
    CHECK(r.refuted);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->margin < 0.0);
    const ViscosityReport vr = viscosity_check(*lin.functional, lin.generator, 0.5, mu, wrong, JetSide::Sub, cfg);
    CHECK(vr.status == ViscosityStatus::JetRefuted);
}

TEST_CASE("sign test on candidate jets") {
    const ReferenceEntry heat = heat_solution("quadratic");
    const TimeGrid g(1.0, 200);
    const PathMeasure mu = random_walk_measure(g, 1, 50, 6);
    SamplerConfig cfg;
    cfg.samples = 50;
    for (JetSide side : {JetSide::Sub, JetSide::Super}) {
        const JetSpec jet = jet_from_candidate(*heat.functional, 0.5, mu, 0.02, 1.0, side, 0.05);
        const ViscosityReport r = viscosity_check(*heat.functional, heat.generator, 0.5, mu, jet, side, cfg);
        CHECK(r.status == ViscosityStatus::Passed);
        CHECK(r.scalar == doctest::Approx(side == JetSide::Sub ? 0.05 : -0.05).epsilon(1e-6));
    }
}
