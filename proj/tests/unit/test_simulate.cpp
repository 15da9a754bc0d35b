#include <doctest.h>

#include <cmath>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/policy.hpp"
#include "mkv/simulate.hpp"
#include "mkv/stats.hpp"

using namespace mkv;

namespace {

DynamicsSpec controlled_bm() {
    DynamicsSpec d;
    d.id = "controlled";
    d.drift = [](const StepContext&, std::size_t, double a, std::span<double> out) { out[0] = a; };
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    d.actions = ActionSet::finite({-1.0, 0.0, 1.0});
    return d;
}

}  // namespace

TEST_CASE("brownian terminal variance and determinism") {
    const TimeGrid g(1.0, 20);
    const PathMeasure delta0 = PathMeasure::constant(g, 1, {0.0});
    const auto a = simulate_mkv(0.0, delta0, controlled_bm(), nullptr, 20000, 3);
    const auto b = simulate_mkv(0.0, delta0, controlled_bm(), nullptr, 20000, 3);
    CHECK(a.paths == b.paths);
    std::vector<double> x2(a.paths.count());
    for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = std::pow(a.paths.value(i, 20), 2);
    const MeanStderr m = mean_and_stderr(x2);
    CHECK(std::abs(m.mean - 1.0) < 4.0 * m.se);
}

TEST_CASE("simulation from t keeps the history and freezes after until") {
    const TimeGrid g(1.0, 10);
    const PathMeasure mu = random_walk_measure(g, 1, 4, 7);
    SimulationOptions opt;
    opt.until = 0.7;
    const auto r = simulate_mkv(0.3, mu, controlled_bm(), nullptr, 4, 1, opt);
    CHECK(r.start_index == 3);
    CHECK(r.end_index == 7);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t k = 0; k <= 3; ++k) CHECK(r.paths.value(i, k) == mu.value(i, k));
        for (std::size_t k = 8; k <= 10; ++k) CHECK(r.paths.value(i, k) == r.paths.value(i, 7));
    }
}

TEST_CASE("constant policy shifts the mean") {
    const TimeGrid g(1.0, 10);
    const PathMeasure delta0 = PathMeasure::constant(g, 1, {0.0});
    const PiecewisePolicy up = PiecewisePolicy::constant(0.0, 1.0, 1.0);
    const auto r = simulate_mkv(0.0, delta0, controlled_bm(), &up, 20000, 5);
    CHECK(mean_at(r.paths, 10) == doctest::Approx(1.0).epsilon(0.03));
    const PiecewisePolicy bad = PiecewisePolicy::constant(0.0, 1.0, 0.5);
    CHECK_THROWS_AS(simulate_mkv(0.0, delta0, controlled_bm(), &bad, 10, 5), std::domain_error);
}

TEST_CASE("table feedback bins observations") {
    const TimeGrid g(1.0, 4);
    const PathMeasure mu = PathMeasure::constant(g, 1, {-1.0, 0.2, 3.0});
    const Observation o{0.5, std::nullopt, {0.0, 1.0}};
    CHECK(o.cells() == 3);
    CHECK(o.cell(mu.path(0)) == 0);
    CHECK(o.cell(mu.path(1)) == 1);
    CHECK(o.cell(mu.path(2)) == 2);
    TableFeedback tf{{o}, {2, 0, 1}, {-1.0, 0.0, 1.0}};
    CHECK(tf(mu.path(0)) == 1.0);
    CHECK(tf(mu.path(1)) == -1.0);
    CHECK(tf(mu.path(2)) == 0.0);
}

TEST_CASE("action sets") {
    const ActionSet f = ActionSet::finite({0.0, 1.0});
    CHECK(f.contains(1.0));
    CHECK_FALSE(f.contains(0.5));
    const ActionSet i = ActionSet::interval(-1.0, 1.0, 5);
    CHECK(i.contains(0.3));
    CHECK(i.values.size() == 5);
}

TEST_CASE("sampled L-bounded laws respect the bounds") {
    const TimeGrid g(1.0, 100);
    const PathMeasure mu = random_walk_measure(g, 1, 50, 3);
    BoundAudit audit;
    const auto ms = sample_PL(0.2, mu, 1.0, 14, GeneratorFamily::standard(), 4, &audit);
    CHECK(ms.size() == 14);
    CHECK(audit.clamps.load() == 0);
    CHECK(audit.evaluations.load() > 0);
    for (const auto& m : ms) {
        CHECK(m.count() == mu.count());
        for (std::size_t i = 0; i < m.count(); ++i)
            for (std::size_t k = 0; k <= 20; ++k) CHECK(m.value(i, k) == mu.value(i, k));
    }
    const MomentReport r = moment_bound_check(ms, 0.2, 1.0, 4, {0.0125, 0.025, 0.05, 0.1, 0.2});
    CHECK(r.bound_holds);
    CHECK(r.fitted_constant <= r.bound_constant);
    CHECK(r.fitted_exponent > 1.5);
    CHECK(moment_bound_constant(1.0, 4, 1.0) > 0.0);
}

TEST_CASE("member dynamics clamp out-of-bound coefficients") {
    GeneratorMember m;
    m.kind = GeneratorKind::ConstantDrift;
    m.drift = 5.0;
    BoundAudit audit;
    const TimeGrid g(1.0, 10);
    const PathMeasure mu = PathMeasure::constant(g, 1, {0.0});
    const PathMeasure p = sample_PL_member(0.0, mu, 1.0, m, 1, &audit);
    CHECK(audit.clamps.load() > 0);
    CHECK(p.value(0, 10) == doctest::Approx(1.0));
}
