#include <doctest.h>

#include <cmath>

#include "mkv/control.hpp"
#include "mkv/errors.hpp"

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

TablePolicySpace two_interval_space() {
    TablePolicySpace s;
    s.actions = {-1.0, 0.0, 1.0};
    s.breakpoints = {0.0, 0.5, 1.0};
    s.layouts = {IntervalLayout{{Observation{0.0, std::nullopt, {0.0}}}}, IntervalLayout{{Observation{0.5, std::nullopt, {0.0}}}}};
    return s;
}

}  // namespace

TEST_CASE("policy space enumeration") {
    const TablePolicySpace s = two_interval_space();
    s.validate();
    CHECK(s.entries() == 4);
    CHECK(s.cardinality() == 81);
    const auto t1 = s.decode(1);
    CHECK(t1[0][0] == 1);
    CHECK(t1[0][1] == 0);
    CHECK(t1[1][1] == 0);
    const auto last = s.decode(80);
    for (const auto& tab : last)
        for (auto e : tab) CHECK(e == 2);
    CHECK(s.truncate(0.5).intervals() == 1);
    CHECK_THROWS_AS(s.truncate(0.7), ConfigurationError);
    TablePolicySpace bad = s;
    bad.layouts[0].observations[0].time = 0.3;
    CHECK_THROWS_AS(bad.validate(), ConfigurationError);
}

TEST_CASE("value search finds the constant maximizer") {
    const TimeGrid g(1.0, 10);
    const PathMeasure d0 = PathMeasure::constant(g, 1, {0.0});
    TerminalCost mean_T = [](const PathMeasure& p) { return mean_at(p, p.grid().steps()); };
    const SearchResult r = optimize_value(0.0, d0, controlled_bm(), nullptr, mean_T, two_interval_space(), 100, 800, 3);
    CHECK(r.exhaustive);
    CHECK(r.evaluations == 81);
    CHECK(r.value.mean == doctest::Approx(1.0).epsilon(0.1));
    // X_0 = 0 lands in cell 1 of the first table
    CHECK(r.tables[0][1] == 2);
    const SearchResult h = optimize_value(0.0, d0, controlled_bm(), nullptr, mean_T, two_interval_space(), 20, 800, 3);
    CHECK_FALSE(h.exhaustive);
    CHECK(h.value.mean == doctest::Approx(r.value.mean));
}

TEST_CASE("evaluation is reproducible and replicated") {
    const TimeGrid g(1.0, 10);
    const PathMeasure d0 = PathMeasure::constant(g, 1, {0.0});
    TerminalCost sq = [](const PathMeasure& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.count(); ++i) s += std::pow(p.value(i, p.grid().steps()), 2);
        return s / static_cast<double>(p.count());
    };
    const PiecewisePolicy zero = PiecewisePolicy::constant(0.0, 1.0, 0.0);
    const ValueEstimate a = evaluate_policy(0.0, d0, controlled_bm(), nullptr, sq, zero, 4000, 9);
    const ValueEstimate b = evaluate_policy(0.0, d0, controlled_bm(), nullptr, sq, zero, 4000, 9);
    CHECK(a.mean == b.mean);
    CHECK(a.replications == 8);
    CHECK(a.replicate_values.size() == 8);
    CHECK(std::abs(a.mean - 1.0) < 4.0 * a.se);
    const auto inits = replicate_initials(d0, 80, 8, 1);
    CHECK(inits.size() == 8);
    CHECK(inits[0].count() == 10);
    CHECK_THROWS_AS(replicate_initials(d0, 4, 8, 1), ConfigurationError);
}

TEST_CASE("two-atom measures and branch oracle") {
    const TimeGrid g(1.0, 4);
    const PathMeasure m = two_atom_measure(g, 1.0, -1.0, 6);
    CHECK(m.count() == 6);
    CHECK(mean_at(m, 0) == 0.0);
    CHECK_THROWS_AS(two_atom_measure(g, 1.0, -1.0, 5), ConfigurationError);
    for (double e : {0.0, 0.1, 0.5}) CHECK(branch_value(e, 1.0, 1.0) == doctest::Approx(-2.0 / 3.0 * std::pow(e, 4)));
}

TEST_CASE("observed paths interpolate linearly") {
    const ObservedPath p{{0.0, 1.0, 2.0}, {0.0, 2.0, 0.0}};
    CHECK(p.at(0.5) == doctest::Approx(1.0));
    CHECK(p.at(1.5) == doctest::Approx(1.0));
    CHECK(p.integral(0.0, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("state dependence check rejects different marginals") {
    const TimeGrid g(1.0, 4);
    const PathMeasure a = PathMeasure::constant(g, 1, {1.0, -1.0}), b = PathMeasure::constant(g, 1, {2.0, -1.0});
    TerminalCost zero = [](const PathMeasure&) { return 0.0; };
    CHECK_THROWS_AS(state_dependence_check(0.5, a, b, controlled_bm(), nullptr, zero, two_interval_space().truncate(0.5), 10, 16, 1),
                    ConfigurationError);
}
