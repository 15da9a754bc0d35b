#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/io.hpp"
#include "mkv/path_measure.hpp"
#include "mkv/rng.hpp"
#include "mkv/simulate.hpp"
#include "mkv/stats.hpp"

using namespace mkv;

TEST_CASE("counter rng is a pure function of its key") {
    CHECK(counter_uniform(5, 1, 2, 3) == counter_uniform(5, 1, 2, 3));
    CHECK(counter_uniform(5, 1, 2, 3) != counter_uniform(6, 1, 2, 3));
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    std::vector<double> z(200000);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = counter_normal(9, i, 0, 0);
    const MeanStderr m = mean_and_stderr(z);
    CHECK(std::abs(m.mean) < 4.0 * m.se);
    double s2 = 0.0;
    for (double x : z) s2 += x * x;
    CHECK(s2 / static_cast<double>(z.size()) == doctest::Approx(1.0).epsilon(0.01));
    for (std::size_t i = 0; i < 1000; ++i) {
        const double u = counter_uniform(3, i, 0, 0);
        CHECK((u > 0.0 && u < 1.0));
    }
}

TEST_CASE("pairwise summation and fits") {
    std::vector<double> x(1000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i + 1);
    CHECK(pairwise_sum(x) == 500500.0);
    std::vector<double> tiny(1 << 20, 0.1);
    CHECK(std::abs(pairwise_sum(tiny) - 104857.6) < 1e-9);
    CHECK(pairwise_mean(std::vector<double>{2.0, 4.0}) == 3.0);
    const MeanStderr m = mean_and_stderr(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(m.mean == 2.0);
    CHECK(m.se == doctest::Approx(1.0 / std::sqrt(3.0)));
    const std::vector<double> xs{1.0, 2.0, 4.0, 8.0}, ys{3.0, 12.0, 48.0, 192.0};
    CHECK(loglog_slope(xs, ys) == doctest::Approx(2.0));
    const LineFit f = fit_line(std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{1.0, 3.0, 5.0});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
}

TEST_CASE("time grid indexing") {
    const TimeGrid g(2.0, 8);
    CHECK(g.dt() == 0.25);
    CHECK(g.time(8) == 2.0);
    CHECK(g.index_at_or_below(0.5) == 2);
    CHECK(g.index_at_or_below(0.6) == 2);
    CHECK(g.index_at_or_below(2.0) == 8);
    CHECK_THROWS_AS(g.index_at_or_below(2.5), std::domain_error);
    CHECK_THROWS_AS(g.index_at_or_below(-0.1), std::domain_error);
}

TEST_CASE("stopping freezes paths after t") {
    const TimeGrid g(1.0, 10);
    const PathMeasure mu = random_walk_measure(g, 2, 5, 17);
    const PathMeasure s = mu.stop(0.35);
    for (std::size_t i = 0; i < mu.count(); ++i)
        for (std::size_t k = 0; k <= 10; ++k)
            for (std::size_t j = 0; j < 2; ++j) CHECK(s.value(i, k, j) == mu.value(i, std::min<std::size_t>(k, 3), j));
    CHECK(s.stop(0.35) == s);
    CHECK(mu.stop_index(3) == s);
    const PathView v = mu.path(1, 3);
    CHECK(v.last() == 3);
    const SamplePath p = mu.sample(2);
    CHECK(path_sup_distance(p, p) == 0.0);
}

TEST_CASE("constant measures and means") {
    const TimeGrid g(1.0, 4);
    const PathMeasure mu = PathMeasure::constant(g, 1, {1.0, 2.0, 6.0});
    CHECK(mu.count() == 3);
    CHECK(mean_at(mu, 4) == 3.0);
    CHECK(mu.value(2, 3) == 6.0);
}

TEST_CASE("path measure text round trip is exact") {
    const TimeGrid g(0.7, 6);
    const PathMeasure mu = random_walk_measure(g, 2, 4, 99, 0.3, 1.7);
    std::stringstream ss;
    write_path_measure(ss, mu);
    const PathMeasure back = read_path_measure(ss);
    CHECK(back == mu);
    std::stringstream bad("# not-a-path-measure\n1 1 1 1\n");
    CHECK_THROWS(read_path_measure(bad));
}
