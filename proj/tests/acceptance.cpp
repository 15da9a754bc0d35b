// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: mkv_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mkv/closed_forms.hpp"
#include "mkv/control.hpp"
#include "mkv/coupling.hpp"
#include "mkv/lions.hpp"
#include "mkv/master.hpp"
#include "mkv/rng.hpp"
#include "mkv/simulate.hpp"
#include "mkv/stats.hpp"
#include "mkv/transport.hpp"

using namespace mkv;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double mixed_rel(double num, double exact) { return std::abs(num - exact) / std::max(std::abs(exact), 1.0); }

DynamicsSpec sine_drift() {
    DynamicsSpec d;
    d.id = "sine";
    d.drift = [](const StepContext& c, std::size_t i, double, std::span<double> out) { out[0] = std::sin(c.state.value(i, c.k, 0)); };
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    return d;
}

DynamicsSpec brownian() {
    DynamicsSpec d;
    d.id = "bm";
    d.drift = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 0.0; };
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    return d;
}

// Random-walk paths with N(0,1) starting points.
PathMeasure random_measure(const TimeGrid& g, std::size_t n, std::mt19937_64& rng, double x0_mean = 0.0, double x0_sd = 1.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    PathMeasure mu(g, 1, n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = x0_mean + x0_sd * nd(rng);
        for (std::size_t k = 0; k <= g.steps(); ++k) {
            if (k > 0) x += std::sqrt(g.dt()) * nd(rng);
            mu.value(i, k, 0) = x;
        }
    }
    return mu;
}

// ---- 1
Outcome ac1() {
    const auto f = example_quadratic();
    auto run = [&](std::size_t M, std::uint64_t seed) {
        const TimeGrid g(1.0, M);
        const PathMeasure mu = PathMeasure::constant(g, 1, {1.0});
        SimulationOptions opt;
        opt.record_diffusion = true;
        const auto res = simulate_mkv(0.0, mu, sine_drift(), nullptr, 20000, seed, opt);
        return ito_residual(*f, res, 1.0);
    };
    const ItoReport main = run(200, 11);
    const bool ok1 = std::abs(main.residual) <= std::max(0.02 * std::abs(main.lhs), 3.0 * main.se);
    std::vector<double> dts, res;
    for (std::size_t M : {8, 16, 32, 64}) {
        const ItoReport r = run(M, 12);
        dts.push_back(1.0 / static_cast<double>(M));
        res.push_back(std::abs(r.residual));
    }
    const double slope = loglog_slope(dts, res);
    const bool ok2 = std::abs(slope - 1.0) <= 0.3;
    return {ok1 && ok2, fmt("M=200: lhs=%.5f residual=%.3e rel=%.3e se=%.2e; refinement slope=%.3f (|r|=%.3e..%.3e)", main.lhs,
                            main.residual, main.relative, main.se, slope, res.front(), res.back())};
}

// ---- 2
Outcome ac2() {
    const auto f = example_quadratic();
    std::mt19937_64 rng(21);
    double worst1 = 0.0, worst2 = 0.0;
    std::size_t checked = 0;
    for (int m = 0; m < 10; ++m) {
        const TimeGrid g(1.0, 50);
        const PathMeasure mu = random_measure(g, 30, rng);
        const double t = g.time(10 + rng() % 41);
        const Eigen::MatrixXd Z = f->dmu(t, mu), G = f->dxdmu(t, mu);
        for (int r = 0; r < 10; ++r) {
            const std::size_t i = rng() % mu.count();
            worst1 = std::max(worst1, mixed_rel(lions_derivative(*f, t, mu, i)(0), Z(static_cast<Eigen::Index>(i), 0)));
            worst2 = std::max(worst2, mixed_rel(second_pathwise_derivative(*f, t, mu, i)(0, 0), G(static_cast<Eigen::Index>(i), 0)));
            ++checked;
        }
    }
    return {worst1 <= 1e-3 && worst2 <= 1e-3,
            fmt("%zu particles over 10 measures: max rel err dmu=%.2e dxdmu=%.2e", checked, worst1, worst2)};
}

// ---- 3
Outcome ac3() {
    const ReferenceEntry heat = heat_solution("quadratic");
    const TimeGrid g(1.0, 100);
    const PathMeasure delta0 = PathMeasure::constant(g, 1, {0.0});
    const auto sim = simulate_mkv(0.0, delta0, brownian(), nullptr, 100000, 31);
    std::vector<double> x2(sim.paths.count());
    for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = std::pow(sim.paths.value(i, g.steps(), 0), 2);
    const MeanStderr est = mean_and_stderr(x2);
    const bool ok_mc = std::abs(est.mean - 1.0) <= 3.0 * est.se && heat.functional->value(0.0, delta0) == 1.0;

    std::mt19937_64 rng(32);
    const NumericDerivatives numeric(heat.functional);
    double worst_closed = 0.0, worst_numeric = 0.0;
    for (int j = 0; j < 10; ++j) {
        const double t = g.time(5 + 9 * static_cast<std::size_t>(j));
        const PathMeasure mu = random_measure(g, 50, rng);
        worst_closed = std::max(worst_closed, std::abs(classical_residual(*heat.functional, heat.generator, t, mu)));
        worst_numeric = std::max(worst_numeric, std::abs(classical_residual(numeric, heat.generator, t, mu)));
    }
    const bool ok_res = worst_closed <= 5e-3 && worst_numeric <= 5e-3;
    return {ok_mc && ok_res, fmt("E[X_T^2]=%.5f se=%.1e (T=1); residual max closed=%.2e numeric=%.2e at 10 points", est.mean, est.se,
                                 worst_closed, worst_numeric)};
}

// ---- 4
Outcome ac4() {
    const ReferenceEntry dist = distortion_value("reverse_s");
    const NumericDerivatives numeric(dist.functional);
    const TimeGrid g(1.0, 100);
    std::mt19937_64 rng(41);
    double worst_closed = 0.0, worst_numeric = 0.0;
    for (int j = 0; j < 10; ++j) {
        const double t = g.time(5 + 9 * static_cast<std::size_t>(j));
        const PathMeasure mu = random_measure(g, 40, rng);
        worst_closed = std::max(worst_closed, std::abs(classical_residual(*dist.functional, dist.generator, t, mu)));
        worst_numeric = std::max(worst_numeric, std::abs(classical_residual(numeric, dist.generator, t, mu)));
    }
    // identity kappa against the plain expectation E[Phi(X_T)]
    const ReferenceEntry id = distortion_value("identity");
    const ReferenceEntry plain = heat_solution("normal_cdf");
    const PathMeasure mu = random_measure(g, 40, rng);
    const double t = 0.4;
    const double quad_gap = std::abs(id.functional->value(t, mu) - plain.functional->value(t, mu));
    const auto sim = simulate_mkv(t, mu, brownian(), nullptr, 80000, 42);
    std::vector<double> phi(sim.paths.count());
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = 0.5 * std::erfc(-sim.paths.value(i, g.steps(), 0) / std::sqrt(2.0));
    const MeanStderr mc = mean_and_stderr(phi);
    const double terminal_gap = std::abs(id.functional->value(1.0, sim.paths) - mc.mean);
    const double mc_gap = std::abs(id.functional->value(t, mu) - mc.mean);
    const bool ok = worst_closed <= 5e-3 && worst_numeric <= 5e-3 && quad_gap <= 1e-8 && terminal_gap <= 1e-12 &&
                    mc_gap <= 3.0 * mc.se;
    return {ok, fmt("reverse-S residual closed=%.2e numeric=%.2e; identity vs expectation: quadrature %.1e, "
                    "same stream %.1e, MC %.2e (se %.1e)",
                    worst_closed, worst_numeric, quad_gap, terminal_gap, mc_gap, mc.se)};
}

// ---- 5
Outcome ac5() {
    const DiscontinuityReport r = discontinuity_experiment({0.1}, 4000000, 51, 1);
    const auto& row = r.rows.front();
    const bool ok = std::abs(r.at_zero.mean) <= 0.05 && row.value.mean >= 2.0 &&
                    std::abs(row.branch_sim.mean - row.branch_oracle) <= 3.0 * row.branch_sim.se;
    return {ok, fmt("V(mu_0)=%.4f (se %.1e), V(mu_0.1)=%.4f (se %.1e), branch sim=%.4f oracle=%.6f (se %.1e), N=%zu",
                    r.at_zero.mean, r.at_zero.se, row.value.mean, row.value.se, row.branch_sim.mean, row.branch_oracle,
                    row.branch_sim.se, row.value.particles * row.value.replications)};
}

// ---- 6
Outcome ac6() {
    const OpenLoopGapReport r = openloop_gap_experiment(2.0, 0.0, 100000, 61, {0.01});
    const double gap = r.horizon - r.t;
    const auto& probe = r.probes.front();
    const bool ok = r.v2.mean >= -gap - 3.0 * r.v2.se && r.v1_bound == -4.0 && r.xi_variance == 4.0 &&
                    r.gap >= 2.0 - 3.0 * r.gap_se && std::abs(probe.ratio + 1.0) <= 0.05;
    return {ok, fmt("V2=%.4f (se %.1e), V1 bound=%.1f, gap=%.4f, alpha=0 value=%.4f, h(0.01)/0.01=%.4f (se %.1e)", r.v2.mean,
                    r.v2.se, r.v1_bound, r.gap, r.v2_zero_control.mean, probe.ratio, probe.se / probe.t)};
}

// ---- 7
Outcome ac7() {
    const ReferenceEntry sl = semilinear_solution("quadratic", "neg_logcosh");
    auto corrupted = std::make_shared<LambdaFunctional>(
        "corrupted", [f = sl.functional](double t, const PathMeasure& mu) { return f->value(t, mu) + 0.1 * (mu.grid().horizon() - t); },
        [f = sl.functional](double t, const PathMeasure& mu) { return f->dt(t, mu) - 0.1; },
        [f = sl.functional](double t, const PathMeasure& mu) { return f->dmu(t, mu); },
        [f = sl.functional](double t, const PathMeasure& mu) { return f->dxdmu(t, mu); });
    const double T = 0.25, delta = 0.002, eta = 0.01, L = 1.0;
    const TimeGrid g(T, 1000);
    std::mt19937_64 rng(71);
    std::size_t refutations = 0, samples_min = SIZE_MAX, sign_failures = 0;
    double corrupted_scalar = 0.0, worst_margin_sub = INFINITY, worst_margin_super = -INFINITY;
    bool corrupted_fails = true;
    for (int j = 0; j < 5; ++j) {
        const double t = g.time(100 + 200 * static_cast<std::size_t>(j));
        const PathMeasure mu = random_measure(g, 500, rng, 1.0, 0.5);
        SamplerConfig cfg;
        cfg.samples = 1000;
        cfg.seed = derive_seed(72, static_cast<std::uint64_t>(j));
        const JetSpec sub = jet_from_candidate(*sl.functional, t, mu, delta, L, JetSide::Sub, eta);
        const JetSpec sup = jet_from_candidate(*sl.functional, t, mu, delta, L, JetSide::Super, eta);
        const JetSpec bad = jet_from_candidate(*corrupted, t, mu, delta, L, JetSide::Sub, eta);
        const auto m = jet_membership_test_many(*sl.functional, {sub, sup}, t, mu, cfg);
        const auto mb = jet_membership_test(*corrupted, bad, t, mu, cfg);
        for (const auto& rep : m) {
            refutations += rep.refuted ? 1 : 0;
            samples_min = std::min(samples_min, rep.samples);
        }
        worst_margin_sub = std::min(worst_margin_sub, m[0].min_margin);
        worst_margin_super = std::max(worst_margin_super, m[1].max_margin);
        const auto vs = viscosity_decide(*sl.functional, sl.generator, mu, sub, JetSide::Sub, m[0]);
        const auto vp = viscosity_decide(*sl.functional, sl.generator, mu, sup, JetSide::Super, m[1]);
        sign_failures += (vs.status != ViscosityStatus::Passed) + (vp.status != ViscosityStatus::Passed);
        const auto vb = viscosity_decide(*corrupted, sl.generator, mu, bad, JetSide::Sub, mb);
        corrupted_fails = corrupted_fails && vb.status == ViscosityStatus::Failed && std::abs(vb.scalar + 0.1) <= 0.02;
        if (j == 2) corrupted_scalar = vb.scalar;
    }
    const bool ok = refutations == 0 && sign_failures == 0 && samples_min >= 1000 && corrupted_fails;
    return {ok, fmt("refutations=%zu over 5 points x 2 sides (>= %zu samples each, min sub margin %.2e, max super margin %.2e), "
                    "sign failures=%zu; corrupted sub scalar=%.4f",
                    refutations, samples_min, worst_margin_sub, worst_margin_super, sign_failures, corrupted_scalar)};
}

// ---- 8
Outcome ac8() {
    std::mt19937_64 rng(81);
    std::size_t mismatches = 0;
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng() % 8;
        const TimeGrid g(1.0, 4);
        const PathMeasure a = random_measure(g, n, rng), b = random_measure(g, n, rng);
        const auto c = sup_cost_matrix(a, b);
        const auto perm = solve_assignment(c, n);
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), 0);
        double best = INFINITY;
        do best = std::min(best, assignment_cost(c, n, p));
        while (std::next_permutation(p.begin(), p.end()));
        if (assignment_cost(c, n, perm) != best) ++mismatches;
    }
    std::size_t asym = 0, triangle = 0, self = 0;
    double worst_tri = -INFINITY;
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng() % 8;
        const TimeGrid g(1.0, 4);
        const PathMeasure a = random_measure(g, n, rng), b = random_measure(g, n, rng), c = random_measure(g, n, rng);
        const double ab = wasserstein2(a, b).cost, ba = wasserstein2(b, a).cost;
        const double bc = wasserstein2(b, c).cost, ac = wasserstein2(a, c).cost;
        asym += ab != ba;
        self += wasserstein2(a, a).cost != 0.0;
        worst_tri = std::max(worst_tri, ac - ab - bc);
        triangle += ac > ab + bc + 1e-9;
    }
    return {mismatches == 0 && asym == 0 && triangle == 0 && self == 0,
            fmt("assignment vs brute force mismatches=%zu/200; symmetry violations=%zu, triangle violations=%zu "
                "(max excess %.2e), nonzero self-distance=%zu",
                mismatches, asym, triangle, worst_tri, self)};
}

// ---- 9
Outcome ac9() {
    const double t1 = 0.0, t2 = 1.0, T = 2.0;
    const TimeGrid g(T, 40);
    const std::size_t N = 16000;
    const PathMeasure mu = two_atom_measure(g, 2.0, -2.0, N / 8);
    const auto inst = counterexample_instances().front();
    const std::vector<double> A{-1.0, 0.0, 1.0};
    const std::vector<double> mid_edges{-0.5, 0.5};
    PolicyClass correct = [&](double ts) {
        TablePolicySpace s;
        s.actions = A;
        if (ts < t2 - 1e-12) {
            s.breakpoints = {ts, t2, T};
            s.layouts = {IntervalLayout{{Observation{ts, std::nullopt, {0.0}}}}, IntervalLayout{{Observation{t2, std::nullopt, mid_edges}}}};
        } else {
            s.breakpoints = {ts, T};
            s.layouts = {IntervalLayout{{Observation{ts, std::nullopt, mid_edges}}}};
        }
        return s;
    };
    PolicyClass broken = [&](double ts) {
        TablePolicySpace s = correct(ts);
        // every interval sees only the state at the start of the problem
        for (auto& L : s.layouts) L.observations = {Observation{ts, std::nullopt, ts < t2 - 1e-12 ? std::vector<double>{0.0} : mid_edges}};
        return s;
    };
    const DPPReport ok_rep = dpp_residual(t1, t2, mu, inst.dynamics, nullptr, inst.terminal, correct, 243, N, 91);
    const DPPReport bad_rep = dpp_residual(t1, t2, mu, inst.dynamics, nullptr, inst.terminal, broken, 243, N, 91);
    const bool ok = std::abs(ok_rep.residual) <= 3.0 * ok_rep.se && bad_rep.residual < -3.0 * bad_rep.se;
    return {ok, fmt("correct class: lhs=%.4f rhs=%.4f residual=%.4f se=%.4f; restricted class: lhs=%.4f rhs=%.4f residual=%.4f se=%.4f",
                    ok_rep.lhs, ok_rep.rhs, ok_rep.residual, ok_rep.se, bad_rep.lhs, bad_rep.rhs, bad_rep.residual, bad_rep.se)};
}

// ---- 10
Outcome ac10() {
    std::mt19937_64 rng(101);
    std::size_t recon_fail = 0, dist_fail = 0, marg_fail = 0;
    double worst_excess = -INFINITY;
    const double eps = 1e-3;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 4 + rng() % 37;
        const TimeGrid g(1.0, 8);
        const PathMeasure mu = random_measure(g, n, rng), nu = random_measure(g, n, rng);
        const std::vector<double> pi{0.0, 0.25, 0.5};
        const CoupledSystem cs = build_coupling(mu, nu, pi, eps, 0.1, 100 + static_cast<std::uint64_t>(inst));
        const Eigen::MatrixXd eta_pi = pi_marginals(cs.eta, cs.pi_index);
        const Eigen::MatrixXd xi_pi = pi_marginals(cs.xi, cs.pi_index);
        const Eigen::MatrixXd rec = reconstruct_xi_pi(cs.lookup, eta_pi, cs.btilde, 0.1, cs.substeps);
        if (!(rec == xi_pi)) ++recon_fail;
        std::vector<std::size_t> src = cs.xi_source;
        std::sort(src.begin(), src.end());
        for (std::size_t i = 0; i < n; ++i) marg_fail += src[i] != i;
        worst_excess = std::max(worst_excess, cs.distance - cs.optimal_distance);
        if (cs.distance > cs.optimal_distance + eps) ++dist_fail;
    }
    return {recon_fail == 0 && dist_fail == 0 && marg_fail == 0,
            fmt("50 instances: reconstruction failures=%zu, marginal failures=%zu, distance > optimal+eps=%zu (max excess %.2e)",
                recon_fail, marg_fail, dist_fail, worst_excess)};
}

// ---- 11
Outcome ac11() {
    const StateDependenceInstance inst = state_dependence_instance(5000, 20);
    const std::size_t N = 40000;
    const auto pos = state_dependence_check(inst.t, inst.mu_a, inst.mu_b, inst.dynamics, nullptr, inst.terminal, inst.space, 81,
                                            N, 111);
    const auto neg = state_dependence_check(inst.t, inst.mu_a, inst.mu_b, inst.dynamics, nullptr, inst.path_terminal, inst.space,
                                            81, N, 111);
    return {pos.consistent && !neg.consistent,
            fmt("positive control: VA=%.4f VB=%.4f diff=%.4f se=%.4f; path-dependent control: diff=%.4f se=%.4f (detected=%s)",
                pos.a.mean, pos.b.mean, pos.difference, pos.se, neg.difference, neg.se, neg.consistent ? "no" : "yes")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"functional Ito residual and refinement slope", ac1},
        {"derivative oracles", ac2},
        {"heat equation value and residual", ac3},
        {"distortion residual and identity equivalence", ac4},
        {"discontinuity counterexample", ac5},
        {"open-loop gap and small-t probe", ac6},
        {"viscosity checker and corrupted candidate", ac7},
        {"Wasserstein oracle and pseudometric axioms", ac8},
        {"dynamic programming residual", ac9},
        {"coupling construction", ac10},
        {"state dependence controls", ac11},
    };
    std::set<int> only;
    for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
    int failures = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const int id = static_cast<int>(c + 1);
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] AC%d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[c].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
