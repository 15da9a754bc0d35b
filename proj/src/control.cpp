#include "mkv/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/stats.hpp"

namespace mkv {

namespace {

struct RunOutcome {
    PathMeasure paths;
    double running = 0.0;
};

RunOutcome run_replication(double t, const PathMeasure& init, const DynamicsSpec& dyn, const RunningCost& f,
                           const PiecewisePolicy& policy, std::uint64_t seed, std::optional<double> until) {
    SimulationOptions opt;
    opt.record_actions = static_cast<bool>(f);
    opt.until = until;
    SimulationResult res = simulate_mkv(t, init, dyn, &policy, init.count(), seed, opt);
    double running = 0.0;
    if (f) {
        const TimeGrid& g = res.paths.grid();
        const std::size_t n = res.paths.count(), M = g.steps();
        std::vector<double> a(n);
        std::vector<double> terms;
        for (std::size_t k = res.start_index; k < res.end_index; ++k) {
            for (std::size_t i = 0; i < n; ++i) a[i] = res.actions[i * M + k];
            terms.push_back(f(g.time(k), k, res.paths, a) * g.dt());
        }
        running = pairwise_sum(terms);
    }
    return {std::move(res.paths), running};
}

ValueEstimate summarize(std::vector<double> values, std::size_t particles, std::uint64_t seed, std::string label) {
    ValueEstimate v;
    const MeanStderr ms = mean_and_stderr(values);
    v.mean = ms.mean;
    v.se = ms.se;
    v.replications = values.size();
    v.particles = particles;
    v.seed = seed;
    v.policy = std::move(label);
    v.replicate_values = std::move(values);
    return v;
}

std::string table_label(const TablePolicySpace::Tables& tables, const std::vector<double>& actions) {
    std::ostringstream os;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (i) os << '|';
        for (std::size_t c = 0; c < tables[i].size(); ++c) os << (c ? "," : "") << actions[tables[i][c]];
    }
    return os.str();
}

}  // namespace

std::vector<PathMeasure> replicate_initials(const PathMeasure& mu, std::size_t N, std::size_t R, std::uint64_t seed) {
    if (R == 0) throw ConfigurationError("replications must be >= 1");
    if (N < R) throw ConfigurationError("particle count below the number of replications");
    const std::size_t per = N / R;
    std::vector<PathMeasure> out;
    out.reserve(R);
    for (std::size_t r = 0; r < R; ++r)
        out.push_back(mu.count() == per ? mu : bootstrap(mu, per, derive_seed(derive_seed(seed, 0x1A17), r)));
    return out;
}

ValueEstimate evaluate_policy_on(double t, const std::vector<PathMeasure>& inits, const DynamicsSpec& dyn,
                                 const RunningCost& f, const TerminalCost& g, const PiecewisePolicy& policy,
                                 std::uint64_t seed) {
    if (!g) throw ConfigurationError("evaluate_policy: terminal cost required");
    if (inits.empty()) throw ConfigurationError("evaluate_policy: no initial measures");
    std::vector<double> values(inits.size());
    for (std::size_t r = 0; r < inits.size(); ++r) {
        RunOutcome o = run_replication(t, inits[r], dyn, f, policy, derive_seed(seed, r), std::nullopt);
        values[r] = o.running + g(o.paths);
        if (!std::isfinite(values[r])) throw EvaluationError("evaluate_policy: non-finite cost");
    }
    return summarize(std::move(values), inits.front().count(), seed, policy.label());
}

ValueEstimate evaluate_policy(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                              const TerminalCost& g, const PiecewisePolicy& policy, std::size_t N, std::uint64_t seed,
                              const EvalOptions& opt) {
    return evaluate_policy_on(t, replicate_initials(mu, N, opt.replications, seed), dyn, f, g, policy, seed);
}

std::size_t IntervalLayout::cells() const {
    std::size_t c = 1;
    for (const auto& o : observations) c *= o.cells();
    return c;
}

void TablePolicySpace::validate() const {
    if (layouts.empty()) throw ConfigurationError("policy space: no intervals");
    if (breakpoints.size() != layouts.size() + 1) throw ConfigurationError("policy space: breakpoints must be intervals + 1");
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
        if (!(breakpoints[i] < breakpoints[i + 1])) throw ConfigurationError("policy space: breakpoints must increase");
    if (actions.empty() || actions.size() > kMaxActions) throw ConfigurationError("policy space: 1 to 9 actions required");
    for (std::size_t i = 0; i < layouts.size(); ++i) {
        const auto& L = layouts[i];
        if (L.observations.size() > kMaxObservations) throw ConfigurationError("policy space: more than 4 observations");
        if (L.cells() > kMaxCells) throw ConfigurationError("policy space: more than 9 cells in an interval");
        for (const auto& o : L.observations) {
            if (o.time > breakpoints[i] + 1e-12 || (o.reference && *o.reference > breakpoints[i] + 1e-12))
                throw ConfigurationError("policy space: observation after the interval start");
            if (!std::is_sorted(o.edges.begin(), o.edges.end())) throw ConfigurationError("policy space: edges must be sorted");
        }
    }
}

std::size_t TablePolicySpace::entries() const {
    std::size_t e = 0;
    for (const auto& L : layouts) e += L.cells();
    return e;
}

std::uint64_t TablePolicySpace::cardinality() const {
    std::uint64_t c = 1;
    const std::uint64_t a = actions.size();
    for (std::size_t e = 0; e < entries(); ++e) {
        if (c > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
        c *= a;
    }
    return c;
}

TablePolicySpace::Tables TablePolicySpace::decode(std::uint64_t index) const {
    Tables t(layouts.size());
    const std::uint64_t a = actions.size();
    for (std::size_t i = 0; i < layouts.size(); ++i) {
        t[i].resize(layouts[i].cells());
        for (auto& entry : t[i]) {
            entry = static_cast<std::size_t>(index % a);
            index /= a;
        }
    }
    return t;
}

PiecewisePolicy TablePolicySpace::make(const Tables& tables) const {
    if (tables.size() != layouts.size()) throw ShapeError("policy space: table count");
    std::vector<Feedback> fb;
    for (std::size_t i = 0; i < layouts.size(); ++i) {
        if (tables[i].size() != layouts[i].cells()) throw ShapeError("policy space: table size");
        for (auto e : tables[i])
            if (e >= actions.size()) throw ShapeError("policy space: action index");
        fb.push_back(TableFeedback{layouts[i].observations, tables[i], actions});
    }
    return PiecewisePolicy(breakpoints, std::move(fb), table_label(tables, actions));
}

TablePolicySpace TablePolicySpace::truncate(double t_end) const {
    TablePolicySpace out;
    out.actions = actions;
    out.breakpoints.push_back(breakpoints.front());
    for (std::size_t i = 0; i < layouts.size(); ++i) {
        if (breakpoints[i + 1] > t_end + 1e-12) break;
        out.layouts.push_back(layouts[i]);
        out.breakpoints.push_back(breakpoints[i + 1]);
    }
    if (out.layouts.empty() || std::abs(out.breakpoints.back() - t_end) > 1e-12)
        throw ConfigurationError("policy space: truncation time is not a breakpoint");
    return out;
}

SearchResult optimize_value_on(double t, const std::vector<PathMeasure>& inits, const DynamicsSpec& dyn,
                               const RunningCost& f, const TerminalCost& g, const TablePolicySpace& space,
                               std::size_t budget, std::uint64_t seed) {
    space.validate();
    if (budget == 0) throw ConfigurationError("optimize_value: budget must be >= 1");
    SearchResult best;
    bool have = false;
    std::map<TablePolicySpace::Tables, double> cache;
    auto consider = [&](const TablePolicySpace::Tables& tables) {
        auto it = cache.find(tables);
        if (it != cache.end()) return it->second;
        const PiecewisePolicy p = space.make(tables);
        ValueEstimate v = evaluate_policy_on(t, inits, dyn, f, g, p, seed);
        ++best.evaluations;
        cache.emplace(tables, v.mean);
        if (!have || v.mean > best.value.mean) {
            have = true;
            best.policy = p;
            best.tables = tables;
            best.value = v;
        }
        return cache[tables];
    };

    const std::uint64_t card = space.cardinality();
    if (card <= budget) {
        best.exhaustive = true;
        for (std::uint64_t idx = 0; idx < card; ++idx) consider(space.decode(idx));
        return best;
    }
    std::mt19937_64 rng(derive_seed(seed, 0xCA));
    std::uniform_int_distribution<std::size_t> pick(0, space.actions.size() - 1);
    TablePolicySpace::Tables cur = space.decode(0);
    for (std::size_t restart = 0; best.evaluations < budget; ++restart) {
        if (restart > 0) {
            if (restart > 8) break;
            for (auto& tab : cur)
                for (auto& e : tab) e = pick(rng);
        }
        double cur_v = consider(cur);
        bool improved = true;
        while (improved && best.evaluations < budget) {
            improved = false;
            for (std::size_t i = 0; i < cur.size() && best.evaluations < budget; ++i)
                for (std::size_t c = 0; c < cur[i].size() && best.evaluations < budget; ++c)
                    for (std::size_t a = 0; a < space.actions.size() && best.evaluations < budget; ++a) {
                        if (a == cur[i][c]) continue;
                        auto cand = cur;
                        cand[i][c] = a;
                        const double v = consider(cand);
                        if (v > cur_v) {
                            cur = std::move(cand);
                            cur_v = v;
                            improved = true;
                        }
                    }
        }
    }
    return best;
}

SearchResult optimize_value(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                            const TerminalCost& g, const TablePolicySpace& space, std::size_t budget, std::size_t N,
                            std::uint64_t seed, const EvalOptions& opt) {
    return optimize_value_on(t, replicate_initials(mu, N, opt.replications, seed), dyn, f, g, space, budget, seed);
}

SearchResult optimize_value(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                            const TerminalCost& g, const std::vector<PiecewisePolicy>& candidates, std::size_t N,
                            std::uint64_t seed, const EvalOptions& opt) {
    if (candidates.empty()) throw ConfigurationError("optimize_value: no candidates");
    const auto inits = replicate_initials(mu, N, opt.replications, seed);
    SearchResult best;
    best.exhaustive = true;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        ValueEstimate v = evaluate_policy_on(t, inits, dyn, f, g, candidates[c], seed);
        ++best.evaluations;
        if (c == 0 || v.mean > best.value.mean) {
            best.value = std::move(v);
            best.policy = candidates[c];
        }
    }
    return best;
}

DPPReport dpp_residual(double t1, double t2, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                       const TerminalCost& g, const PolicyClass& cls, std::size_t budget, std::size_t N,
                       std::uint64_t seed, const EvalOptions& opt) {
    if (!cls) throw ConfigurationError("dpp_residual: policy class required");
    if (!(t1 < t2)) throw ConfigurationError("dpp_residual: t1 < t2 required");
    const TablePolicySpace joint = cls(t1);
    joint.validate();
    const TablePolicySpace first = joint.truncate(t2);
    const TablePolicySpace second = cls(t2);
    second.validate();
    if (first.cardinality() > budget) throw ConfigurationError("dpp_residual: first-stage class exceeds the budget");

    const auto inits = replicate_initials(mu, N, opt.replications, seed);
    DPPReport rep;
    const SearchResult lhs = optimize_value_on(t1, inits, dyn, f, g, joint, budget, seed);
    rep.lhs = lhs.value.mean;
    rep.lhs_se = lhs.value.se;
    rep.lhs_policy = lhs.value.policy;

    const std::uint64_t seed2 = derive_seed(seed, 0xD992);
    bool have = false;
    const std::uint64_t card = first.cardinality();
    rep.first_stage_candidates = card;
    for (std::uint64_t idx = 0; idx < card; ++idx) {
        const PiecewisePolicy p1 = first.make(first.decode(idx));
        std::vector<PathMeasure> mid;
        std::vector<double> running;
        for (std::size_t r = 0; r < inits.size(); ++r) {
            RunOutcome o = run_replication(t1, inits[r], dyn, f, p1, derive_seed(seed, r), t2);
            mid.push_back(std::move(o.paths));
            running.push_back(o.running);
        }
        const SearchResult s2 = optimize_value_on(t2, mid, dyn, f, g, second, budget, seed2);
        std::vector<double> vals(inits.size());
        for (std::size_t r = 0; r < inits.size(); ++r) vals[r] = running[r] + s2.value.replicate_values[r];
        const MeanStderr ms = mean_and_stderr(vals);
        if (!have || ms.mean > rep.rhs) {
            have = true;
            rep.rhs = ms.mean;
            rep.rhs_se = ms.se;
        }
    }
    rep.residual = rep.lhs - rep.rhs;
    rep.se = std::sqrt(rep.lhs_se * rep.lhs_se + rep.rhs_se * rep.rhs_se);
    return rep;
}

PathMeasure two_atom_measure(const TimeGrid& grid, double a, double b, std::size_t N) {
    if (N == 0 || N % 2 != 0) throw ConfigurationError("two_atom_measure: N must be even and positive");
    std::vector<double> pts(N);
    for (std::size_t i = 0; i < N; ++i) pts[i] = i < N / 2 ? a : b;
    return PathMeasure::constant(grid, 1, pts);
}

namespace {

double variance_at_end(const PathMeasure& p) {
    const std::size_t M = p.grid().steps();
    std::vector<double> x(p.count()), x2(p.count());
    for (std::size_t i = 0; i < p.count(); ++i) {
        x[i] = p.value(i, M, 0);
        x2[i] = x[i] * x[i];
    }
    const double m = pairwise_mean(x);
    return pairwise_mean(x2) - m * m;
}

DynamicsSpec controlled_bm(std::string id, std::vector<double> actions) {
    DynamicsSpec d;
    d.id = std::move(id);
    d.dim = 1;
    d.drift = [](const StepContext&, std::size_t, double a, std::span<double> out) { out[0] = a; };
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    d.bound = 1.0;
    d.actions = ActionSet::finite(std::move(actions));
    return d;
}

std::size_t action_index(const std::vector<double>& actions, double a) {
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i] == a) return i;
    throw ConfigurationError("action not in the action set");
}

}  // namespace

OpenLoopGapReport openloop_gap_experiment(double horizon, double t, std::size_t N, std::uint64_t seed,
                                          const std::vector<double>& probe_times) {
    if (!(horizon - t > 1.0) || t < 0.0) throw ConfigurationError("openloop_gap: requires T - t > 1");
    OpenLoopGapReport r;
    r.horizon = horizon;
    r.t = t;
    const double gap = horizon - t;
    r.v1_bound = -gap * gap;
    const std::vector<double> A{-1.0, 0.0, 1.0};
    const DynamicsSpec dyn = controlled_bm("openloop_gap", A);
    const TerminalCost g = [](const PathMeasure& p) { return -variance_at_end(p); };
    const EvalOptions opt;
    const std::size_t per = N / opt.replications;
    const TimeGrid grid(horizon, static_cast<std::size_t>(std::llround(horizon / 0.01)));
    const PathMeasure mu = two_atom_measure(grid, gap, -gap, per + per % 2);
    {
        std::vector<double> x(mu.count()), x2(mu.count());
        for (std::size_t i = 0; i < mu.count(); ++i) {
            x[i] = mu.value(i, 0, 0);
            x2[i] = x[i] * x[i];
        }
        const double m = pairwise_mean(x);
        r.xi_variance = pairwise_mean(x2) - m * m;
    }
    TablePolicySpace closed;
    closed.breakpoints = {t, horizon};
    closed.layouts = {IntervalLayout{{Observation{t, std::nullopt, {0.0}}}}};
    closed.actions = A;
    // X_t < 0 -> +1, X_t >= 0 -> -1
    const PiecewisePolicy sign_policy = closed.make({{action_index(A, 1.0), action_index(A, -1.0)}});
    r.v2 = evaluate_policy(t, mu, dyn, nullptr, g, sign_policy, mu.count() * opt.replications, seed, opt);
    r.v2_zero_control = evaluate_policy(t, mu, dyn, nullptr, g, PiecewisePolicy::constant(t, horizon, 0.0),
                                        mu.count() * opt.replications, seed, opt);
    r.gap = r.v2.mean - r.v1_bound;
    r.gap_se = r.v2.se;

    for (double tau : probe_times) {
        if (!(tau > 0.0)) throw ConfigurationError("openloop_gap: probe times must be > 0");
        const std::size_t M = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tau / 0.0005)));
        const TimeGrid pg(tau, M);
        const PathMeasure zero = PathMeasure::constant(pg, 1, std::vector<double>(per, 0.0));
        TablePolicySpace space;
        space.actions = A;
        space.breakpoints = {0.0};
        for (double s = r.switch_spacing; s < tau - 1e-12; s += r.switch_spacing) space.breakpoints.push_back(s);
        space.breakpoints.push_back(tau);
        for (std::size_t i = 0; i + 1 < space.breakpoints.size(); ++i) {
            IntervalLayout L;
            if (i > 0) L.observations.push_back(Observation{space.breakpoints[i], 0.0, {0.0}});
            space.layouts.push_back(L);
        }
        const SearchResult s = optimize_value(0.0, zero, dyn, nullptr, g, space, 64, per * opt.replications,
                                              derive_seed(seed, 0x9B0E), opt);
        r.probes.push_back(ProbeRow{tau, s.value.mean, s.value.se, s.value.mean / tau});
    }
    return r;
}

double branch_value(double eps, double c_plus, double c_minus) {
    const double e2 = eps * eps;
    const double m2 = e2 + 0.5 * (c_plus * c_plus + c_minus * c_minus);
    auto m4c = [&](double c) { return e2 * e2 + 6.0 * e2 * c * c + 3.0 * c * c * c * c; };
    const double m4 = 0.5 * (m4c(c_plus) + m4c(c_minus));
    return m4 / 3.0 - m2 * m2;
}

DiscontinuityReport discontinuity_experiment(const std::vector<double>& eps, std::size_t N, std::uint64_t seed,
                                             std::size_t steps) {
    const std::vector<double> A{-1.0, 0.0, 1.0};
    DynamicsSpec dyn;
    dyn.id = "discontinuity";
    dyn.dim = 1;
    dyn.drift = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 0.0; };
    dyn.vol = [](const StepContext&, std::size_t, double a, std::span<double> out) { out[0] = 1.0 + a * a; };
    dyn.bound = 2.0;
    dyn.actions = ActionSet::finite(A);
    const TerminalCost g = [](const PathMeasure& p) {
        const std::size_t M = p.grid().steps();
        std::vector<double> x2(p.count()), x4(p.count());
        for (std::size_t i = 0; i < p.count(); ++i) {
            const double x = p.value(i, M, 0);
            x2[i] = x * x;
            x4[i] = x2[i] * x2[i];
        }
        const double m2 = pairwise_mean(x2);
        return pairwise_mean(x4) / 3.0 - m2 * m2;
    };
    const EvalOptions opt;
    std::size_t per = N / opt.replications;
    per += per % 2;
    const TimeGrid grid(1.0, steps);
    TablePolicySpace space;
    space.breakpoints = {0.0, 1.0};
    space.layouts = {IntervalLayout{{Observation{0.0, std::nullopt, {0.0}}}}};
    space.actions = A;

    DiscontinuityReport rep;
    rep.at_zero = optimize_value(0.0, two_atom_measure(grid, 0.0, 0.0, per), dyn, nullptr, g, space, 9,
                                 per * opt.replications, seed, opt)
                      .value;
    const PiecewisePolicy branch = space.make({{action_index(A, 0.0), action_index(A, 1.0)}});
    for (double e : eps) {
        const PathMeasure mu = two_atom_measure(grid, e, -e, per);
        DiscontinuityRow row;
        row.eps = e;
        row.value = optimize_value(0.0, mu, dyn, nullptr, g, space, 9, per * opt.replications, seed, opt).value;
        row.branch_oracle = branch_value(e, 2.0, 1.0);
        row.branch_sim = evaluate_policy(0.0, mu, dyn, nullptr, g, branch, per * opt.replications, seed, opt);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

StateDependenceReport state_dependence_check(double t, const PathMeasure& mu_a, const PathMeasure& mu_b,
                                             const DynamicsSpec& dyn, const RunningCost& f, const TerminalCost& g,
                                             const TablePolicySpace& space, std::size_t budget, std::size_t N,
                                             std::uint64_t seed, const EvalOptions& opt) {
    if (mu_a.count() != mu_b.count() || mu_a.dim() != mu_b.dim() || !(mu_a.grid() == mu_b.grid()))
        throw ConfigurationError("state_dependence_check: measures must share grid, dimension and size");
    const std::size_t k = mu_a.grid().index_at_or_below(t);
    for (std::size_t j = 0; j < mu_a.dim(); ++j) {
        std::vector<double> xa(mu_a.count()), xb(mu_b.count());
        for (std::size_t i = 0; i < mu_a.count(); ++i) {
            xa[i] = mu_a.value(i, k, j);
            xb[i] = mu_b.value(i, k, j);
        }
        std::sort(xa.begin(), xa.end());
        std::sort(xb.begin(), xb.end());
        for (std::size_t i = 0; i < xa.size(); ++i)
            if (std::abs(xa[i] - xb[i]) > 1e-9 * (1.0 + std::abs(xa[i])))
                throw ConfigurationError("state_dependence_check: time-t marginals differ");
    }
    StateDependenceReport r;
    r.a = optimize_value(t, mu_a, dyn, f, g, space, budget, N, seed, opt).value;
    r.b = optimize_value(t, mu_b, dyn, f, g, space, budget, N, derive_seed(seed, 0x5B), opt).value;
    r.difference = r.a.mean - r.b.mean;
    r.se = std::sqrt(r.a.se * r.a.se + r.b.se * r.b.se);
    r.consistent = std::abs(r.difference) <= 3.0 * r.se;
    return r;
}

double ObservedPath::at(double s) const {
    if (times.empty()) throw std::domain_error("ObservedPath: no knots");
    if (s <= times.front()) return values.front();
    if (s >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), s);
    const std::size_t j = static_cast<std::size_t>(it - times.begin());
    const double w = (s - times[j - 1]) / (times[j] - times[j - 1]);
    return (1.0 - w) * values[j - 1] + w * values[j];
}

double ObservedPath::integral(double a, double b) const {
    if (b <= a) return 0.0;
    std::vector<double> knots{a};
    for (double s : times)
        if (s > a && s < b) knots.push_back(s);
    knots.push_back(b);
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j)
        sum += 0.5 * (knots[j + 1] - knots[j]) * (at(knots[j]) + at(knots[j + 1]));
    return sum;
}

std::vector<ConvergenceRow> policy_class_convergence(double t, const PathMeasure& mu, const DynamicsSpec& dyn,
                                                     const RunningCost& f, const TerminalCost& g,
                                                     const HistoryFeedback& feedback, const std::vector<std::size_t>& ms,
                                                     std::size_t N, std::uint64_t seed, const EvalOptions& opt) {
    if (!feedback) throw ConfigurationError("policy_class_convergence: feedback required");
    const double T = mu.grid().horizon();
    auto make = [&](std::size_t m) {
        Feedback fb = [feedback, m, t](const PathView& pv) {
            const TimeGrid& gr = pv.grid();
            const std::size_t kt = gr.index_at_or_below(t);
            ObservedPath full;
            for (std::size_t k = 0; k <= kt; ++k) {
                full.times.push_back(gr.time(k));
                full.values.push_back(pv.value(k, 0));
            }
            if (m == 0) return feedback(full);
            ObservedPath proj;
            for (std::size_t j = 0; j <= m; ++j) {
                const double s = t * static_cast<double>(j) / static_cast<double>(m);
                proj.times.push_back(s);
                proj.values.push_back(full.at(s));
            }
            return feedback(proj);
        };
        return PiecewisePolicy({t, T}, {fb}, m == 0 ? "full" : "pi_" + std::to_string(m));
    };
    std::vector<ConvergenceRow> rows;
    const ValueEstimate full = evaluate_policy(t, mu, dyn, f, g, make(0), N, seed, opt);
    rows.push_back(ConvergenceRow{0, full, 0.0});
    for (std::size_t m : ms) {
        if (m == 0) throw ConfigurationError("policy_class_convergence: m must be >= 1");
        ValueEstimate v = evaluate_policy(t, mu, dyn, f, g, make(m), N, seed, opt);
        const double dist = std::abs(v.mean - full.mean);
        rows.push_back(ConvergenceRow{m, std::move(v), dist});
    }
    return rows;
}

}  // namespace mkv
