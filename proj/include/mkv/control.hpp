/**
 * @file control.hpp
 * @brief Monte-Carlo value estimation over closed-loop policy classes, the
 * dynamic-programming residual and the counterexample experiments.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mkv/path_measure.hpp"
#include "mkv/policy.hpp"
#include "mkv/simulate.hpp"

namespace mkv {

// Terminal cost of the simulated law: E[g(X, law)] for the empirical law.
using TerminalCost = std::function<double(const PathMeasure& paths)>;
// Running cost at grid step k: E[f(t_k, X, law, alpha_k)], actions_k per particle.
using RunningCost = std::function<double(double t, std::size_t k, const PathMeasure& paths, std::span<const double> actions)>;

struct ValueEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t replications = 0;
    std::size_t particles = 0;  // per replication
    std::uint64_t seed = 0;
    std::string policy;
    std::vector<double> replicate_values;
};

struct EvalOptions {
    std::size_t replications = 8;
};

// R initial measures of N/R particles each: copies of mu when it already has
// N/R particles, bootstrap resamples otherwise.
std::vector<PathMeasure> replicate_initials(const PathMeasure& mu, std::size_t N, std::size_t R, std::uint64_t seed);

// Replication r runs from inits[r] with seed derive_seed(seed, r).
ValueEstimate evaluate_policy_on(double t, const std::vector<PathMeasure>& inits, const DynamicsSpec& dyn,
                                 const RunningCost& f, const TerminalCost& g, const PiecewisePolicy& policy,
                                 std::uint64_t seed);

ValueEstimate evaluate_policy(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                              const TerminalCost& g, const PiecewisePolicy& policy, std::size_t N, std::uint64_t seed,
                              const EvalOptions& opt = {});

// Piecewise policies whose interval i looks up a table over its observations.
struct IntervalLayout {
    std::vector<Observation> observations;
    std::size_t cells() const;
};

struct TablePolicySpace {
    std::vector<double> breakpoints;      // t_0 < ... < t_n
    std::vector<IntervalLayout> layouts;  // one per interval
    std::vector<double> actions;

    using Tables = std::vector<std::vector<std::size_t>>;

    void validate() const;
    std::size_t intervals() const { return layouts.size(); }
    std::size_t entries() const;
    // saturates at UINT64_MAX
    std::uint64_t cardinality() const;
    Tables decode(std::uint64_t index) const;
    PiecewisePolicy make(const Tables& tables) const;
    // Space restricted to the intervals ending at or before `t_end`.
    TablePolicySpace truncate(double t_end) const;
};

struct SearchResult {
    PiecewisePolicy policy;
    TablePolicySpace::Tables tables;
    ValueEstimate value;
    std::size_t evaluations = 0;
    bool exhaustive = false;
};

// Maximizes the estimated value over the space. All candidates share the
// seed; ties go to the earlier candidate. Exhaustive when the cardinality fits
// the budget, coordinate ascent with restarts otherwise.
SearchResult optimize_value(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                            const TerminalCost& g, const TablePolicySpace& space, std::size_t budget, std::size_t N,
                            std::uint64_t seed, const EvalOptions& opt = {});

SearchResult optimize_value_on(double t, const std::vector<PathMeasure>& inits, const DynamicsSpec& dyn,
                               const RunningCost& f, const TerminalCost& g, const TablePolicySpace& space,
                               std::size_t budget, std::uint64_t seed);

// Best over an explicit enumeration.
SearchResult optimize_value(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                            const TerminalCost& g, const std::vector<PiecewisePolicy>& candidates, std::size_t N,
                            std::uint64_t seed, const EvalOptions& opt = {});

// The admissible class for a value problem started at t.
using PolicyClass = std::function<TablePolicySpace(double t_start)>;

struct DPPReport {
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double rhs_se = 0.0;
    double residual = 0.0;  // lhs - rhs
    double se = 0.0;
    std::size_t first_stage_candidates = 0;
    std::string lhs_policy;
};

// V(t1, mu) against sup_{alpha on [t1,t2)} [ running cost + V(t2, P^alpha_{t2}) ].
// Stage one reuses the left-hand seeds; stage two uses an independent stream.
DPPReport dpp_residual(double t1, double t2, const PathMeasure& mu, const DynamicsSpec& dyn, const RunningCost& f,
                       const TerminalCost& g, const PolicyClass& cls, std::size_t budget, std::size_t N,
                       std::uint64_t seed, const EvalOptions& opt = {});

// Two-atom measure (1/2 delta_a + 1/2 delta_b) on constant paths, N even.
PathMeasure two_atom_measure(const TimeGrid& grid, double a, double b, std::size_t N);

// ---- counterexample experiments ----

struct ProbeRow {
    double t = 0.0;
    double h = 0.0;  // estimated sup over the restricted class
    double se = 0.0;
    double ratio = 0.0;  // h / t
};

struct OpenLoopGapReport {
    double horizon = 0.0, t = 0.0;
    double v1_bound = 0.0;          // -(T - t)^2
    double xi_variance = 0.0;       // empirical Var(xi_t)
    ValueEstimate v2;               // alpha = -sign(X_t)
    ValueEstimate v2_zero_control;  // alpha = 0
    double gap = 0.0;               // v2 - v1_bound
    double gap_se = 0.0;
    std::vector<ProbeRow> probes;
    double switch_spacing = 0.05;
};

OpenLoopGapReport openloop_gap_experiment(double horizon, double t, std::size_t N, std::uint64_t seed,
                                          const std::vector<double>& probe_times = {0.01});

// g(eps) for the mixture 1/2 N(eps, c_plus^2) + 1/2 N(-eps, c_minus^2) with
// g = E[X^4]/3 - (E[X^2])^2.
double branch_value(double eps, double c_plus, double c_minus);

struct DiscontinuityRow {
    double eps = 0.0;
    ValueEstimate value;       // sup over the table class at mu_eps
    double branch_oracle = 0.0;
    ValueEstimate branch_sim;  // alpha = 1_{X_0 > 0}
};

struct DiscontinuityReport {
    ValueEstimate at_zero;  // V(0, delta_0)
    std::vector<DiscontinuityRow> rows;
};

DiscontinuityReport discontinuity_experiment(const std::vector<double>& eps, std::size_t N, std::uint64_t seed,
                                             std::size_t steps = 1);

struct StateDependenceReport {
    ValueEstimate a, b;
    double difference = 0.0;
    double se = 0.0;
    bool consistent = false;  // |difference| <= 3 se
};

// Requires identical time-t marginals; otherwise ConfigurationError.
StateDependenceReport state_dependence_check(double t, const PathMeasure& mu_a, const PathMeasure& mu_b,
                                             const DynamicsSpec& dyn, const RunningCost& f, const TerminalCost& g,
                                             const TablePolicySpace& space, std::size_t budget, std::size_t N,
                                             std::uint64_t seed, const EvalOptions& opt = {});

// Piecewise-linear observed path through given knots.
struct ObservedPath {
    std::vector<double> times, values;
    double at(double s) const;
    double integral(double a, double b) const;
};

using HistoryFeedback = std::function<double(const ObservedPath&)>;

struct ConvergenceRow {
    std::size_t m = 0;  // 0 for the full-path policy
    ValueEstimate value;
    double distance = 0.0;  // |value - full value|
};

// Values of the history feedback applied to the path seen on pi_m = {j t / m}
// versus the full grid, all with common random numbers.
std::vector<ConvergenceRow> policy_class_convergence(double t, const PathMeasure& mu, const DynamicsSpec& dyn,
                                                     const RunningCost& f, const TerminalCost& g,
                                                     const HistoryFeedback& feedback, const std::vector<std::size_t>& ms,
                                                     std::size_t N, std::uint64_t seed, const EvalOptions& opt = {});

}  // namespace mkv
