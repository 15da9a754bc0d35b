/**
 * @file closed_forms.hpp
 * @brief Reference functionals with exact derivative bundles, their
 * generators, and the counterexample instances.
 */
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mkv/control.hpp"
#include "mkv/functional.hpp"
#include "mkv/master.hpp"

namespace mkv {

// Probabilists' Gauss-Hermite rule: sum_k w_k h(z_k) ~ E[h(Z)], Z ~ N(0,1).
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussRule gauss_hermite_normal(std::size_t n);

// f(t, mu) = E[A_t I_t] - E[A_t^2] E[I_t], A_t = X_t, I_t = int_0^t X_s ds (d = 1).
FunctionalPtr example_quadratic();

struct ReferenceEntry {
    std::string id;
    FunctionalPtr functional;
    GeneratorSpec generator;
    std::map<std::string, double> metadata;
};

struct HeatOptions {
    std::size_t hermite_nodes = 96;
    std::size_t mc_draws = 0;  // > 0 switches the logistic terminal to antithetic Monte Carlo
    std::uint64_t mc_seed = 7;
};

// V = E[g(X_T) + int_t^T f(s, X_s) ds] under dX = dW, with
// g in {linear, quadratic, cosine, normal_cdf, logistic, running_mean} and
// f in {zero, linear, cosine}.
ReferenceEntry heat_solution(const std::string& g_id, const std::string& f_id = "zero", const HeatOptions& opt = {});

// kappa in {identity, reverse_s, kinked, kinked_mollified}; n sets the
// mollification 1/n (kinked_mollified only).
double distortion_kappa(const std::string& kappa_id, double p, std::size_t n = 0);

// V = int_0^1 kappa(P(Phi(X_T) >= y)) dy with X_T = X_t + W_T - W_t.
ReferenceEntry distortion_value(const std::string& kappa_id, std::size_t n = 0);

struct SemilinearOptions {
    double L0 = 1.0;
    double a_max = 1.0;
    std::size_t mollify = 0;  // n > 0: G1 +- y^2/(2 n L0^2), g + 1/(2n)
    std::size_t hermite_nodes = 48;
};

// G1 in {zero, quadratic, neg_quadratic}; g in {neg_logcosh, logcosh}.
// Concave g pairs with convex G1 and convex g with concave G1.
ReferenceEntry semilinear_solution(const std::string& G1_id, const std::string& g_id, const SemilinearOptions& opt = {});

// b(a) = sup_{|y| <= L0} [a y - G1(y)] for the given G1 (with mollification).
double semilinear_b(const std::string& G1_id, const std::string& g_id, double a, const SemilinearOptions& opt = {});

// Parses "example_quadratic", "heat:<g>[:<f>]", "distortion:<kappa>[:<n>]",
// "semilinear:<G1>:<g>[:<n>]".
ReferenceEntry reference_by_id(const std::string& id);
std::vector<std::string> reference_ids();

struct CounterexampleInstance {
    std::string id;
    DynamicsSpec dynamics;
    TerminalCost terminal;
    std::map<std::string, double> metadata;
};

std::vector<CounterexampleInstance> counterexample_instances();

// Two path measures with equal time-t marginals (+-1) whose values at t/2
// have the same sign (A) or the opposite sign (B) as at t. Horizon 1.
struct StateDependenceInstance {
    double t = 0.5;
    PathMeasure mu_a, mu_b;
    DynamicsSpec dynamics;
    TerminalCost terminal;       // -Var(X_T)
    TerminalCost path_terminal;  // E[max_s X_s], history dependent
    TablePolicySpace space;      // tables over sign(X_{t/2}), sign(X_t)
};

StateDependenceInstance state_dependence_instance(std::size_t particles, std::size_t steps);

}  // namespace mkv
