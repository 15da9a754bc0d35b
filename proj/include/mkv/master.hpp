/**
 * @file master.hpp
 * @brief Master-equation generators, classical residuals, paraboloid test
 * functions and sampled semi-jet / viscosity checks.
 */
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mkv/functional.hpp"
#include "mkv/simulate.hpp"

namespace mkv {

// G(t, mu, y, Z, Gamma) with Z: N x d and Gamma: N x d*d (row-major per particle).
using GeneratorFn =
    std::function<double(double t, const PathMeasure& mu, double y, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Gamma)>;

// Per-particle integrand for the expectation form G = G1(t, mu, y, E[G2]).
using G2Fn = std::function<Eigen::VectorXd(double t, const PathMeasure& mu, std::size_t i, double y,
                                           const Eigen::RowVectorXd& z, const Eigen::RowVectorXd& gamma)>;
using G1Fn = std::function<double(double t, const PathMeasure& mu, double y, const Eigen::VectorXd& mean_g2)>;

struct GeneratorSpec {
    std::string id;
    GeneratorFn G;
    double lipschitz = 0.0;  // L0
    bool expectation_form = false;
    G1Fn G1;
    G2Fn G2;

    double operator()(double t, const PathMeasure& mu, double y, const Eigen::MatrixXd& Z,
                      const Eigen::MatrixXd& Gamma) const {
        return G(t, mu, y, Z, Gamma);
    }
};

// Builds G from (G1, G2) with the mean of G2 over particles in pairwise order.
GeneratorSpec expectation_generator(std::string id, G1Fn g1, G2Fn g2, double lipschitz);

struct GeneratorAudit {
    std::size_t trials = 0;
    std::size_t lipschitz_violations = 0;
    std::size_t monotonicity_violations = 0;
    double worst_lipschitz_ratio = 0.0;  // |dG| / (L0 E[|dZ| + |dGamma|])
};

// Random batches around (t, mu): Lipschitz bound in (Z, Gamma) and
// monotonicity under adding positive semidefinite matrices to Gamma.
GeneratorAudit audit_generator(const GeneratorSpec& G, double t, const PathMeasure& mu, std::size_t trials,
                               std::uint64_t seed);

// dt V - lambda V + G(t, mu, V, dmu V, dxdmu V). lambda = 0 is the plain
// master-equation residual.
double classical_residual(const MeasureFunctional& V, const GeneratorSpec& G, double t, const PathMeasure& mu,
                          double lambda = 0.0);

enum class JetSide { Sub, Super };

struct JetSpec {
    double t = 0.0;
    double y = 0.0;
    double v = 0.0;
    Eigen::MatrixXd Z;      // row i: Z at particle i of the base measure
    Eigen::MatrixXd Gamma;  // row i: Gamma (d*d) at particle i
    double delta = 0.0;
    double L = 1.0;
    JetSide side = JetSide::Sub;
};

// y + v (s-t) + mean_i [ Z_i . dX_i + 1/2 Gamma_i : dX_i dX_i^T ], dX_i = X_i(s) - X_i(t).
// P must carry the base measure's particles in the same order up to t.
double paraboloid_eval(const JetSpec& jet, double s, const PathMeasure& P);

// Paraboloid as a functional of (s, P), so its derivatives can be taken.
FunctionalPtr paraboloid_functional(JetSpec jet);

// Jet read off a candidate's derivative bundle; v is shifted by +slack for
// the sub side and by -slack for the super side.
JetSpec jet_from_candidate(const MeasureFunctional& V, double t, const PathMeasure& mu, double delta, double L,
                           JetSide side, double slack);

struct SamplerConfig {
    std::size_t samples = 1000;
    GeneratorFamily family = GeneratorFamily::standard();
    std::uint64_t seed = 1;
    double slack = 1e-9;
};

struct MembershipWitness {
    std::size_t sample = 0;
    double s = 0.0;
    GeneratorKind kind = GeneratorKind::Zero;
    double margin = 0.0;  // phi - V
};

struct MembershipReport {
    bool refuted = false;
    std::size_t samples = 0;
    double min_margin = 0.0;
    double max_margin = 0.0;
    std::optional<MembershipWitness> witness;
    std::size_t clamps = 0;  // bound audit of the sampled family
};

MembershipReport jet_membership_test(const MeasureFunctional& V, const JetSpec& jet, double t, const PathMeasure& mu,
                                     const SamplerConfig& cfg = {});

// Several jets against the same sampled (s, P) pairs.
std::vector<MembershipReport> jet_membership_test_many(const MeasureFunctional& V, const std::vector<JetSpec>& jets,
                                                       double t, const PathMeasure& mu, const SamplerConfig& cfg = {});

enum class ViscosityStatus { Passed, Failed, JetRefuted };

struct ViscosityReport {
    JetSide side = JetSide::Sub;
    ViscosityStatus status = ViscosityStatus::Passed;
    double scalar = 0.0;  // v + G(t, mu, V, Z, Gamma)
    double tolerance = 0.0;
    MembershipReport membership;
};

// Membership first; if plausible, the sign test on v + G with tolerance
// max(3 * scalar_se, 1e-9).
ViscosityReport viscosity_check(const MeasureFunctional& V, const GeneratorSpec& G, double t, const PathMeasure& mu,
                                const JetSpec& jet, JetSide side, const SamplerConfig& cfg = {}, double scalar_se = 0.0);

// Sign test only, given membership evidence already gathered.
ViscosityReport viscosity_decide(const MeasureFunctional& V, const GeneratorSpec& G, const PathMeasure& mu,
                                 const JetSpec& jet, JetSide side, const MembershipReport& membership,
                                 double scalar_se = 0.0);

// V~ = e^{lambda t} V, G~(t,mu,y,Z,Gamma) = e^{lambda t} G(t, mu, e^{-lambda t} y, ...).
std::pair<FunctionalPtr, GeneratorSpec> exponential_change(FunctionalPtr V, const GeneratorSpec& G, double lambda);

}  // namespace mkv
