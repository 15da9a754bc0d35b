/**
 * @file simulate.hpp
 * @brief Particle Euler-Maruyama for controlled McKean-Vlasov dynamics and
 * sampling of L-bounded semimartingale laws.
 */
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkv/path_measure.hpp"
#include "mkv/policy.hpp"

namespace mkv {

// What coefficients may see at step k: the particle system completed up to
// index k (later indices are not meaningful) and its mean at k.
struct StepContext {
    double t;
    std::size_t k;
    double dt;
    const PathMeasure& state;
    std::span<const double> mean;
};

using DriftFn = std::function<void(const StepContext&, std::size_t particle, double action, std::span<double> out)>;
// Volatility written row-major d x d.
using VolFn = std::function<void(const StepContext&, std::size_t particle, double action, std::span<double> out)>;

struct DynamicsSpec {
    std::string id;
    std::size_t dim = 1;
    DriftFn drift;
    VolFn vol;
    double bound = 1.0;  // coefficient bound C0 / L
    ActionSet actions = ActionSet::finite({0.0});
};

struct SimulationOptions {
    bool record_diffusion = false;  // sigma sigma^T per particle and step
    bool record_actions = false;
    std::optional<double> until;  // stop evolving here; frozen afterwards
};

struct SimulationResult {
    PathMeasure paths;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    std::vector<double> diffusion;  // [i][k][d*d], k over all M steps
    std::vector<double> actions;    // [i][k]
};

// Bootstrap resample of particles (with replacement) using a seeded engine.
PathMeasure bootstrap(const PathMeasure& mu, std::size_t n, std::uint64_t seed);

// Fixture paths: X_0 = mean + sd Z, then Gaussian increments of variance dt
// in every component, all from the counter-based stream of `seed`.
PathMeasure random_walk_measure(const TimeGrid& grid, std::size_t dim, std::size_t n, std::uint64_t seed,
                                double mean = 0.0, double sd = 1.0);

SimulationResult simulate_mkv(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const PiecewisePolicy* policy,
                              std::size_t n, std::uint64_t seed, const SimulationOptions& opt = {});

// ---- L-bounded semimartingale family ----

enum class GeneratorKind { Zero, ConstantDrift, ExtremeDrift, MaxVol, DriftAndVol, PiecewiseTime, StateFeedback };

struct GeneratorMember {
    GeneratorKind kind = GeneratorKind::Zero;
    double drift = 0.0;
    double vol = 0.0;  // scalar multiple of the identity
    double drift2 = 0.0;
    double vol2 = 0.0;
    double switch_time = 0.0;
    double threshold = 0.0;
};

struct GeneratorFamily {
    std::vector<GeneratorKind> kinds;
    // constants, extremes +-L and vol sqrt(2L/d), time switches, sign/threshold feedback
    static GeneratorFamily standard();
    GeneratorMember draw(std::uint64_t seed, std::size_t index, double t, double window, double L, std::size_t dim,
                         double center) const;
};

struct BoundAudit {
    std::atomic<std::size_t> evaluations{0};
    std::atomic<std::size_t> clamps{0};
};

// Drift/vol of a member as a function of (time, own path so far). The values
// are clamped to |b| <= L and |sigma|_F^2 / 2 <= L; every clamp is counted.
DynamicsSpec member_dynamics(const GeneratorMember& m, double L, std::size_t dim, BoundAudit* audit);

PathMeasure sample_PL_member(double t, const PathMeasure& mu, double L, const GeneratorMember& m, std::uint64_t seed,
                             BoundAudit* audit = nullptr, std::optional<double> until = std::nullopt);

std::vector<PathMeasure> sample_PL(double t, const PathMeasure& mu, double L, std::size_t K,
                                   const GeneratorFamily& family, std::uint64_t seed, BoundAudit* audit = nullptr,
                                   std::optional<double> until = std::nullopt);

struct MomentReport {
    std::vector<double> deltas;
    std::vector<double> moments;  // max over measures of mean sup_{t<=s<=t+delta} |X_s - X_t|^p
    double fitted_exponent = 0.0;  // slope of log moment vs log delta
    double fitted_constant = 0.0;  // max over deltas of moment / delta^{p/2}
    double bound_constant = 0.0;   // a priori C_{p,L}
    bool bound_holds = true;
};

// A priori constant: 2^{p-1} [ L^p T^{p/2} + (p/(p-1))^p (p(p-1)/2)^{p/2} (2L)^{p/2} ]
// (drift part plus Doob and a Burkholder-type bound with <M> <= 2L delta).
double moment_bound_constant(double L, int p, double horizon);

MomentReport moment_bound_check(const std::vector<PathMeasure>& measures, double t, double L, int p,
                                const std::vector<double>& deltas);

}  // namespace mkv
