/**
 * @file coupling.hpp
 * @brief Quantile transport and the noise-measurable coupling construction.
 */
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "mkv/path_measure.hpp"

namespace mkv {

// phi = F_target^{-1} o F_zeta, with F_zeta the empirical CDF of the
// reference samples. Monotone by construction.
class QuantileMap {
public:
    // Discrete target given by its atoms (uniform weights, any order).
    QuantileMap(std::vector<double> zeta, std::vector<double> target_atoms);
    // Target given by a CDF on [lo, hi]; inverted by bisection.
    QuantileMap(std::vector<double> zeta, std::function<double(double)> target_cdf, double lo, double hi);

    // Level u in (0,1) -> target quantile.
    double quantile(double u) const;
    // phi(x) with F_zeta(x) read as the mid-point of the jump at x.
    double operator()(double x) const;
    // Push the reference samples through phi with ties broken by sample
    // index, so the output law matches the target within 1/N in Kolmogorov
    // distance.
    std::vector<double> push_samples() const;

private:
    std::vector<double> zeta_;    // original order
    std::vector<double> sorted_;  // ascending
    std::vector<double> atoms_;   // ascending, empty for the CDF form
    std::function<double(double)> cdf_;
    double lo_ = 0.0, hi_ = 0.0;
};

QuantileMap quantile_transport(std::vector<double> zeta, std::vector<double> target_atoms);
QuantileMap quantile_transport(std::vector<double> zeta, std::function<double(double)> target_cdf, double lo,
                               double hi);

using CellKey = std::vector<std::int64_t>;

// Lookup table for the construction: cell of eta_pi -> ordered list of mu
// particles (their pi-marginal vectors) available in that cell.
struct CouplingLookup {
    double cell_side = 0.0;
    std::size_t coords = 0;  // m * d
    std::map<CellKey, std::vector<std::vector<double>>> table;
};

struct CoupledSystem {
    std::vector<double> pi_times;
    std::vector<std::size_t> pi_index;  // grid indices of pi_times
    PathMeasure xi;                     // full paths taken from mu
    PathMeasure eta;                    // nu itself
    std::vector<std::size_t> xi_source;  // mu particle used for xi^(j)
    Eigen::MatrixXd btilde;              // N x (m_sub * d) increments on [0, delta]
    std::size_t substeps = 0;
    CouplingLookup lookup;
    double distance = 0.0;         // sqrt(mean_j max_s |xi_s - eta_s|^2) over pi_times
    double optimal_distance = 0.0;  // same with the optimal assignment
    double eps = 0.0;
};

// pi-marginal vectors (row per particle, m*d columns).
Eigen::MatrixXd pi_marginals(const PathMeasure& mu, const std::vector<std::size_t>& pi_index);

CoupledSystem build_coupling(const PathMeasure& mu, const PathMeasure& nu, const std::vector<double>& pi_times,
                             double eps, double delta, std::uint64_t seed, std::size_t substeps = 4);

// Recompute xi_pi from (eta_pi, B~) and the stored lookup only.
Eigen::MatrixXd reconstruct_xi_pi(const CouplingLookup& lookup, const Eigen::MatrixXd& eta_pi,
                                  const Eigen::MatrixXd& btilde, double delta, std::size_t substeps);

}  // namespace mkv
