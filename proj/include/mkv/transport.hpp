/**
 * @file transport.hpp
 * @brief Linear assignment, entropic transport and the W2 pseudometric on
 * path measures.
 */
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "mkv/path_measure.hpp"

namespace mkv {

// Dense square cost matrix, row-major n*n. Returns col[i] for each row i.
// Shortest-augmenting-path Hungarian method, O(n^3).
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n);

// Cost of a permutation, summed in row order. Brute-force oracles in the tests
// use this same routine so equal permutations give bit-equal costs.
double assignment_cost(const std::vector<double>& cost, std::size_t n, const std::vector<std::size_t>& perm);

struct SinkhornResult {
    Eigen::MatrixXd plan;  // marginals 1/n on both sides
    double cost = 0.0;     // <plan, cost>
    double marginal_error = 0.0;
    std::size_t iterations = 0;
};

// Log-domain Sinkhorn with uniform marginals, annealing the regularization
// from the cost scale down to `reg`.
SinkhornResult sinkhorn(const std::vector<double>& cost, std::size_t n, double reg, double tol = 1e-9,
                        std::size_t max_iter = 20000);

struct TransportOptions {
    std::size_t exact_cutoff = 256;    // N <= cutoff uses exact assignment
    double relative_regularization = 1e-3;  // times the median cost
};

struct Coupling {
    std::size_t size = 0;
    bool exact = true;
    std::vector<std::size_t> permutation;  // left i -> right permutation[i]
    Eigen::MatrixXd plan;                   // filled only for the entropic path
    double regularization = 0.0;
};

struct TransportResult {
    double cost = 0.0;  // W2, not squared
    Coupling coupling;
};

// Matrix of squared sup-norm path distances, row-major N*N.
std::vector<double> sup_cost_matrix(const PathMeasure& mu, const PathMeasure& nu);

TransportResult wasserstein2(const PathMeasure& mu, const PathMeasure& nu, const TransportOptions& opt = {});

double theta_distance(double t, const PathMeasure& mu, double t2, const PathMeasure& nu,
                      const TransportOptions& opt = {});

}  // namespace mkv
