#include "mkv/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/stats.hpp"

namespace mkv {

std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
    if (cost.size() != n * n) throw ShapeError("solve_assignment: cost is not n*n");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual source
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col(n);
    for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
    return col;
}

double assignment_cost(const std::vector<double>& cost, std::size_t n, const std::vector<std::size_t>& perm) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
    return s;
}

namespace {

double logsumexp(const double* x, std::size_t n, std::size_t stride) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i * stride]);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - m);
    return m + std::log(s);
}

}  // namespace

SinkhornResult sinkhorn(const std::vector<double>& cost, std::size_t n, double reg, double tol, std::size_t max_iter) {
    if (cost.size() != n * n) throw ShapeError("sinkhorn: cost is not n*n");
    if (!(reg > 0.0)) throw std::domain_error("sinkhorn: regularization must be > 0");
    const double logw = -std::log(static_cast<double>(n));
    std::vector<double> f(n, 0.0), g(n, 0.0), work(n * n);
    double cmax = *std::max_element(cost.begin(), cost.end());
    double eps = std::max(reg, cmax);
    SinkhornResult res;
    std::vector<double> row(n);
    while (true) {
        for (std::size_t it = 0; it < max_iter; ++it) {
            // f_i = eps*log w - eps*LSE_j((g_j - C_ij)/eps)
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) row[j] = (g[j] - cost[i * n + j]) / eps;
                f[i] = eps * logw - eps * logsumexp(row.data(), n, 1);
            }
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) row[i] = (f[i] - cost[i * n + j]) / eps;
                g[j] = eps * logw - eps * logsumexp(row.data(), n, 1);
            }
            ++res.iterations;
            // column marginals are exact after the g update; check rows
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += std::exp((f[i] + g[j] - cost[i * n + j]) / eps);
                err += std::abs(s - 1.0 / static_cast<double>(n));
            }
            res.marginal_error = err;
            if (err < tol) break;
        }
        if (eps <= reg) break;
        eps = std::max(reg, eps * 0.5);
    }
    res.plan.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double pij = std::exp((f[i] + g[j] - cost[i * n + j]) / eps);
            res.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pij;
            c += pij * cost[i * n + j];
        }
    res.cost = c;
    return res;
}

std::vector<double> sup_cost_matrix(const PathMeasure& mu, const PathMeasure& nu) {
    if (!(mu.grid() == nu.grid()) || mu.dim() != nu.dim()) throw ShapeError("transport: grid mismatch");
    const std::size_t n = mu.count(), m = nu.count();
    std::vector<double> c(n * m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto a = mu.particle(i);
        for (std::size_t j = 0; j < m; ++j) {
            auto b = nu.particle(j);
            double best = 0.0;
            const std::size_t d = mu.dim();
            for (std::size_t off = 0; off < a.size(); off += d) {
                double s = 0.0;
                for (std::size_t q = 0; q < d; ++q) {
                    const double e = a[off + q] - b[off + q];
                    s += e * e;
                }
                best = std::max(best, s);
            }
            c[i * m + j] = best;
        }
    }
    return c;
}

TransportResult wasserstein2(const PathMeasure& mu, const PathMeasure& nu, const TransportOptions& opt) {
    if (mu.count() != nu.count())
        throw ConfigurationError("wasserstein2: unequal particle counts are unsupported; resample to a common N");
    const std::size_t n = mu.count();
    const auto c = sup_cost_matrix(mu, nu);
    TransportResult r;
    r.coupling.size = n;
    if (n <= opt.exact_cutoff) {
        r.coupling.permutation = solve_assignment(c, n);
        // matched costs summed in sorted order so that swapping mu and nu is exact
        std::vector<double> matched(n);
        for (std::size_t i = 0; i < n; ++i) matched[i] = c[i * n + r.coupling.permutation[i]];
        std::sort(matched.begin(), matched.end());
        r.cost = std::sqrt(pairwise_sum(matched) / static_cast<double>(n));
        return r;
    }
    std::vector<double> sorted = c;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double med = sorted[sorted.size() / 2];
    const double reg = opt.relative_regularization * (med > 0.0 ? med : 1.0);
    auto sk = sinkhorn(c, n, reg);
    r.coupling.exact = false;
    r.coupling.plan = std::move(sk.plan);
    r.coupling.regularization = reg;
    r.cost = std::sqrt(std::max(0.0, sk.cost));
    return r;
}

double theta_distance(double t, const PathMeasure& mu, double t2, const PathMeasure& nu, const TransportOptions& opt) {
    const double w = wasserstein2(mu.stop(t), nu.stop(t2), opt).cost;
    return std::sqrt(std::abs(t - t2) + w * w);
}

}  // namespace mkv
