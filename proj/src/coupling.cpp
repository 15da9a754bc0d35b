#include "mkv/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/transport.hpp"

namespace mkv {

QuantileMap::QuantileMap(std::vector<double> zeta, std::vector<double> target_atoms)
    : zeta_(std::move(zeta)), atoms_(std::move(target_atoms)) {
    if (zeta_.empty() || atoms_.empty()) throw std::domain_error("quantile_transport: empty sample");
    sorted_ = zeta_;
    std::sort(sorted_.begin(), sorted_.end());
    std::sort(atoms_.begin(), atoms_.end());
}

QuantileMap::QuantileMap(std::vector<double> zeta, std::function<double(double)> target_cdf, double lo, double hi)
    : zeta_(std::move(zeta)), cdf_(std::move(target_cdf)), lo_(lo), hi_(hi) {
    if (zeta_.empty()) throw std::domain_error("quantile_transport: empty sample");
    if (!(lo < hi)) throw std::domain_error("quantile_transport: empty support bracket");
    double prev = -1.0;
    constexpr int probes = 1000;
    for (int i = 0; i <= probes; ++i) {
        const double x = lo + (hi - lo) * i / probes;
        const double f = cdf_(x);
        if (!(f >= 0.0 && f <= 1.0) || f < prev) throw std::domain_error("quantile_transport: target CDF not monotone");
        prev = f;
    }
    sorted_ = zeta_;
    std::sort(sorted_.begin(), sorted_.end());
}

double QuantileMap::quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    if (!atoms_.empty()) {
        // smallest atom a with F(a) >= u
        const double n = static_cast<double>(atoms_.size());
        auto idx = static_cast<std::size_t>(std::ceil(u * n - 1e-12));
        idx = idx == 0 ? 0 : idx - 1;
        return atoms_[std::min(idx, atoms_.size() - 1)];
    }
    double a = lo_, b = hi_;
    for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
        const double m = 0.5 * (a + b);
        if (cdf_(m) >= u)
            b = m;
        else
            a = m;
    }
    return b;
}

double QuantileMap::operator()(double x) const {
    const auto below = std::lower_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    const auto upto = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    const double n = static_cast<double>(sorted_.size());
    const double u = 0.5 * (static_cast<double>(below) + static_cast<double>(upto)) / n;
    return quantile(std::clamp(u, 0.5 / n, 1.0 - 0.5 / n));
}

std::vector<double> QuantileMap::push_samples() const {
    const std::size_t n = zeta_.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return zeta_[a] < zeta_[b]; });
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r)
        out[order[r]] = quantile((static_cast<double>(r) + 0.5) / static_cast<double>(n));
    return out;
}

QuantileMap quantile_transport(std::vector<double> zeta, std::vector<double> target_atoms) {
    return {std::move(zeta), std::move(target_atoms)};
}

QuantileMap quantile_transport(std::vector<double> zeta, std::function<double(double)> target_cdf, double lo,
                               double hi) {
    return {std::move(zeta), std::move(target_cdf), lo, hi};
}

Eigen::MatrixXd pi_marginals(const PathMeasure& mu, const std::vector<std::size_t>& pi_index) {
    const auto n = static_cast<Eigen::Index>(mu.count());
    const std::size_t d = mu.dim();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(pi_index.size() * d));
    for (Eigen::Index i = 0; i < n; ++i)
        for (std::size_t s = 0; s < pi_index.size(); ++s)
            for (std::size_t j = 0; j < d; ++j)
                out(i, static_cast<Eigen::Index>(s * d + j)) = mu.value(static_cast<std::size_t>(i), pi_index[s], j);
    return out;
}

namespace {

CellKey cell_of(const Eigen::MatrixXd& rows, Eigen::Index i, double side) {
    CellKey key(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index c = 0; c < rows.cols(); ++c)
        key[static_cast<std::size_t>(c)] = static_cast<std::int64_t>(std::floor(rows(i, c) / side));
    return key;
}

// Rank of each member's reference normal inside its cell, ties by index.
std::vector<std::size_t> cell_ranks(const std::vector<std::size_t>& members, const Eigen::MatrixXd& btilde) {
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return btilde(static_cast<Eigen::Index>(members[a]), 0) < btilde(static_cast<Eigen::Index>(members[b]), 0);
    });
    std::vector<std::size_t> rank(members.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    return rank;
}

double max_dist_sq(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j,
                   std::size_t d) {
    double best = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); c += static_cast<Eigen::Index>(d)) {
        double s = 0.0;
        for (std::size_t q = 0; q < d; ++q) {
            const double e = a(i, c + static_cast<Eigen::Index>(q)) - b(j, c + static_cast<Eigen::Index>(q));
            s += e * e;
        }
        best = std::max(best, s);
    }
    return best;
}

}  // namespace

Eigen::MatrixXd reconstruct_xi_pi(const CouplingLookup& lookup, const Eigen::MatrixXd& eta_pi,
                                  const Eigen::MatrixXd& btilde, double /*delta*/, std::size_t /*substeps*/) {
    std::map<CellKey, std::vector<std::size_t>> groups;
    for (Eigen::Index j = 0; j < eta_pi.rows(); ++j)
        groups[cell_of(eta_pi, j, lookup.cell_side)].push_back(static_cast<std::size_t>(j));
    Eigen::MatrixXd xi(eta_pi.rows(), eta_pi.cols());
    for (const auto& [key, members] : groups) {
        const auto it = lookup.table.find(key);
        if (it == lookup.table.end() || it->second.size() != members.size())
            throw std::runtime_error("reconstruct_xi_pi: lookup does not cover this cell");
        const auto rank = cell_ranks(members, btilde);
        for (std::size_t m = 0; m < members.size(); ++m) {
            const auto& src = it->second[rank[m]];
            for (std::size_t c = 0; c < src.size(); ++c)
                xi(static_cast<Eigen::Index>(members[m]), static_cast<Eigen::Index>(c)) = src[c];
        }
    }
    return xi;
}

CoupledSystem build_coupling(const PathMeasure& mu, const PathMeasure& nu, const std::vector<double>& pi_times,
                             double eps, double delta, std::uint64_t seed, std::size_t substeps) {
    if (!(eps > 0.0)) throw std::domain_error("build_coupling: eps must be > 0");
    if (!(delta > 0.0)) throw std::domain_error("build_coupling: delta must be > 0");
    if (pi_times.empty()) throw std::domain_error("build_coupling: empty observation set");
    if (substeps == 0) throw std::domain_error("build_coupling: substeps must be positive");
    if (mu.count() != nu.count()) throw ConfigurationError("build_coupling: resample to a common particle count");
    if (!(mu.grid() == nu.grid()) || mu.dim() != nu.dim()) throw ShapeError("build_coupling: grid mismatch");

    const std::size_t n = mu.count(), d = mu.dim();
    std::vector<std::size_t> pi_index;
    for (double s : pi_times) pi_index.push_back(mu.grid().index_at_or_below(s));

    const Eigen::MatrixXd xpi = pi_marginals(mu, pi_index);
    const Eigen::MatrixXd epi = pi_marginals(nu, pi_index);

    // optimal coupling of the pi-marginals under max-over-pi cost
    std::vector<double> cost(n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            cost[j * n + i] = max_dist_sq(epi, static_cast<Eigen::Index>(j), xpi, static_cast<Eigen::Index>(i), d);
    const auto partner = solve_assignment(cost, n);  // nu particle j -> mu particle partner[j]

    CoupledSystem out{pi_times, pi_index, mu, nu, {}, {}, substeps, {}, 0.0, 0.0, eps};
    out.lookup.cell_side = 0.5 * eps;
    out.lookup.coords = static_cast<std::size_t>(epi.cols());

    // auxiliary Brownian increments, independent of eta
    const double h = delta / static_cast<double>(substeps);
    out.btilde.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(substeps * d));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < substeps * d; ++c)
            out.btilde(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) =
                std::sqrt(h) * counter_normal(seed, j, 0x0C0DE, c);

    std::map<CellKey, std::vector<std::size_t>> groups;
    for (std::size_t j = 0; j < n; ++j)
        groups[cell_of(epi, static_cast<Eigen::Index>(j), out.lookup.cell_side)].push_back(j);

    out.xi_source.assign(n, 0);
    for (const auto& [key, members] : groups) {
        // mu particles attached to this cell by the optimal coupling, in a
        // canonical order (lexicographic on pi-values, then index)
        std::vector<std::size_t> pool;
        for (std::size_t j : members) pool.push_back(partner[j]);
        std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
            for (Eigen::Index c = 0; c < xpi.cols(); ++c) {
                const double x = xpi(static_cast<Eigen::Index>(a), c), y = xpi(static_cast<Eigen::Index>(b), c);
                if (x != y) return x < y;
            }
            return a < b;
        });
        auto& entry = out.lookup.table[key];
        for (std::size_t i : pool) {
            std::vector<double> row(static_cast<std::size_t>(xpi.cols()));
            for (Eigen::Index c = 0; c < xpi.cols(); ++c) row[static_cast<std::size_t>(c)] = xpi(static_cast<Eigen::Index>(i), c);
            entry.push_back(std::move(row));
        }
        const auto rank = cell_ranks(members, out.btilde);
        for (std::size_t m = 0; m < members.size(); ++m) out.xi_source[members[m]] = pool[rank[m]];
    }

    std::vector<double> data;
    data.reserve(n * mu.stride());
    for (std::size_t j = 0; j < n; ++j) {
        auto p = mu.particle(out.xi_source[j]);
        data.insert(data.end(), p.begin(), p.end());
    }
    out.xi = PathMeasure(mu.grid(), d, n, std::move(data));

    double real = 0.0, best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        real += max_dist_sq(xpi, static_cast<Eigen::Index>(out.xi_source[j]), epi, static_cast<Eigen::Index>(j), d);
        best += cost[j * n + partner[j]];
    }
    out.distance = std::sqrt(real / static_cast<double>(n));
    out.optimal_distance = std::sqrt(best / static_cast<double>(n));
    return out;
}

}  // namespace mkv
