#include "mkv/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/stats.hpp"

namespace mkv {

PathMeasure bootstrap(const PathMeasure& mu, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::domain_error("bootstrap: zero particles requested");
    std::mt19937_64 eng(derive_seed(seed, 0xB0075));
    std::uniform_int_distribution<std::size_t> pick(0, mu.count() - 1);
    std::vector<double> data;
    data.reserve(n * mu.stride());
    for (std::size_t i = 0; i < n; ++i) {
        auto p = mu.particle(pick(eng));
        data.insert(data.end(), p.begin(), p.end());
    }
    return {mu.grid(), mu.dim(), n, std::move(data)};
}

PathMeasure random_walk_measure(const TimeGrid& grid, std::size_t dim, std::size_t n, std::uint64_t seed, double mean,
                                double sd) {
    if (n == 0 || dim == 0) throw std::domain_error("random_walk_measure: empty measure requested");
    PathMeasure mu(grid, dim, n);
    const double sdt = std::sqrt(grid.dt());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double x = mean + sd * counter_normal(seed, i, 0, j);
            mu.value(i, 0, j) = x;
            for (std::size_t k = 1; k <= grid.steps(); ++k) {
                x += sdt * counter_normal(seed, i, k, j);
                mu.value(i, k, j) = x;
            }
        }
    return mu;
}

SimulationResult simulate_mkv(double t, const PathMeasure& mu, const DynamicsSpec& dyn, const PiecewisePolicy* policy,
                              std::size_t n, std::uint64_t seed, const SimulationOptions& opt) {
    const TimeGrid& grid = mu.grid();
    const std::size_t d = mu.dim();
    if (dyn.dim != d) throw ShapeError("simulate_mkv: dynamics dimension != measure dimension");
    if (!dyn.drift || !dyn.vol) throw ConfigurationError("simulate_mkv: dynamics without coefficients");
    const std::size_t M = grid.steps();
    const std::size_t k0 = grid.index_at_or_below(t);
    std::size_t kend = opt.until ? grid.index_at_or_below(*opt.until) : M;
    kend = std::max(kend, k0);

    SimulationResult res{n == mu.count() ? mu : bootstrap(mu, n, seed), k0, kend, {}, {}};
    PathMeasure& X = res.paths;
    for (std::size_t i = 0; i < n; ++i) {
        auto src = X.point(i, k0);
        std::vector<double> x(src.begin(), src.end());
        for (std::size_t k = k0 + 1; k <= M; ++k) std::copy(x.begin(), x.end(), X.point(i, k).begin());
    }
    if (opt.record_diffusion) res.diffusion.assign(n * M * d * d, 0.0);
    if (opt.record_actions) res.actions.assign(n * M, 0.0);

    // grid index at which each policy interval starts
    std::vector<std::size_t> starts;
    if (policy) {
        for (std::size_t i = 0; i < policy->intervals(); ++i)
            starts.push_back(std::max(k0, grid.index_at_or_below(std::max(0.0, policy->start(i)))));
        if (grid.index_at_or_below(policy->start(0)) > k0)
            throw ConfigurationError("simulate_mkv: policy starts after the initial time");
    }

    const BrownianDriver driver(seed);
    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);
    std::vector<double> action(n, 0.0);
    std::vector<double> mean(d), col(n);
    std::size_t interval = 0;

    for (std::size_t k = k0; k < kend; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n; ++i) col[i] = X.value(i, k, j);
            mean[j] = pairwise_mean(col);
        }
        bool refresh = false;
        if (policy) {
            std::size_t iv = interval;
            while (iv + 1 < starts.size() && starts[iv + 1] <= k) ++iv;
            refresh = (k == k0) || (iv != interval && starts[iv] == k);
            interval = iv;
        }
        const StepContext ctx{grid.time(k), k, dt, X, mean};
        std::exception_ptr failure;
        bool nonfinite = false;
#pragma omp parallel
        {
            std::vector<double> b(d), s(d * d), z(d);
#pragma omp for schedule(static)
            for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
                const auto i = static_cast<std::size_t>(ii);
                try {
                    if (refresh) {
                        const double a = policy->action(interval, X.path(i, starts[interval]));
                        if (!dyn.actions.contains(a)) throw std::domain_error("policy action outside the action set");
                        action[i] = a;
                    }
                    std::fill(b.begin(), b.end(), 0.0);
                    std::fill(s.begin(), s.end(), 0.0);
                    dyn.drift(ctx, i, action[i], b);
                    dyn.vol(ctx, i, action[i], s);
                    for (std::size_t l = 0; l < d; ++l) z[l] = driver.normal(i, k, l);
                    bool ok = true;
                    for (std::size_t j = 0; j < d; ++j) {
                        double x = X.value(i, k, j) + b[j] * dt;
                        for (std::size_t l = 0; l < d; ++l) x += s[j * d + l] * sdt * z[l];
                        ok = ok && std::isfinite(x);
                        X.value(i, k + 1, j) = x;
                    }
                    if (!ok) {
#pragma omp atomic write
                        nonfinite = true;
                    }
                    if (opt.record_diffusion) {
                        double* q = res.diffusion.data() + (i * M + k) * d * d;
                        for (std::size_t r = 0; r < d; ++r)
                            for (std::size_t c = 0; c < d; ++c) {
                                double acc = 0.0;
                                for (std::size_t l = 0; l < d; ++l) acc += s[r * d + l] * s[c * d + l];
                                q[r * d + c] = acc;
                            }
                    }
                    if (opt.record_actions) res.actions[i * M + k] = action[i];
                } catch (...) {
#pragma omp critical(mkv_sim_failure)
                    if (!failure) failure = std::current_exception();
                }
            }
        }
        if (failure) std::rethrow_exception(failure);
        if (nonfinite) throw SimulationFault("simulate_mkv: non-finite state", k + 1);
    }
    for (std::size_t i = 0; i < n && kend < M; ++i) {
        auto src = X.point(i, kend);
        std::vector<double> x(src.begin(), src.end());
        for (std::size_t k = kend + 1; k <= M; ++k) std::copy(x.begin(), x.end(), X.point(i, k).begin());
    }
    return res;
}

// ---- semimartingale family ----

GeneratorFamily GeneratorFamily::standard() {
    return {{GeneratorKind::Zero, GeneratorKind::ExtremeDrift, GeneratorKind::MaxVol, GeneratorKind::ConstantDrift,
             GeneratorKind::DriftAndVol, GeneratorKind::PiecewiseTime, GeneratorKind::StateFeedback}};
}

GeneratorMember GeneratorFamily::draw(std::uint64_t seed, std::size_t index, double t, double window, double L,
                                      std::size_t dim, double center) const {
    if (kinds.empty()) throw ConfigurationError("GeneratorFamily: no members");
    auto u = [&](std::uint64_t slot) { return counter_uniform(seed, index, 0xFA417, slot); };
    const double vmax = std::sqrt(2.0 * L / static_cast<double>(dim));
    GeneratorMember m;
    m.kind = kinds[index % kinds.size()];
    // the cycle index decides which extreme is used so both signs appear
    const double sign = ((index / kinds.size()) % 2 == 0) ? 1.0 : -1.0;
    switch (m.kind) {
        case GeneratorKind::Zero:
            break;
        case GeneratorKind::ExtremeDrift:
            m.drift = sign * L;
            break;
        case GeneratorKind::MaxVol:
            m.vol = vmax;
            break;
        case GeneratorKind::ConstantDrift:
            m.drift = L * (2.0 * u(0) - 1.0);
            break;
        case GeneratorKind::DriftAndVol:
            m.drift = L * (2.0 * u(0) - 1.0);
            m.vol = vmax * u(1);
            break;
        case GeneratorKind::PiecewiseTime:
            m.drift = L * (2.0 * u(0) - 1.0);
            m.vol = vmax * u(1);
            m.drift2 = L * (2.0 * u(2) - 1.0);
            m.vol2 = vmax * u(3);
            m.switch_time = t + window * u(4);
            break;
        case GeneratorKind::StateFeedback:
            m.drift = sign * L;
            m.vol = vmax * u(1);
            m.vol2 = vmax * u(2);
            m.threshold = center + (2.0 * u(3) - 1.0);
            break;
    }
    return m;
}

DynamicsSpec member_dynamics(const GeneratorMember& m, double L, std::size_t dim, BoundAudit* audit) {
    DynamicsSpec dyn;
    dyn.id = "PL-member";
    dyn.dim = dim;
    dyn.bound = L;
    auto raw = [m](const StepContext& ctx, std::size_t i, double& b, double& s) {
        switch (m.kind) {
            case GeneratorKind::Zero:
                b = 0.0;
                s = 0.0;
                break;
            case GeneratorKind::PiecewiseTime:
                b = ctx.t < m.switch_time ? m.drift : m.drift2;
                s = ctx.t < m.switch_time ? m.vol : m.vol2;
                break;
            case GeneratorKind::StateFeedback: {
                const double x = ctx.state.value(i, ctx.k, 0);
                b = x > m.threshold ? -m.drift : m.drift;
                s = x > m.threshold ? m.vol : m.vol2;
                break;
            }
            default:
                b = m.drift;
                s = m.vol;
        }
    };
    auto clamp = [L, dim, audit](double& b, double& s) {
        const double bn = std::abs(b) * std::sqrt(static_cast<double>(dim));
        const double half_sq = 0.5 * s * s * static_cast<double>(dim);
        bool clipped = false;
        // 1e-12 relative slack keeps the extreme members (exactly on the bound) unclipped
        if (bn > L * (1.0 + 1e-12)) {
            b *= L / bn;
            clipped = true;
        }
        if (half_sq > L * (1.0 + 1e-12)) {
            s *= std::sqrt(L / half_sq);
            clipped = true;
        }
        if (audit) {
            audit->evaluations.fetch_add(1, std::memory_order_relaxed);
            if (clipped) audit->clamps.fetch_add(1, std::memory_order_relaxed);
        }
    };
    dyn.drift = [raw, clamp, dim](const StepContext& ctx, std::size_t i, double, std::span<double> out) {
        double b = 0, s = 0;
        raw(ctx, i, b, s);
        clamp(b, s);
        for (std::size_t j = 0; j < dim; ++j) out[j] = b;
    };
    dyn.vol = [raw, dim, L](const StepContext& ctx, std::size_t i, double, std::span<double> out) {
        double b = 0, s = 0;
        raw(ctx, i, b, s);
        const double half_sq = 0.5 * s * s * static_cast<double>(dim);
        if (half_sq > L * (1.0 + 1e-12)) s *= std::sqrt(L / half_sq);
        for (std::size_t j = 0; j < dim; ++j) out[j * dim + j] = s;
    };
    return dyn;
}

PathMeasure sample_PL_member(double t, const PathMeasure& mu, double L, const GeneratorMember& m, std::uint64_t seed,
                             BoundAudit* audit, std::optional<double> until) {
    if (!(L > 0.0)) throw std::domain_error("sample_PL: L must be > 0");
    const DynamicsSpec dyn = member_dynamics(m, L, mu.dim(), audit);
    SimulationOptions opt;
    opt.until = until;
    return simulate_mkv(t, mu, dyn, nullptr, mu.count(), seed, opt).paths;
}

std::vector<PathMeasure> sample_PL(double t, const PathMeasure& mu, double L, std::size_t K,
                                   const GeneratorFamily& family, std::uint64_t seed, BoundAudit* audit,
                                   std::optional<double> until) {
    const double window = (until ? *until : mu.grid().horizon()) - t;
    const double center = mean_at(mu, mu.grid().index_at_or_below(t), 0);
    std::vector<PathMeasure> out;
    out.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto m = family.draw(seed, k, t, window, L, mu.dim(), center);
        out.push_back(sample_PL_member(t, mu, L, m, derive_seed(seed, k), audit, until));
    }
    return out;
}

double moment_bound_constant(double L, int p, double horizon) {
    const double pd = p;
    const double drift = std::pow(L, pd) * std::pow(horizon, pd / 2.0);
    const double mart = std::pow(pd / (pd - 1.0), pd) * std::pow(pd * (pd - 1.0) / 2.0, pd / 2.0) * std::pow(2.0 * L, pd / 2.0);
    return std::pow(2.0, pd - 1.0) * (drift + mart);
}

MomentReport moment_bound_check(const std::vector<PathMeasure>& measures, double t, double L, int p,
                                const std::vector<double>& deltas) {
    if (p < 2 || p % 2 != 0) throw std::domain_error("moment_bound_check: p must be an even integer >= 2");
    MomentReport r;
    r.deltas = deltas;
    if (measures.empty()) return r;
    const TimeGrid& g = measures.front().grid();
    r.bound_constant = moment_bound_constant(L, p, g.horizon());
    const std::size_t k0 = g.index_at_or_below(t);
    for (double delta : deltas) {
        const std::size_t k1 = g.index_at_or_below(std::min(g.horizon(), t + delta));
        double worst = 0.0;
        for (const auto& mu : measures) {
            std::vector<double> v(mu.count());
            for (std::size_t i = 0; i < mu.count(); ++i) {
                double sup = 0.0;
                for (std::size_t k = k0; k <= k1; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < mu.dim(); ++j) {
                        const double e = mu.value(i, k, j) - mu.value(i, k0, j);
                        s += e * e;
                    }
                    sup = std::max(sup, s);
                }
                v[i] = std::pow(sup, p / 2.0);
            }
            worst = std::max(worst, pairwise_mean(v));
        }
        r.moments.push_back(worst);
        const double scale = std::pow(delta, p / 2.0);
        r.fitted_constant = std::max(r.fitted_constant, worst / scale);
        if (worst > r.bound_constant * scale) r.bound_holds = false;
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (r.moments[i] > 0.0) {
            xs.push_back(deltas[i]);
            ys.push_back(r.moments[i]);
        }
    r.fitted_exponent = xs.size() >= 2 ? loglog_slope(xs, ys) : std::nan("");
    return r;
}

}  // namespace mkv
