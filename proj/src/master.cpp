#include "mkv/master.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/stats.hpp"

namespace mkv {

GeneratorSpec expectation_generator(std::string id, G1Fn g1, G2Fn g2, double lipschitz) {
    if (!g1 || !g2) throw ConfigurationError("expectation_generator: G1 and G2 required");
    GeneratorSpec spec;
    spec.id = std::move(id);
    spec.lipschitz = lipschitz;
    spec.expectation_form = true;
    spec.G1 = g1;
    spec.G2 = g2;
    spec.G = [g1, g2](double t, const PathMeasure& mu, double y, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Gamma) {
        const std::size_t n = static_cast<std::size_t>(Z.rows());
        if (n == 0) throw ShapeError("generator: empty Z");
        std::vector<Eigen::VectorXd> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            rows[i] = g2(t, mu, i, y, Z.row(ii), Gamma.row(ii));
        }
        const auto m = rows.front().size();
        Eigen::VectorXd mean(m);
        std::vector<double> col(n);
        for (Eigen::Index c = 0; c < m; ++c) {
            for (std::size_t i = 0; i < n; ++i) col[i] = rows[i](c);
            mean(c) = pairwise_mean(col);
        }
        return g1(t, mu, y, mean);
    };
    return spec;
}

GeneratorAudit audit_generator(const GeneratorSpec& G, double t, const PathMeasure& mu, std::size_t trials,
                               std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(mu.count());
    const auto d = static_cast<Eigen::Index>(mu.dim());
    std::mt19937_64 rng(derive_seed(seed, 0xA0D1));
    std::normal_distribution<double> nd(0.0, 1.0);
    auto randm = [&](Eigen::Index r, Eigen::Index c) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
        return m;
    };
    GeneratorAudit a;
    a.trials = trials;
    for (std::size_t k = 0; k < trials; ++k) {
        const double y = nd(rng);
        const Eigen::MatrixXd Z1 = randm(n, d), Z2 = Z1 + 0.1 * randm(n, d);
        Eigen::MatrixXd G1 = randm(n, d * d);
        // symmetrize per particle
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index p = 0; p < d; ++p)
                for (Eigen::Index q = p + 1; q < d; ++q) G1(i, q * d + p) = G1(i, p * d + q);
        Eigen::MatrixXd G2 = G1;
        Eigen::MatrixXd Gpsd = G1;
        std::vector<double> dist(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::MatrixXd A = 0.1 * randm(d, d);
            Eigen::MatrixXd P = A * A.transpose();
            Eigen::MatrixXd S = 0.1 * randm(d, d);
            S = 0.5 * (S + S.transpose()).eval();
            double gam = 0.0;
            for (Eigen::Index p = 0; p < d; ++p)
                for (Eigen::Index q = 0; q < d; ++q) {
                    G2(i, p * d + q) += S(p, q);
                    Gpsd(i, p * d + q) += P(p, q);
                    gam += S(p, q) * S(p, q);
                }
            dist[static_cast<std::size_t>(i)] = (Z1.row(i) - Z2.row(i)).norm() + std::sqrt(gam);
        }
        const double g1 = G(t, mu, y, Z1, G1);
        const double g2 = G(t, mu, y, Z2, G2);
        const double bound = G.lipschitz * pairwise_mean(dist);
        const double ratio = bound > 0.0 ? std::abs(g1 - g2) / bound : 0.0;
        a.worst_lipschitz_ratio = std::max(a.worst_lipschitz_ratio, ratio);
        if (std::abs(g1 - g2) > bound * (1.0 + 1e-9) + 1e-12) ++a.lipschitz_violations;
        if (G(t, mu, y, Z1, Gpsd) < g1 - 1e-12) ++a.monotonicity_violations;
    }
    return a;
}

double classical_residual(const MeasureFunctional& V, const GeneratorSpec& G, double t, const PathMeasure& mu,
                          double lambda) {
    if (!V.has_derivatives()) throw ConfigurationError("classical_residual: " + V.id() + " has no derivatives");
    const double y = V.value(t, mu);
    return V.dt(t, mu) - lambda * y + G(t, mu, y, V.dmu(t, mu), V.dxdmu(t, mu));
}

namespace {

void check_jet(const JetSpec& jet, const PathMeasure& P) {
    const auto n = static_cast<Eigen::Index>(P.count());
    const auto d = static_cast<Eigen::Index>(P.dim());
    if (jet.Z.rows() != n || jet.Z.cols() != d) throw ShapeError("jet: Z must be N x d");
    if (jet.Gamma.rows() != n || jet.Gamma.cols() != d * d) throw ShapeError("jet: Gamma must be N x d*d");
}

}  // namespace

double paraboloid_eval(const JetSpec& jet, double s, const PathMeasure& P) {
    check_jet(jet, P);
    if (s < jet.t - 1e-12) throw std::domain_error("paraboloid_eval: s < t");
    const TimeGrid& g = P.grid();
    const std::size_t k0 = g.index_at_or_below(jet.t), k1 = g.index_at_or_below(s);
    const std::size_t d = P.dim();
    std::vector<double> terms(P.count());
    std::vector<double> dx(d);
    for (std::size_t i = 0; i < P.count(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double lin = 0.0, quad = 0.0;
        for (std::size_t a = 0; a < d; ++a) dx[a] = P.value(i, k1, a) - P.value(i, k0, a);
        for (std::size_t a = 0; a < d; ++a) {
            lin += jet.Z(ii, static_cast<Eigen::Index>(a)) * dx[a];
            for (std::size_t b = 0; b < d; ++b) quad += jet.Gamma(ii, static_cast<Eigen::Index>(a * d + b)) * dx[a] * dx[b];
        }
        terms[i] = lin + 0.5 * quad;
    }
    return jet.y + jet.v * (s - jet.t) + pairwise_mean(terms);
}

FunctionalPtr paraboloid_functional(JetSpec jet) {
    auto value = [jet](double s, const PathMeasure& P) { return paraboloid_eval(jet, s, P); };
    auto dt = [jet](double, const PathMeasure&) { return jet.v; };
    auto dmu = [jet](double s, const PathMeasure& P) {
        check_jet(jet, P);
        const TimeGrid& g = P.grid();
        const std::size_t k0 = g.index_at_or_below(jet.t), k1 = g.index_at_or_below(s);
        const std::size_t d = P.dim();
        Eigen::MatrixXd out = jet.Z;
        for (std::size_t i = 0; i < P.count(); ++i)
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b) {
                    const double gs = 0.5 * (jet.Gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a * d + b)) +
                                             jet.Gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b * d + a)));
                    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) +=
                        gs * (P.value(i, k1, b) - P.value(i, k0, b));
                }
        return out;
    };
    auto dxdmu = [jet](double, const PathMeasure& P) {
        check_jet(jet, P);
        const std::size_t d = P.dim();
        Eigen::MatrixXd out = jet.Gamma;
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b)
                    out(i, static_cast<Eigen::Index>(a * d + b)) =
                        0.5 * (jet.Gamma(i, static_cast<Eigen::Index>(a * d + b)) + jet.Gamma(i, static_cast<Eigen::Index>(b * d + a)));
        return out;
    };
    return std::make_shared<LambdaFunctional>("paraboloid", value, dt, dmu, dxdmu);
}

JetSpec jet_from_candidate(const MeasureFunctional& V, double t, const PathMeasure& mu, double delta, double L,
                           JetSide side, double slack) {
    if (!V.has_derivatives()) throw ConfigurationError("jet_from_candidate: " + V.id() + " has no derivatives");
    if (!(delta > 0.0)) throw std::domain_error("jet_from_candidate: delta must be > 0");
    JetSpec j;
    j.t = t;
    j.y = V.value(t, mu);
    j.v = V.dt(t, mu) + (side == JetSide::Sub ? slack : -slack);
    j.Z = V.dmu(t, mu);
    j.Gamma = V.dxdmu(t, mu);
    j.delta = delta;
    j.L = L;
    j.side = side;
    return j;
}

std::vector<MembershipReport> jet_membership_test_many(const MeasureFunctional& V, const std::vector<JetSpec>& jets,
                                                       double t, const PathMeasure& mu, const SamplerConfig& cfg) {
    if (jets.empty()) return {};
    const double delta = jets.front().delta, L = jets.front().L;
    for (const auto& j : jets) {
        check_jet(j, mu);
        if (j.delta != delta || j.L != L || j.t != t) throw ConfigurationError("jet_membership_test: jets must share t, delta and L");
    }
    if (!(delta > 0.0)) throw std::domain_error("jet_membership_test: delta must be > 0");
    const TimeGrid& g = mu.grid();
    const double until = std::min(g.horizon(), t + delta);
    const std::size_t k0 = g.index_at_or_below(t), k1 = g.index_at_or_below(until);
    const double center = mean_at(mu, k0, 0);

    std::vector<MembershipReport> reps(jets.size());
    for (auto& r : reps) {
        r.min_margin = std::numeric_limits<double>::infinity();
        r.max_margin = -std::numeric_limits<double>::infinity();
    }
    BoundAudit audit;
    for (std::size_t k = 0; k < cfg.samples; ++k) {
        const GeneratorMember m = cfg.family.draw(cfg.seed, k, t, until - t, L, mu.dim(), center);
        const PathMeasure P = sample_PL_member(t, mu, L, m, derive_seed(cfg.seed, k), &audit, until);
        // s uniform over the grid points of [t, t + delta], t itself excluded when possible
        const std::size_t span = k1 - k0;
        const std::size_t ks = span == 0 ? k0
                                         : k0 + 1 + std::min<std::size_t>(span - 1, static_cast<std::size_t>(
                                                                                          counter_uniform(cfg.seed, k, 0x5E, 0) * static_cast<double>(span)));
        const double s = g.time(ks);
        const double vs = V.value(s, P);
        for (std::size_t j = 0; j < jets.size(); ++j) {
            const double margin = paraboloid_eval(jets[j], s, P) - vs;
            auto& r = reps[j];
            ++r.samples;
            r.min_margin = std::min(r.min_margin, margin);
            r.max_margin = std::max(r.max_margin, margin);
            const bool bad = jets[j].side == JetSide::Sub ? margin < -cfg.slack : margin > cfg.slack;
            if (bad) {
                const bool worse = !r.witness || (jets[j].side == JetSide::Sub ? margin < r.witness->margin
                                                                               : margin > r.witness->margin);
                r.refuted = true;
                if (worse) r.witness = MembershipWitness{k, s, m.kind, margin};
            }
        }
    }
    for (auto& r : reps) r.clamps = audit.clamps.load();
    return reps;
}

MembershipReport jet_membership_test(const MeasureFunctional& V, const JetSpec& jet, double t, const PathMeasure& mu,
                                     const SamplerConfig& cfg) {
    return jet_membership_test_many(V, {jet}, t, mu, cfg).front();
}

ViscosityReport viscosity_decide(const MeasureFunctional& V, const GeneratorSpec& G, const PathMeasure& mu,
                                 const JetSpec& jet, JetSide side, const MembershipReport& membership,
                                 double scalar_se) {
    if (side != jet.side) throw ConfigurationError("viscosity_check: jet side does not match the requested side");
    ViscosityReport r;
    r.side = side;
    r.membership = membership;
    r.tolerance = std::max(3.0 * scalar_se, 1e-9);
    r.scalar = jet.v + G(jet.t, mu, V.value(jet.t, mu), jet.Z, jet.Gamma);
    if (membership.refuted) {
        r.status = ViscosityStatus::JetRefuted;
        return r;
    }
    const bool ok = side == JetSide::Sub ? r.scalar >= -r.tolerance : r.scalar <= r.tolerance;
    r.status = ok ? ViscosityStatus::Passed : ViscosityStatus::Failed;
    return r;
}

ViscosityReport viscosity_check(const MeasureFunctional& V, const GeneratorSpec& G, double t, const PathMeasure& mu,
                                const JetSpec& jet, JetSide side, const SamplerConfig& cfg, double scalar_se) {
    if (side != jet.side) throw ConfigurationError("viscosity_check: jet side does not match the requested side");
    const MembershipReport m = jet_membership_test(V, jet, t, mu, cfg);
    return viscosity_decide(V, G, mu, jet, side, m, scalar_se);
}

namespace {

class ExpChanged : public MeasureFunctional {
public:
    ExpChanged(FunctionalPtr base, double lambda) : base_(std::move(base)), lambda_(lambda) {}
    std::string id() const override { return base_->id() + "+exp"; }
    double value(double t, const PathMeasure& mu) const override { return std::exp(lambda_ * t) * base_->value(t, mu); }
    bool has_derivatives() const override { return base_->has_derivatives(); }
    double dt(double t, const PathMeasure& mu) const override {
        return std::exp(lambda_ * t) * (lambda_ * base_->value(t, mu) + base_->dt(t, mu));
    }
    Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const override { return std::exp(lambda_ * t) * base_->dmu(t, mu); }
    Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const override {
        return std::exp(lambda_ * t) * base_->dxdmu(t, mu);
    }
    bool bounded_dt() const override { return base_->bounded_dt(); }
    bool linear_growth() const override { return base_->linear_growth(); }

private:
    FunctionalPtr base_;
    double lambda_;
};

}  // namespace

std::pair<FunctionalPtr, GeneratorSpec> exponential_change(FunctionalPtr V, const GeneratorSpec& G, double lambda) {
    if (!V) throw ConfigurationError("exponential_change: null functional");
    GeneratorSpec out;
    out.id = G.id + "+exp";
    out.lipschitz = G.lipschitz;
    const GeneratorFn base = G.G;
    out.G = [base, lambda](double t, const PathMeasure& mu, double y, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Gamma) {
        const double e = std::exp(-lambda * t);
        return base(t, mu, e * y, e * Z, e * Gamma) / e;
    };
    return {std::make_shared<ExpChanged>(std::move(V), lambda), out};
}

}  // namespace mkv
