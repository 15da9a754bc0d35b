#include "mkv/closed_forms.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/stats.hpp"

namespace mkv {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double remaining(double t, const PathMeasure& mu) {
    const double tau = mu.grid().horizon() - t;
    if (tau < -1e-12) throw std::domain_error("time beyond the horizon");
    return std::max(0.0, tau);
}

void require_dim1(const PathMeasure& mu, const std::string& id) {
    if (mu.dim() != 1) throw ShapeError(id + ": one-dimensional paths required");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) out.push_back(part);
    return out;
}

Eigen::MatrixXd column(const std::vector<double>& v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return m;
}

// 1/2 Gamma per particle, plus an optional running cost of x.
GeneratorSpec half_trace_generator(std::string id, std::function<double(double, double)> running, double lipschitz) {
    G2Fn g2 = [running](double t, const PathMeasure& mu, std::size_t i, double, const Eigen::RowVectorXd&,
                        const Eigen::RowVectorXd& gamma) {
        Eigen::VectorXd v(1);
        const std::size_t d = mu.dim();
        double tr = 0.0;
        for (std::size_t a = 0; a < d; ++a) tr += gamma(static_cast<Eigen::Index>(a * d + a));
        v(0) = 0.5 * tr;
        if (running) v(0) += running(t, mu.value(i, mu.grid().index_at_or_below(t), 0));
        return v;
    };
    G1Fn g1 = [](double, const PathMeasure&, double, const Eigen::VectorXd& m) { return m(0); };
    return expectation_generator(std::move(id), g1, g2, lipschitz);
}

}  // namespace

GaussRule gauss_hermite_normal(std::size_t n) {
    if (n == 0) throw ConfigurationError("gauss_hermite_normal: n must be >= 1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 1; k < n; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        J(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
        J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussRule r;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
        r.nodes.push_back(es.eigenvalues()(k));
        const double v = es.eigenvectors()(0, k);
        r.weights.push_back(v * v);
    }
    return r;
}

// ---------------------------------------------------------------- example

FunctionalPtr example_quadratic() {
    struct Parts {
        std::vector<double> a, a2, integ, a_integ;
    };
    auto parts = [](double t, const PathMeasure& mu) {
        require_dim1(mu, "example_quadratic");
        const std::size_t k = mu.grid().index_at_or_below(t);
        Parts p;
        const std::size_t n = mu.count();
        p.a.resize(n);
        p.a2.resize(n);
        p.integ.resize(n);
        p.a_integ.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            p.a[i] = mu.value(i, k, 0);
            p.a2[i] = p.a[i] * p.a[i];
            p.integ[i] = running_integral(mu, i, t);
            p.a_integ[i] = p.a[i] * p.integ[i];
        }
        return p;
    };
    auto value = [parts](double t, const PathMeasure& mu) {
        const Parts p = parts(t, mu);
        return pairwise_mean(p.a_integ) - pairwise_mean(p.a2) * pairwise_mean(p.integ);
    };
    auto dt = [parts](double t, const PathMeasure& mu) {
        const Parts p = parts(t, mu);
        return pairwise_mean(p.a2) - pairwise_mean(p.a2) * pairwise_mean(p.a);
    };
    auto dmu = [parts](double t, const PathMeasure& mu) {
        const Parts p = parts(t, mu);
        const double mi = pairwise_mean(p.integ);
        std::vector<double> z(p.a.size());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = p.integ[i] - 2.0 * p.a[i] * mi;
        return column(z);
    };
    auto dxdmu = [parts](double t, const PathMeasure& mu) {
        const Parts p = parts(t, mu);
        return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(p.a.size()), 1, -2.0 * pairwise_mean(p.integ)).eval();
    };
    return std::make_shared<LambdaFunctional>("example_quadratic", value, dt, dmu, dxdmu);
}

// ---------------------------------------------------------------- heat

namespace {

using Jet4 = std::array<double, 4>;  // u, u_t, u_x, u_xx

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class HeatFunctional : public MeasureFunctional {
public:
    HeatFunctional(std::string g, std::string f, HeatOptions opt)
        : g_(std::move(g)), f_(std::move(f)), opt_(opt), gh_(gauss_hermite_normal(opt.hermite_nodes)) {
        static const std::vector<std::string> gs{"linear", "quadratic", "cosine", "normal_cdf", "logistic", "running_mean"};
        static const std::vector<std::string> fs{"zero", "linear", "cosine"};
        if (std::find(gs.begin(), gs.end(), g_) == gs.end()) throw ConfigurationError("heat: unknown terminal '" + g_ + "'");
        if (std::find(fs.begin(), fs.end(), f_) == fs.end()) throw ConfigurationError("heat: unknown running cost '" + f_ + "'");
        if (g_ == "logistic" && opt_.mc_draws > 0) {
            const std::size_t half = (opt_.mc_draws + 1) / 2;
            for (std::size_t j = 0; j < half; ++j) {
                const double z = counter_normal(opt_.mc_seed, j, 0x4EA7, 0);
                mc_.push_back(z);
                mc_.push_back(-z);
            }
        }
    }

    std::string id() const override { return "heat:" + g_ + ":" + f_; }
    bool has_derivatives() const override { return true; }
    bool linear_growth() const override { return g_ != "quadratic"; }

    double value(double t, const PathMeasure& mu) const override { return mean_of(t, mu, 0); }
    double dt(double t, const PathMeasure& mu) const override { return mean_of(t, mu, 1); }
    Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const override { return column(per_particle(t, mu, 2)); }
    Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const override { return column(per_particle(t, mu, 3)); }

    double running(double, double x) const {
        if (f_ == "linear") return x;
        if (f_ == "cosine") return std::cos(x);
        return 0.0;
    }

private:
    Jet4 terminal(double x, double integ, double tau) const {
        if (g_ == "linear") return {x, 0.0, 1.0, 0.0};
        if (g_ == "quadratic") return {x * x + tau, -1.0, 2.0 * x, 2.0};
        if (g_ == "cosine") {
            const double e = std::exp(-0.5 * tau);
            return {e * std::cos(x), 0.5 * e * std::cos(x), -e * std::sin(x), -e * std::cos(x)};
        }
        if (g_ == "normal_cdf") {
            const double s = std::sqrt(1.0 + tau);
            const double z = x / s;
            const double uxx = -z * norm_pdf(z) / (s * s);
            return {norm_cdf(z), -0.5 * uxx, norm_pdf(z) / s, uxx};
        }
        if (g_ == "running_mean") return {integ + tau * x, 0.0, tau, 0.0};
        // logistic: Gaussian smoothing by quadrature or antithetic Monte Carlo
        const double st = std::sqrt(tau);
        double u = 0.0, ux = 0.0, uxx = 0.0;
        auto acc = [&](double z, double w) {
            const double s = logistic(x + st * z);
            u += w * s;
            ux += w * s * (1.0 - s);
            uxx += w * s * (1.0 - s) * (1.0 - 2.0 * s);
        };
        if (mc_.empty()) {
            for (std::size_t q = 0; q < gh_.nodes.size(); ++q) acc(gh_.nodes[q], gh_.weights[q]);
        } else {
            const double w = 1.0 / static_cast<double>(mc_.size());
            for (double z : mc_) acc(z, w);
        }
        return {u, -0.5 * uxx, ux, uxx};
    }

    Jet4 running_part(double x, double tau) const {
        if (f_ == "linear") return {tau * x, -x, tau, 0.0};
        if (f_ == "cosine") {
            const double e = std::exp(-0.5 * tau);
            return {2.0 * std::cos(x) * (1.0 - e), -std::cos(x) * e, -2.0 * std::sin(x) * (1.0 - e),
                    -2.0 * std::cos(x) * (1.0 - e)};
        }
        return {0.0, 0.0, 0.0, 0.0};
    }

    std::vector<double> per_particle(double t, const PathMeasure& mu, std::size_t slot) const {
        require_dim1(mu, id());
        const double tau = remaining(t, mu);
        const std::size_t k = mu.grid().index_at_or_below(t);
        std::vector<double> out(mu.count());
        for (std::size_t i = 0; i < mu.count(); ++i) {
            const double x = mu.value(i, k, 0);
            const double integ = g_ == "running_mean" ? running_integral(mu, i, t) : 0.0;
            out[i] = terminal(x, integ, tau)[slot] + running_part(x, tau)[slot];
        }
        return out;
    }

    double mean_of(double t, const PathMeasure& mu, std::size_t slot) const { return pairwise_mean(per_particle(t, mu, slot)); }

    std::string g_, f_;
    HeatOptions opt_;
    GaussRule gh_;
    std::vector<double> mc_;
};

}  // namespace

ReferenceEntry heat_solution(const std::string& g_id, const std::string& f_id, const HeatOptions& opt) {
    auto fn = std::make_shared<HeatFunctional>(g_id, f_id, opt);
    ReferenceEntry e;
    e.id = fn->id();
    e.functional = fn;
    e.generator = half_trace_generator(e.id, [fn](double t, double x) { return fn->running(t, x); }, 0.5);
    return e;
}

// ---------------------------------------------------------------- distortion

double distortion_kappa(const std::string& kappa_id, double p, std::size_t n) {
    if (kappa_id == "identity") return p;
    if (kappa_id == "reverse_s") return p + 0.6 * p * (1.0 - p) * (1.0 - 2.0 * p);
    if (kappa_id == "kinked") return std::min(2.0 * p, 0.5 * (1.0 + p));
    if (kappa_id == "kinked_mollified") {
        if (n == 0) throw ConfigurationError("distortion: kinked_mollified needs n >= 1");
        const double h = 1.0 / static_cast<double>(n);
        const double x = p - 1.0 / 3.0;
        return 2.0 * p - 1.5 * 0.5 * (x + std::sqrt(x * x + h * h));
    }
    throw ConfigurationError("distortion: unknown kappa '" + kappa_id + "'");
}

namespace {

double kappa_prime(const std::string& id, double p, std::size_t n) {
    if (id == "identity") return 1.0;
    if (id == "reverse_s") return 1.0 + 0.6 * (1.0 - 6.0 * p + 6.0 * p * p);
    if (id == "kinked_mollified") {
        const double h = 1.0 / static_cast<double>(n);
        const double x = p - 1.0 / 3.0;
        return 2.0 - 0.75 * (1.0 + x / std::sqrt(x * x + h * h));
    }
    throw ConfigurationError("distortion: kappa '" + id + "' is not differentiable");
}

class DistortionFunctional : public MeasureFunctional {
public:
    DistortionFunctional(std::string kappa, std::size_t n) : kappa_(std::move(kappa)), n_(n) {
        distortion_kappa(kappa_, 0.5, n_);  // validates the id
    }
    std::string id() const override {
        return "distortion:" + kappa_ + (kappa_ == "kinked_mollified" ? ":" + std::to_string(n_) : "");
    }
    bool has_derivatives() const override { return kappa_ != "kinked"; }

    double value(double t, const PathMeasure& mu) const override {
        require_dim1(mu, id());
        const double tau = remaining(t, mu);
        const std::vector<double> x = positions(t, mu);
        if (tau <= 0.0) return terminal_value(x);
        const Nodes q = nodes(x, tau);
        std::vector<double> terms(q.z.size());
        for (std::size_t j = 0; j < q.z.size(); ++j) terms[j] = q.w[j] * distortion_kappa(kappa_, tail(x, q.z[j], tau), n_);
        return pairwise_sum(terms);
    }

    double dt(double t, const PathMeasure& mu) const override {
        const double tau = smooth_tau(t, mu);
        const std::vector<double> x = positions(t, mu);
        const Nodes q = nodes(x, tau);
        const double s = std::sqrt(tau);
        std::vector<double> terms(q.z.size()), inner(x.size());
        for (std::size_t j = 0; j < q.z.size(); ++j) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double u = (x[i] - q.z[j]) / s;
                inner[i] = u * norm_pdf(u) / (2.0 * tau);
            }
            terms[j] = q.w[j] * kappa_prime(kappa_, tail(x, q.z[j], tau), n_) * pairwise_mean(inner);
        }
        return pairwise_sum(terms);
    }

    Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const override {
        return particle_integral(t, mu, [](double u, double s) { return norm_pdf(u) / s; });
    }
    Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const override {
        return particle_integral(t, mu, [](double u, double s) { return -u * norm_pdf(u) / (s * s); });
    }

private:
    struct Nodes {
        std::vector<double> z, w;  // w includes the normal density
    };

    static std::vector<double> positions(double t, const PathMeasure& mu) {
        const std::size_t k = mu.grid().index_at_or_below(t);
        std::vector<double> x(mu.count());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = mu.value(i, k, 0);
        return x;
    }

    double smooth_tau(double t, const PathMeasure& mu) const {
        require_dim1(mu, id());
        if (!has_derivatives()) kappa_prime(kappa_, 0.5, n_);
        const double tau = remaining(t, mu);
        if (tau <= 0.0) throw std::domain_error(id() + ": derivatives undefined at the horizon");
        return tau;
    }

    static double tail(const std::vector<double>& x, double z, double tau) {
        const double s = std::sqrt(tau);
        std::vector<double> p(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) p[i] = norm_cdf((x[i] - z) / s);
        return pairwise_mean(p);
    }

    // composite 20-point Gauss-Legendre on [-9, 9], refined to width sqrt(tau)/2 near the particles
    static Nodes nodes(const std::vector<double>& x, double tau) {
        using GL = boost::math::quadrature::gauss<double, 20>;
        const double s = std::sqrt(tau);
        const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
        const double lo = -9.0, hi = 9.0;
        const double a = std::clamp(*mn - 8.0 * s, lo, hi), b = std::clamp(*mx + 8.0 * s, lo, hi);
        std::vector<double> cuts;
        auto add_range = [&](double from, double to, double width) {
            if (to <= from) return;
            const std::size_t m = std::min<std::size_t>(20000, static_cast<std::size_t>(std::ceil((to - from) / width)));
            for (std::size_t j = 0; j < m; ++j) cuts.push_back(from + (to - from) * static_cast<double>(j) / static_cast<double>(m));
        };
        add_range(lo, a, 0.5);
        add_range(a, b, std::min(0.5, 0.5 * s));
        add_range(b, hi, 0.5);
        cuts.push_back(hi);
        Nodes out;
        const auto& ab = GL::abscissa();
        const auto& wt = GL::weights();
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double mid = 0.5 * (cuts[c] + cuts[c + 1]), half = 0.5 * (cuts[c + 1] - cuts[c]);
            for (std::size_t q = 0; q < ab.size(); ++q) {
                for (double sign : {-1.0, 1.0}) {
                    const double z = mid + sign * half * ab[q];
                    out.z.push_back(z);
                    out.w.push_back(half * wt[q] * norm_pdf(z));
                }
            }
        }
        return out;
    }

    double terminal_value(std::vector<double> x) const {
        std::sort(x.begin(), x.end());
        const double n = static_cast<double>(x.size());
        std::vector<double> terms;
        double prev = 0.0;
        for (std::size_t r = 0; r <= x.size(); ++r) {
            const double next = r < x.size() ? norm_cdf(x[r]) : 1.0;
            terms.push_back((next - prev) * distortion_kappa(kappa_, (n - static_cast<double>(r)) / n, n_));
            prev = next;
        }
        return pairwise_sum(terms);
    }

    template <class K>
    Eigen::MatrixXd particle_integral(double t, const PathMeasure& mu, K kernel) const {
        const double tau = smooth_tau(t, mu);
        const std::vector<double> x = positions(t, mu);
        const Nodes q = nodes(x, tau);
        const double s = std::sqrt(tau);
        std::vector<double> kp(q.z.size());
        for (std::size_t j = 0; j < q.z.size(); ++j) kp[j] = q.w[j] * kappa_prime(kappa_, tail(x, q.z[j], tau), n_);
        Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), 1);
        std::vector<double> terms(q.z.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = 0; j < q.z.size(); ++j) terms[j] = kp[j] * kernel((x[i] - q.z[j]) / s, s);
            out(static_cast<Eigen::Index>(i), 0) = pairwise_sum(terms);
        }
        return out;
    }

    std::string kappa_;
    std::size_t n_;
};

}  // namespace

ReferenceEntry distortion_value(const std::string& kappa_id, std::size_t n) {
    auto fn = std::make_shared<DistortionFunctional>(kappa_id, n);
    ReferenceEntry e;
    e.id = fn->id();
    e.functional = fn;
    e.generator = half_trace_generator(e.id, {}, 0.5);
    if (kappa_id == "kinked_mollified") e.metadata["sup_kappa_error"] = 0.75 / static_cast<double>(n);
    return e;
}

// ---------------------------------------------------------------- semilinear

namespace {

struct SemilinearSetup {
    double q = 0.0;  // G1(y) = q y^2 / 2
    bool concave_g = true;
    double shift = 0.0;
    double L0 = 1.0;
    double b_lo = 0.0, b_hi = 0.0;
};

double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double b_of(const SemilinearSetup& s, double a) {
    if (s.q > 0.0) {
        const double y = std::clamp(a / s.q, -s.L0, s.L0);
        return a * y - 0.5 * s.q * y * y;
    }
    return s.L0 * std::abs(a) - 0.5 * s.q * s.L0 * s.L0;
}

SemilinearSetup semilinear_setup(const std::string& G1_id, const std::string& g_id, const SemilinearOptions& opt) {
    SemilinearSetup s;
    if (!(opt.L0 > 0.0) || !(opt.a_max >= 0.0)) throw ConfigurationError("semilinear: L0 > 0 and a_max >= 0 required");
    if (G1_id == "zero") s.q = 0.0;
    else if (G1_id == "quadratic") s.q = 1.0;
    else if (G1_id == "neg_quadratic") s.q = -1.0;
    else throw ConfigurationError("semilinear: unknown G1 '" + G1_id + "'");
    if (g_id == "neg_logcosh") s.concave_g = true;
    else if (g_id == "logcosh") s.concave_g = false;
    else throw ConfigurationError("semilinear: unknown terminal '" + g_id + "'");
    if (s.concave_g && s.q < 0.0) throw ConfigurationError("semilinear: concave terminal needs a convex G1");
    if (!s.concave_g && s.q > 0.0) throw ConfigurationError("semilinear: convex terminal needs a concave G1");
    s.L0 = opt.L0;
    if (opt.mollify > 0) {
        const double n = static_cast<double>(opt.mollify);
        s.q += (s.concave_g ? 1.0 : -1.0) / (n * opt.L0 * opt.L0);
        s.shift = 0.5 / n;
    }
    s.b_lo = b_of(s, 0.0);
    s.b_hi = b_of(s, opt.a_max);
    return s;
}

class SemilinearFunctional : public MeasureFunctional {
public:
    SemilinearFunctional(std::string id, SemilinearSetup s, std::size_t nodes)
        : id_(std::move(id)), s_(s), gh_(gauss_hermite_normal(nodes)) {}

    std::string id() const override { return id_; }
    bool has_derivatives() const override { return true; }

    double value(double t, const PathMeasure& mu) const override {
        const State st = solve(t, mu);
        return expect(st, 0) + s_.shift;
    }
    double dt(double t, const PathMeasure& mu) const override {
        const State st = solve(t, mu);
        return -st.b * expect(st, 1) - 0.5 * expect(st, 2);
    }
    Eigen::MatrixXd dmu(double t, const PathMeasure& mu) const override { return column(per_particle(solve(t, mu), 1)); }
    Eigen::MatrixXd dxdmu(double t, const PathMeasure& mu) const override { return column(per_particle(solve(t, mu), 2)); }

    double hamiltonian(double p) const { return std::max(s_.b_lo * p, s_.b_hi * p); }

private:
    struct State {
        std::vector<double> x;
        double tau = 0.0;
        double b = 0.0;
    };

    double g(double x, int order) const {
        const double sign = s_.concave_g ? -1.0 : 1.0;
        if (order == 0) return sign * log_cosh(x);
        if (order == 1) return sign * std::tanh(x);
        const double c = 1.0 / std::cosh(x);
        return sign * c * c;
    }

    std::vector<double> per_particle_at(const std::vector<double>& x, double tau, double b, int order) const {
        const double st = std::sqrt(tau);
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double acc = 0.0;
            for (std::size_t q = 0; q < gh_.nodes.size(); ++q) acc += gh_.weights[q] * g(x[i] + b * tau + st * gh_.nodes[q], order);
            out[i] = acc;
        }
        return out;
    }

    std::vector<double> per_particle(const State& st, int order) const { return per_particle_at(st.x, st.tau, st.b, order); }
    double expect(const State& st, int order) const { return pairwise_mean(per_particle(st, order)); }

    State solve(double t, const PathMeasure& mu) const {
        require_dim1(mu, id_);
        State st;
        st.tau = remaining(t, mu);
        const std::size_t k = mu.grid().index_at_or_below(t);
        st.x.resize(mu.count());
        for (std::size_t i = 0; i < st.x.size(); ++i) st.x[i] = mu.value(i, k, 0);
        auto h = [&](double b, int order) { return pairwise_mean(per_particle_at(st.x, st.tau, b, order)); };
        const double lo = s_.b_lo, hi = s_.b_hi;
        if (!s_.concave_g) {
            st.b = h(hi, 0) > h(lo, 0) ? hi : lo;
            return st;
        }
        // concave: h'(b) = tau E[g'] is decreasing in b
        if (h(lo, 1) <= 0.0) {
            st.b = lo;
            return st;
        }
        if (h(hi, 1) >= 0.0) {
            st.b = hi;
            return st;
        }
        double a = lo, c = hi, b = 0.5 * (lo + hi);
        for (int it = 0; it < 100 && c - a > 1e-14 * (1.0 + std::abs(b)); ++it) {
            const double psi = h(b, 1);
            if (psi > 0.0) a = b;
            else c = b;
            const double dpsi = st.tau * h(b, 2);
            double next = dpsi < 0.0 ? b - psi / dpsi : 0.5 * (a + c);
            if (!(next > a && next < c)) next = 0.5 * (a + c);
            if (next == b) break;
            b = next;
        }
        st.b = b;
        return st;
    }

    std::string id_;
    SemilinearSetup s_;
    GaussRule gh_;
};

}  // namespace

double semilinear_b(const std::string& G1_id, const std::string& g_id, double a, const SemilinearOptions& opt) {
    return b_of(semilinear_setup(G1_id, g_id, opt), a);
}

ReferenceEntry semilinear_solution(const std::string& G1_id, const std::string& g_id, const SemilinearOptions& opt) {
    const SemilinearSetup s = semilinear_setup(G1_id, g_id, opt);
    std::string id = "semilinear:" + G1_id + ":" + g_id;
    if (opt.mollify > 0) id += ":" + std::to_string(opt.mollify);
    auto fn = std::make_shared<SemilinearFunctional>(id, s, opt.hermite_nodes);
    ReferenceEntry e;
    e.id = id;
    e.functional = fn;
    G2Fn g2 = [](double, const PathMeasure&, std::size_t, double, const Eigen::RowVectorXd& z, const Eigen::RowVectorXd& gamma) {
        Eigen::VectorXd v(2);
        v(0) = z(0);
        v(1) = 0.5 * gamma(0);
        return v;
    };
    G1Fn g1 = [fn](double, const PathMeasure&, double, const Eigen::VectorXd& m) { return m(1) + fn->hamiltonian(m(0)); };
    e.generator = expectation_generator(id, g1, g2, std::max({0.5, std::abs(s.b_lo), std::abs(s.b_hi)}));
    e.metadata["b_lo"] = s.b_lo;
    e.metadata["b_hi"] = s.b_hi;
    e.metadata["g1_curvature"] = s.q;
    return e;
}

// ---------------------------------------------------------------- registry

std::vector<std::string> reference_ids() {
    std::vector<std::string> ids{"example_quadratic"};
    for (const char* g : {"linear", "quadratic", "cosine", "normal_cdf", "logistic", "running_mean"})
        for (const char* f : {"zero", "linear", "cosine"}) ids.push_back(std::string("heat:") + g + ":" + f);
    for (const char* k : {"identity", "reverse_s", "kinked"}) ids.push_back(std::string("distortion:") + k);
    ids.push_back("distortion:kinked_mollified:10");
    for (const char* g1 : {"zero", "quadratic"}) ids.push_back(std::string("semilinear:") + g1 + ":neg_logcosh");
    for (const char* g1 : {"zero", "neg_quadratic"}) ids.push_back(std::string("semilinear:") + g1 + ":logcosh");
    return ids;
}

ReferenceEntry reference_by_id(const std::string& id) {
    const auto parts = split(id, ':');
    auto num = [&](std::size_t i) -> std::size_t {
        if (parts.size() <= i) return 0;
        try {
            return static_cast<std::size_t>(std::stoul(parts[i]));
        } catch (const std::exception&) {
            throw ConfigurationError("reference id '" + id + "': bad integer");
        }
    };
    if (parts.empty()) throw ConfigurationError("empty reference id");
    if (parts[0] == "example_quadratic" && parts.size() == 1) {
        ReferenceEntry e;
        e.id = id;
        e.functional = example_quadratic();
        return e;
    }
    if (parts[0] == "heat" && (parts.size() == 2 || parts.size() == 3))
        return heat_solution(parts[1], parts.size() == 3 ? parts[2] : "zero");
    if (parts[0] == "distortion" && (parts.size() == 2 || parts.size() == 3)) return distortion_value(parts[1], num(2));
    if (parts[0] == "semilinear" && (parts.size() == 3 || parts.size() == 4)) {
        SemilinearOptions o;
        o.mollify = num(3);
        return semilinear_solution(parts[1], parts[2], o);
    }
    throw ConfigurationError("unknown reference id '" + id + "'");
}

// ---------------------------------------------------------------- counterexamples

namespace {

double end_variance(const PathMeasure& p) {
    const std::size_t M = p.grid().steps();
    std::vector<double> x(p.count()), x2(p.count());
    for (std::size_t i = 0; i < p.count(); ++i) {
        x[i] = p.value(i, M, 0);
        x2[i] = x[i] * x[i];
    }
    const double m = pairwise_mean(x);
    return pairwise_mean(x2) - m * m;
}

DynamicsSpec drift_control(std::string id) {
    DynamicsSpec d;
    d.id = std::move(id);
    d.drift = [](const StepContext&, std::size_t, double a, std::span<double> out) { out[0] = a; };
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    d.bound = 1.0;
    d.actions = ActionSet::finite({-1.0, 0.0, 1.0});
    return d;
}

}  // namespace

std::vector<CounterexampleInstance> counterexample_instances() {
    std::vector<CounterexampleInstance> out;
    const TerminalCost neg_var = [](const PathMeasure& p) { return -end_variance(p); };
    out.push_back({"openloop_gap", drift_control("openloop_gap"), neg_var,
                   {{"horizon", 2.0}, {"t", 0.0}, {"switch_spacing", 0.05}}});

    DynamicsSpec vol;
    vol.id = "discontinuity";
    vol.drift = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 0.0; };
    vol.vol = [](const StepContext&, std::size_t, double a, std::span<double> out) { out[0] = 1.0 + a * a; };
    vol.bound = 2.0;
    vol.actions = ActionSet::finite({-1.0, 0.0, 1.0});
    const TerminalCost moment = [](const PathMeasure& p) {
        const std::size_t M = p.grid().steps();
        std::vector<double> x2(p.count()), x4(p.count());
        for (std::size_t i = 0; i < p.count(); ++i) {
            const double x = p.value(i, M, 0);
            x2[i] = x * x;
            x4[i] = x2[i] * x2[i];
        }
        const double m2 = pairwise_mean(x2);
        return pairwise_mean(x4) / 3.0 - m2 * m2;
    };
    out.push_back({"discontinuity", vol, moment, {{"horizon", 1.0}, {"value_at_zero", 0.0}, {"limit_at_zero", 2.25}}});
    out.push_back({"state_dependence", drift_control("state_dependence"), neg_var, {{"horizon", 1.0}, {"t", 0.5}}});
    return out;
}

StateDependenceInstance state_dependence_instance(std::size_t particles, std::size_t steps) {
    if (particles == 0 || particles % 2 != 0) throw ConfigurationError("state_dependence: particle count must be even");
    if (steps % 4 != 0) throw ConfigurationError("state_dependence: steps must be a multiple of 4");
    const double t = 0.5, h = 0.5 * t;
    const TimeGrid grid(1.0, steps);
    PathMeasure mu_a(grid, 1, particles), mu_b(grid, 1, particles);
    for (std::size_t i = 0; i < particles; ++i) {
        const double s = i < particles / 2 ? 1.0 : -1.0;
        for (std::size_t k = 0; k <= steps; ++k) {
            const double u = std::min(grid.time(k), t);
            mu_a.value(i, k, 0) = s * u / t;
            mu_b.value(i, k, 0) = u <= h ? -0.5 * s * u / h : -0.5 * s + 1.5 * s * (u - h) / h;
        }
    }
    StateDependenceInstance inst{t, std::move(mu_a), std::move(mu_b), {}, {}, {}, {}};
    inst.dynamics = drift_control("state_dependence");
    inst.terminal = [](const PathMeasure& p) { return -end_variance(p); };
    inst.path_terminal = [](const PathMeasure& p) {
        std::vector<double> m(p.count());
        for (std::size_t i = 0; i < p.count(); ++i) {
            double best = p.value(i, 0, 0);
            for (std::size_t k = 1; k <= p.grid().steps(); ++k) best = std::max(best, p.value(i, k, 0));
            m[i] = best;
        }
        return pairwise_mean(m);
    };
    inst.space.breakpoints = {t, 1.0};
    inst.space.layouts = {IntervalLayout{{Observation{h, std::nullopt, {0.0}}, Observation{t, std::nullopt, {0.0}}}}};
    inst.space.actions = {-1.0, 0.0, 1.0};
    return inst;
}

}  // namespace mkv
