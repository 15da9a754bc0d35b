#include "cli.hpp"

#include <omp.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "mkv/closed_forms.hpp"
#include "mkv/control.hpp"
#include "mkv/coupling.hpp"
#include "mkv/errors.hpp"
#include "mkv/io.hpp"
#include "mkv/lions.hpp"
#include "mkv/master.hpp"
#include "mkv/rng.hpp"
#include "mkv/simulate.hpp"
#include "mkv/stats.hpp"
#include "mkv/transport.hpp"

namespace mkvlab {

namespace fs = std::filesystem;
using namespace mkv;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr std::size_t kSweepCap = 256;

// ------------------------------------------------------------------ schemas

enum class Kind { Int, Num, Str, Bool, NumList };

struct Param {
    std::string name;
    Kind kind;
    json fallback;
    double lo = -INFINITY;
    double hi = INFINITY;
    std::vector<std::string> choices = {};
};

using Schema = std::vector<Param>;

Schema common() {
    return {{"command", Kind::Str, nullptr},
            {"seed", Kind::Int, 1, 0, 9.0e15},
            {"output", Kind::Str, "mkvlab-out"}};
}

const std::map<std::string, Schema>& schemas() {
    static const std::map<std::string, Schema> s = {
        {"ito-check",
         {{"functional", Kind::Str, "example_quadratic"},
          {"dynamics", Kind::Str, "sine", -INFINITY, INFINITY, {"sine", "bm", "ou", "mean_reverting"}},
          {"x0", Kind::Num, 1.0},
          {"N", Kind::Int, 20000, 1, 1e7},
          {"M", Kind::Int, 200, 1, 1e5},
          {"T", Kind::Num, 1.0, 1e-9, 1e3},
          {"convention", Kind::Str, "sigma", -INFINITY, INFINITY, {"sigma", "increment"}}}},
        {"derivative-check",
         {{"functional", Kind::Str, "example_quadratic"},
          {"measures", Kind::Int, 10, 1, 1e4},
          {"particles", Kind::Int, 30, 1, 1e5},
          {"checks_per_measure", Kind::Int, 10, 1, 1e5},
          {"M", Kind::Int, 50, 1, 1e5},
          {"T", Kind::Num, 1.0, 1e-9, 1e3},
          {"eps_scale", Kind::Num, 1.0, 1e-12, 1e12}}},
        {"wasserstein",
         {{"a", Kind::Str, ""},
          {"b", Kind::Str, ""},
          {"identical", Kind::Bool, false},
          {"particles", Kind::Int, 8, 1, 1e5},
          {"M", Kind::Int, 10, 1, 1e5},
          {"stop_time", Kind::Num, -1.0}}},
        {"coupling",
         {{"instances", Kind::Int, 50, 1, 1e5},
          {"particles", Kind::Int, 20, 1, 256},
          {"M", Kind::Int, 8, 1, 1e4},
          {"eps", Kind::Num, 1e-3, 1e-12, 1e6},
          {"delta", Kind::Num, 0.1, 1e-12, 1e6},
          {"substeps", Kind::Int, 4, 1, 1e4}}},
        {"residual",
         {{"reference", Kind::Str, "heat:quadratic:zero"},
          {"points", Kind::Int, 10, 1, 1e4},
          {"particles", Kind::Int, 50, 1, 1e6},
          {"M", Kind::Int, 100, 2, 1e5},
          {"T", Kind::Num, 1.0, 1e-9, 1e3},
          {"numeric", Kind::Bool, false},
          {"lambda", Kind::Num, 0.0}}},
        {"viscosity-check",
         {{"reference", Kind::Str, "semilinear:quadratic:neg_logcosh"},
          {"T", Kind::Num, 0.25, 1e-9, 1e3},
          {"M", Kind::Int, 1000, 2, 1e6},
          {"points", Kind::Int, 5, 1, 1e3},
          {"particles", Kind::Int, 500, 1, 1e6},
          {"samples", Kind::Int, 1000, 1, 1e7},
          {"delta", Kind::Num, 0.002, 1e-12, 1e3},
          {"slack", Kind::Num, 0.01, 0.0, 1e3},
          {"L", Kind::Num, 1.0, 1e-12, 1e6},
          {"corrupt", Kind::Num, 0.0},
          {"x0_mean", Kind::Num, 1.0},
          {"x0_sd", Kind::Num, 0.5, 0.0, 1e6}}},
        {"dpp-check",
         {{"class", Kind::Str, "full", -INFINITY, INFINITY, {"full", "restricted"}},
          {"N", Kind::Int, 16000, 8, 1e8},
          {"M", Kind::Int, 40, 2, 1e5},
          {"budget", Kind::Int, 243, 1, 1e6},
          {"replications", Kind::Int, 8, 2, 1e4}}},
        {"value-search",
         {{"instance", Kind::Str, "neq", -INFINITY, INFINITY, {"neq", "discontinuity"}},
          {"N", Kind::Int, 16000, 8, 1e8},
          {"M", Kind::Int, 40, 1, 1e5},
          {"budget", Kind::Int, 243, 1, 1e6},
          {"intervals", Kind::Int, 2, 1, 16},
          {"eps", Kind::Num, 0.1}}},
        {"counterexample",
         {{"variant", Kind::Str, "discontinuity", -INFINITY, INFINITY, {"neq", "discontinuity"}},
          {"N", Kind::Int, 0, 0, 1e9},
          {"eps", Kind::NumList, json::array({0.1})},
          {"probes", Kind::NumList, json::array({0.01})},
          {"T", Kind::Num, 2.0, 1e-9, 1e3},
          {"t", Kind::Num, 0.0, 0.0, 1e3},
          {"steps", Kind::Int, 1, 1, 1e5}}},
        {"state-dependence",
         {{"particles", Kind::Int, 5000, 2, 1e7},
          {"steps", Kind::Int, 20, 4, 1e5},
          {"N", Kind::Int, 40000, 8, 1e8},
          {"budget", Kind::Int, 81, 1, 1e6},
          {"terminal", Kind::Str, "variance", -INFINITY, INFINITY, {"variance", "path_max"}}}},
        {"moment-bound",
         {{"measures", Kind::Int, 50, 1, 1e5},
          {"particles", Kind::Int, 200, 1, 1e6},
          {"M", Kind::Int, 200, 2, 1e6},
          {"T", Kind::Num, 1.0, 1e-9, 1e3},
          {"t", Kind::Num, 0.2, 0.0, 1e3},
          {"L", Kind::Num, 1.0, 1e-12, 1e6},
          {"p", Kind::Int, 4, 2, 20},
          {"deltas", Kind::NumList, json::array({0.0125, 0.025, 0.05, 0.1, 0.2})}}},
    };
    return s;
}

void check_value(const Param& p, const json& v) {
    auto fail = [&](const std::string& why) { throw UsageError("config key '" + p.name + "': " + why); };
    auto range = [&](double x) {
        if (!std::isfinite(x)) fail("must be finite");
        if (x < p.lo || x > p.hi) fail("out of range [" + json(p.lo).dump() + ", " + json(p.hi).dump() + "]");
    };
    switch (p.kind) {
    case Kind::Int:
        if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()))
            fail("expected an integer");
        range(v.get<double>());
        break;
    case Kind::Num:
        if (!v.is_number()) fail("expected a number");
        range(v.get<double>());
        break;
    case Kind::Str:
        if (!v.is_string()) fail("expected a string");
        if (!p.choices.empty() && std::find(p.choices.begin(), p.choices.end(), v.get<std::string>()) == p.choices.end())
            fail("unknown value '" + v.get<std::string>() + "'");
        break;
    case Kind::Bool:
        if (!v.is_boolean()) fail("expected true or false");
        break;
    case Kind::NumList:
        if (!v.is_array() || v.empty()) fail("expected a non-empty array of numbers");
        for (const auto& e : v)
            if (!e.is_number() || !std::isfinite(e.get<double>())) fail("expected finite numbers");
        break;
    }
}

Schema full_schema(const std::string& command) {
    const auto& all = schemas();
    const auto it = all.find(command);
    if (it == all.end()) throw UsageError("unknown command '" + command + "'");
    Schema s = common();
    s.insert(s.end(), it->second.begin(), it->second.end());
    return s;
}

json resolve_with(const json& raw, const std::vector<std::string>& extra_keys) {
    if (!raw.is_object()) throw UsageError("config must be a JSON object");
    if (!raw.contains("command") || !raw["command"].is_string()) throw UsageError("config needs a string 'command'");
    const std::string command = raw["command"].get<std::string>();
    const Schema schema = full_schema(command);
    for (const auto& [key, value] : raw.items()) {
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const Param& p) { return p.name == key; }) ||
                           std::find(extra_keys.begin(), extra_keys.end(), key) != extra_keys.end();
        if (!known) throw UsageError("unknown config key '" + key + "' for command " + command);
    }
    json out = json::object();
    for (const auto& p : schema) {
        if (raw.contains(p.name)) {
            check_value(p, raw[p.name]);
            out[p.name] = raw[p.name];
        } else {
            out[p.name] = p.fallback;
        }
    }
    return out;
}

// ------------------------------------------------------------------ helpers

std::size_t as_size(const json& c, const char* k) { return static_cast<std::size_t>(c.at(k).get<double>()); }
double as_num(const json& c, const char* k) { return c.at(k).get<double>(); }
std::string as_str(const json& c, const char* k) { return c.at(k).get<std::string>(); }
std::uint64_t seed_of(const json& c) { return static_cast<std::uint64_t>(c.at("seed").get<double>()); }

DynamicsSpec dynamics_by_id(const std::string& id) {
    DynamicsSpec d;
    d.id = id;
    d.vol = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 1.0; };
    if (id == "sine")
        d.drift = [](const StepContext& c, std::size_t i, double, std::span<double> out) { out[0] = std::sin(c.state.value(i, c.k, 0)); };
    else if (id == "bm")
        d.drift = [](const StepContext&, std::size_t, double, std::span<double> out) { out[0] = 0.0; };
    else if (id == "ou")
        d.drift = [](const StepContext& c, std::size_t i, double, std::span<double> out) { out[0] = -c.state.value(i, c.k, 0); };
    else
        d.drift = [](const StepContext& c, std::size_t i, double, std::span<double> out) {
            out[0] = c.mean[0] - c.state.value(i, c.k, 0);
        };
    return d;
}

std::vector<double> num_list(const json& v) {
    std::vector<double> out;
    for (const auto& e : v) out.push_back(e.get<double>());
    return out;
}

// ------------------------------------------------------------------ commands

Table cmd_ito(const json& c) {
    const ReferenceEntry ref = reference_by_id(as_str(c, "functional"));
    const TimeGrid g(as_num(c, "T"), as_size(c, "M"));
    const PathMeasure mu = PathMeasure::constant(g, 1, {as_num(c, "x0")});
    SimulationOptions opt;
    opt.record_diffusion = true;
    const auto res = simulate_mkv(0.0, mu, dynamics_by_id(as_str(c, "dynamics")), nullptr, as_size(c, "N"), seed_of(c), opt);
    ItoOptions io;
    io.convention = as_str(c, "convention") == "sigma" ? QVConvention::DiffusionDt : QVConvention::IncrementSquare;
    io.numeric_fallback = true;
    const ItoReport r = ito_residual(*ref.functional, res, g.horizon(), io);
    const bool pass = std::abs(r.residual) <= std::max(0.02 * std::abs(r.lhs), 3.0 * r.se);
    Table t;
    t.columns = {"functional", "dynamics", "N", "M", "dt", "lhs", "rhs", "residual", "relative", "stderr", "pass"};
    t.rows.push_back({ref.id, as_str(c, "dynamics"), r.particles, g.steps(), g.dt(), r.lhs, r.rhs, r.residual, r.relative, r.se, pass});
    t.summary = {{"dt", g.dt()}, {"residual", r.residual}, {"abs_residual", std::abs(r.residual)}, {"relative", r.relative},
                 {"stderr", r.se}, {"pass", pass}};
    return t;
}

Table cmd_derivative(const json& c) {
    const ReferenceEntry ref = reference_by_id(as_str(c, "functional"));
    if (!ref.functional->has_derivatives()) throw ConfigurationError(ref.id + " has no closed-form derivatives to compare against");
    const TimeGrid g(as_num(c, "T"), as_size(c, "M"));
    const double scale = as_num(c, "eps_scale");
    Table t;
    t.columns = {"measure", "particle", "t", "dmu_numeric", "dmu_exact", "dmu_error", "dxdmu_numeric", "dxdmu_exact", "dxdmu_error"};
    double worst1 = 0.0, worst2 = 0.0;
    for (std::size_t m = 0; m < as_size(c, "measures"); ++m) {
        const std::uint64_t s = derive_seed(seed_of(c), m);
        const PathMeasure mu = random_walk_measure(g, 1, as_size(c, "particles"), s);
        const std::size_t k = 1 + static_cast<std::size_t>(counter_uniform(s, 0, 1, 0) * static_cast<double>(g.steps() - 1));
        const double tt = g.time(std::min(k, g.steps() - 1));
        const Eigen::MatrixXd Z = ref.functional->dmu(tt, mu), G = ref.functional->dxdmu(tt, mu);
        for (std::size_t r = 0; r < as_size(c, "checks_per_measure"); ++r) {
            const std::size_t i = static_cast<std::size_t>(counter_uniform(s, r, 2, 0) * static_cast<double>(mu.count())) % mu.count();
            const double e = scale * default_bump(mu, tt, i);
            const double n1 = lions_derivative(*ref.functional, tt, mu, i, e)(0);
            const double n2 = second_pathwise_derivative(*ref.functional, tt, mu, i, 10.0 * e, 10.0 * e)(0, 0);
            const double x1 = Z(static_cast<Eigen::Index>(i), 0), x2 = G(static_cast<Eigen::Index>(i), 0);
            const double e1 = std::abs(n1 - x1) / std::max(std::abs(x1), 1.0), e2 = std::abs(n2 - x2) / std::max(std::abs(x2), 1.0);
            worst1 = std::max(worst1, e1);
            worst2 = std::max(worst2, e2);
            t.rows.push_back({m, i, tt, n1, x1, e1, n2, x2, e2});
        }
    }
    t.summary = {{"eps_scale", scale}, {"max_dmu_error", worst1}, {"max_dxdmu_error", worst2}, {"pass", worst1 <= 1e-3 && worst2 <= 1e-3}};
    return t;
}

Table cmd_wasserstein(const json& c) {
    const std::string fa = as_str(c, "a"), fb = as_str(c, "b");
    const TimeGrid g(1.0, as_size(c, "M"));
    const PathMeasure a = fa.empty() ? random_walk_measure(g, 1, as_size(c, "particles"), seed_of(c)) : load_path_measure(fa);
    PathMeasure b = c.at("identical").get<bool>() ? a
                    : fb.empty() ? random_walk_measure(g, 1, as_size(c, "particles"), derive_seed(seed_of(c), 1))
                                 : load_path_measure(fb);
    const double st = as_num(c, "stop_time");
    const TransportResult r = st >= 0.0 ? wasserstein2(a.stop(st), b.stop(st)) : wasserstein2(a, b);
    Table t;
    t.columns = {"particles", "exact", "cost"};
    t.rows.push_back({a.count(), r.coupling.exact, r.cost});
    t.summary = {{"cost", r.cost}, {"exact", r.coupling.exact}};
    return t;
}

Table cmd_coupling(const json& c) {
    const TimeGrid g(1.0, as_size(c, "M"));
    const double eps = as_num(c, "eps"), delta = as_num(c, "delta");
    std::vector<double> pi;
    for (std::size_t k = 0; k <= g.steps() / 2; ++k) pi.push_back(g.time(k));
    Table t;
    t.columns = {"instance", "particles", "distance", "optimal", "excess", "within_eps", "reconstruction_exact", "marginal_exact"};
    std::size_t failures = 0;
    for (std::size_t inst = 0; inst < as_size(c, "instances"); ++inst) {
        const std::uint64_t s = derive_seed(seed_of(c), inst);
        const PathMeasure mu = random_walk_measure(g, 1, as_size(c, "particles"), s);
        const PathMeasure nu = random_walk_measure(g, 1, as_size(c, "particles"), derive_seed(s, 1));
        const CoupledSystem cs = build_coupling(mu, nu, pi, eps, delta, s, as_size(c, "substeps"));
        const Eigen::MatrixXd rec = reconstruct_xi_pi(cs.lookup, pi_marginals(cs.eta, cs.pi_index), cs.btilde, delta, cs.substeps);
        const bool exact = rec == pi_marginals(cs.xi, cs.pi_index);
        std::vector<std::size_t> src = cs.xi_source;
        std::sort(src.begin(), src.end());
        bool marg = true;
        for (std::size_t i = 0; i < src.size(); ++i) marg = marg && src[i] == i;
        const bool within = cs.distance <= cs.optimal_distance + eps;
        failures += !(exact && marg && within);
        t.rows.push_back({inst, mu.count(), cs.distance, cs.optimal_distance, cs.distance - cs.optimal_distance, within, exact, marg});
    }
    t.summary = {{"instances", as_size(c, "instances")}, {"failures", failures}, {"pass", failures == 0}};
    return t;
}

Table cmd_residual(const json& c) {
    const ReferenceEntry ref = reference_by_id(as_str(c, "reference"));
    if (!ref.generator.G) throw ConfigurationError(ref.id + " has no registered generator");
    const TimeGrid g(as_num(c, "T"), as_size(c, "M"));
    FunctionalPtr f = ref.functional;
    if (c.at("numeric").get<bool>()) f = std::make_shared<NumericDerivatives>(ref.functional);
    GeneratorSpec G = ref.generator;
    const double lambda = as_num(c, "lambda");
    if (lambda != 0.0) std::tie(f, G) = exponential_change(f, G, lambda);
    Table t;
    t.columns = {"t", "value", "residual"};
    double worst = 0.0;
    const std::size_t P = as_size(c, "points");
    for (std::size_t j = 0; j < P; ++j) {
        const std::size_t k = 1 + (j * (g.steps() - 2)) / std::max<std::size_t>(1, P - 1);
        const double tt = g.time(std::min(k, g.steps() - 1));
        const PathMeasure mu = random_walk_measure(g, 1, as_size(c, "particles"), derive_seed(seed_of(c), j));
        const double r = classical_residual(*f, G, tt, mu, lambda);
        worst = std::max(worst, std::abs(r));
        t.rows.push_back({tt, f->value(tt, mu), r});
    }
    t.summary = {{"max_abs_residual", worst}, {"pass", worst <= 5e-3}};
    return t;
}

Table cmd_viscosity(const json& c) {
    const ReferenceEntry ref = reference_by_id(as_str(c, "reference"));
    if (!ref.generator.G) throw ConfigurationError(ref.id + " has no registered generator");
    const double corrupt = as_num(c, "corrupt");
    FunctionalPtr V = ref.functional;
    if (corrupt != 0.0)
        V = std::make_shared<LambdaFunctional>(
            ref.id + "+corrupt", [f = ref.functional, corrupt](double t, const PathMeasure& mu) { return f->value(t, mu) + corrupt * (mu.grid().horizon() - t); },
            [f = ref.functional, corrupt](double t, const PathMeasure& mu) { return f->dt(t, mu) - corrupt; },
            [f = ref.functional](double t, const PathMeasure& mu) { return f->dmu(t, mu); },
            [f = ref.functional](double t, const PathMeasure& mu) { return f->dxdmu(t, mu); });
    const TimeGrid g(as_num(c, "T"), as_size(c, "M"));
    const std::size_t P = as_size(c, "points");
    Table t;
    t.columns = {"t", "side", "status", "scalar", "tolerance", "refuted", "samples", "min_margin", "max_margin"};
    std::size_t refutations = 0, failures = 0, clamps = 0;
    for (std::size_t j = 0; j < P; ++j) {
        const std::size_t k = (2 * j + 1) * g.steps() / (2 * P);
        const double tt = g.time(k);
        const PathMeasure mu =
            random_walk_measure(g, 1, as_size(c, "particles"), derive_seed(seed_of(c), j), as_num(c, "x0_mean"), as_num(c, "x0_sd"));
        SamplerConfig cfg;
        cfg.samples = as_size(c, "samples");
        cfg.seed = derive_seed(seed_of(c), 1000 + j);
        std::vector<JetSpec> jets;
        for (JetSide side : {JetSide::Sub, JetSide::Super})
            jets.push_back(jet_from_candidate(*V, tt, mu, as_num(c, "delta"), as_num(c, "L"), side, as_num(c, "slack")));
        const auto members = jet_membership_test_many(*V, jets, tt, mu, cfg);
        for (std::size_t s = 0; s < 2; ++s) {
            const ViscosityReport r = viscosity_decide(*V, ref.generator, mu, jets[s], jets[s].side, members[s]);
            const char* status = r.status == ViscosityStatus::Passed ? "passed" : r.status == ViscosityStatus::Failed ? "failed" : "jet_refuted";
            refutations += members[s].refuted;
            failures += r.status == ViscosityStatus::Failed;
            clamps = std::max(clamps, members[s].clamps);
            t.rows.push_back({tt, s == 0 ? "sub" : "super", status, r.scalar, r.tolerance, members[s].refuted, members[s].samples,
                              members[s].min_margin, members[s].max_margin});
        }
    }
    t.summary = {{"refutations", refutations}, {"sign_failures", failures}, {"audit_clamps", clamps}};
    return t;
}

struct NeqSetup {
    double T = 2.0, t2 = 1.0;
    TimeGrid grid;
    CounterexampleInstance inst;
};

NeqSetup neq_setup(std::size_t M) {
    NeqSetup s;
    s.grid = TimeGrid(s.T, M);
    s.inst = counterexample_instances().front();
    return s;
}

Table cmd_dpp(const json& c) {
    const NeqSetup s = neq_setup(as_size(c, "M"));
    const std::size_t N = as_size(c, "N"), R = as_size(c, "replications");
    const PathMeasure mu = two_atom_measure(s.grid, 2.0, -2.0, 2 * std::max<std::size_t>(1, N / (2 * R)));
    const bool restricted = as_str(c, "class") == "restricted";
    const std::vector<double> A{-1.0, 0.0, 1.0}, mid{-0.5, 0.5};
    PolicyClass cls = [&](double ts) {
        TablePolicySpace sp;
        sp.actions = A;
        const bool early = ts < s.t2 - 1e-12;
        if (early) {
            sp.breakpoints = {ts, s.t2, s.T};
            sp.layouts = {IntervalLayout{{Observation{ts, std::nullopt, {0.0}}}},
                          IntervalLayout{{restricted ? Observation{ts, std::nullopt, {0.0}} : Observation{s.t2, std::nullopt, mid}}}};
        } else {
            sp.breakpoints = {ts, s.T};
            sp.layouts = {IntervalLayout{{Observation{ts, std::nullopt, mid}}}};
        }
        return sp;
    };
    EvalOptions eo;
    eo.replications = R;
    const DPPReport r = dpp_residual(0.0, s.t2, mu, s.inst.dynamics, nullptr, s.inst.terminal, cls, as_size(c, "budget"),
                                     mu.count() * R, seed_of(c), eo);
    const bool pass = restricted ? r.residual < -3.0 * r.se : std::abs(r.residual) <= 3.0 * r.se;
    Table t;
    t.columns = {"class", "lhs", "lhs_se", "rhs", "rhs_se", "residual", "se", "pass"};
    t.rows.push_back({as_str(c, "class"), r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.residual, r.se, pass});
    t.summary = {{"residual", r.residual}, {"se", r.se}, {"pass", pass}};
    return t;
}

Table cmd_value_search(const json& c) {
    const std::vector<double> A{-1.0, 0.0, 1.0};
    const std::size_t N = as_size(c, "N");
    SearchResult best;
    if (as_str(c, "instance") == "neq") {
        const NeqSetup s = neq_setup(as_size(c, "M"));
        const std::size_t K = as_size(c, "intervals");
        TablePolicySpace sp;
        sp.actions = A;
        for (std::size_t i = 0; i <= K; ++i) sp.breakpoints.push_back(s.T * static_cast<double>(i) / static_cast<double>(K));
        for (std::size_t i = 0; i < K; ++i)
            sp.layouts.push_back(IntervalLayout{{Observation{sp.breakpoints[i], std::nullopt, {-0.5, 0.5}}}});
        const PathMeasure mu = two_atom_measure(s.grid, 2.0, -2.0, 2 * std::max<std::size_t>(1, N / 16));
        best = optimize_value(0.0, mu, s.inst.dynamics, nullptr, s.inst.terminal, sp, as_size(c, "budget"), mu.count() * 8, seed_of(c));
    } else {
        const auto inst = counterexample_instances()[1];
        const TimeGrid g(1.0, as_size(c, "M"));
        const double e = as_num(c, "eps");
        TablePolicySpace sp;
        sp.actions = A;
        sp.breakpoints = {0.0, 1.0};
        sp.layouts = {IntervalLayout{{Observation{0.0, std::nullopt, {0.0}}}}};
        const PathMeasure mu = two_atom_measure(g, e, -e, 2 * std::max<std::size_t>(1, N / 16));
        best = optimize_value(0.0, mu, inst.dynamics, nullptr, inst.terminal, sp, as_size(c, "budget"), mu.count() * 8, seed_of(c));
    }
    Table t;
    t.columns = {"instance", "value", "se", "policy", "evaluations", "exhaustive"};
    t.rows.push_back({as_str(c, "instance"), best.value.mean, best.value.se, best.value.policy, best.evaluations, best.exhaustive});
    t.summary = {{"value", best.value.mean}, {"se", best.value.se}, {"evaluations", best.evaluations}};
    return t;
}

Table cmd_counterexample(const json& c) {
    Table t;
    t.columns = {"quantity", "value", "se", "target", "pass"};
    std::size_t N = as_size(c, "N");
    bool all = true;
    auto row = [&](const std::string& q, double v, double se, const std::string& target, bool pass) {
        all = all && pass;
        t.rows.push_back({q, v, se, target, pass});
    };
    if (as_str(c, "variant") == "neq") {
        if (N == 0) N = 100000;
        const OpenLoopGapReport r = openloop_gap_experiment(as_num(c, "T"), as_num(c, "t"), N, seed_of(c), num_list(c.at("probes")));
        const double gap = r.horizon - r.t;
        row("V2_sign_feedback", r.v2.mean, r.v2.se, ">= -(T-t) - 3se", r.v2.mean >= -gap - 3.0 * r.v2.se);
        row("V1_bound", r.v1_bound, 0.0, "-(T-t)^2", true);
        row("xi_variance", r.xi_variance, 0.0, "(T-t)^2", std::abs(r.xi_variance - gap * gap) <= 1e-12 * gap * gap);
        row("gap", r.gap, r.gap_se, ">= (T-t)^2 - (T-t) - 3se", r.gap >= gap * gap - gap - 3.0 * r.gap_se);
        row("V_zero_control", r.v2_zero_control.mean, r.v2_zero_control.se, "-(T-t) - (T-t)^2", true);
        for (const auto& p : r.probes)
            row("h_over_t@" + json(p.t).dump(), p.ratio, p.se / p.t, "-1 +- 0.05", p.t > 0.05 || std::abs(p.ratio + 1.0) <= 0.05);
    } else {
        if (N == 0) N = 4000000;
        const DiscontinuityReport r = discontinuity_experiment(num_list(c.at("eps")), N, seed_of(c), as_size(c, "steps"));
        row("V_at_mu0", r.at_zero.mean, r.at_zero.se, "[-0.05, 0.05]", std::abs(r.at_zero.mean) <= 0.05);
        for (const auto& e : r.rows) {
            const std::string tag = "@" + json(e.eps).dump();
            row("V_at_mu_eps" + tag, e.value.mean, e.value.se, ">= 2", e.value.mean >= 2.0);
            row("branch_sim" + tag, e.branch_sim.mean, e.branch_sim.se, "oracle +- 3se",
                std::abs(e.branch_sim.mean - e.branch_oracle) <= 3.0 * e.branch_sim.se);
            row("branch_oracle" + tag, e.branch_oracle, 0.0, "9/4 - (2/3) eps^4", true);
            row("gap" + tag, e.value.mean - r.at_zero.mean, std::hypot(e.value.se, r.at_zero.se), ">= 2",
                e.value.mean - r.at_zero.mean >= 2.0);
        }
    }
    t.summary = {{"pass", all}};
    return t;
}

Table cmd_state_dependence(const json& c) {
    const StateDependenceInstance inst = state_dependence_instance(as_size(c, "particles"), as_size(c, "steps"));
    const bool path = as_str(c, "terminal") == "path_max";
    const auto r = state_dependence_check(inst.t, inst.mu_a, inst.mu_b, inst.dynamics, nullptr, path ? inst.path_terminal : inst.terminal,
                                          inst.space, as_size(c, "budget"), as_size(c, "N"), seed_of(c));
    Table t;
    t.columns = {"terminal", "value_a", "se_a", "value_b", "se_b", "difference", "se", "consistent"};
    t.rows.push_back({as_str(c, "terminal"), r.a.mean, r.a.se, r.b.mean, r.b.se, r.difference, r.se, r.consistent});
    t.summary = {{"difference", r.difference}, {"se", r.se}, {"consistent", r.consistent}};
    return t;
}

Table cmd_moment(const json& c) {
    const TimeGrid g(as_num(c, "T"), as_size(c, "M"));
    const PathMeasure mu = random_walk_measure(g, 1, as_size(c, "particles"), seed_of(c));
    BoundAudit audit;
    const double L = as_num(c, "L"), tt = as_num(c, "t");
    const auto measures = sample_PL(tt, mu, L, as_size(c, "measures"), GeneratorFamily::standard(), derive_seed(seed_of(c), 1), &audit);
    const int p = static_cast<int>(as_size(c, "p"));
    const MomentReport r = moment_bound_check(measures, tt, L, p, num_list(c.at("deltas")));
    Table t;
    t.columns = {"delta", "moment", "moment_over_delta_p2", "bound"};
    for (std::size_t i = 0; i < r.deltas.size(); ++i) {
        const double scaled = r.moments[i] / std::pow(r.deltas[i], p / 2.0);
        t.rows.push_back({r.deltas[i], r.moments[i], scaled, r.bound_constant});
    }
    t.summary = {{"fitted_exponent", r.fitted_exponent}, {"fitted_constant", r.fitted_constant}, {"bound_constant", r.bound_constant},
                 {"bound_holds", r.bound_holds}, {"audit_evaluations", audit.evaluations.load()}, {"audit_clamps", audit.clamps.load()}};
    return t;
}

// ------------------------------------------------------------------ output

std::string csv_cell(const json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_null()) return "";
    return v.dump();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_config(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
}

}  // namespace

std::vector<std::string> command_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : schemas()) out.push_back(k);
    return out;
}

json resolve_run_config(const json& raw) { return resolve_with(raw, {}); }

json resolve_sweep_config(const json& raw) {
    json base = resolve_with(raw, {"sweep", "fit", "parallel"});
    if (!raw.contains("sweep") || !raw["sweep"].is_object() || raw["sweep"].empty())
        throw UsageError("sweep config needs a non-empty 'sweep' object of value lists");
    const Schema schema = full_schema(base["command"].get<std::string>());
    std::size_t cells = 1;
    json grid = json::object();
    for (const auto& [key, values] : raw["sweep"].items()) {
        const auto it = std::find_if(schema.begin(), schema.end(), [&](const Param& p) { return p.name == key; });
        if (it == schema.end() || key == "command" || key == "output") throw UsageError("cannot sweep over key '" + key + "'");
        if (!values.is_array() || values.empty()) throw UsageError("sweep values for '" + key + "' must be a non-empty array");
        for (const auto& v : values) check_value(*it, v);
        cells *= values.size();
        if (cells > kSweepCap) throw UsageError("sweep exceeds the cap of " + std::to_string(kSweepCap) + " cells");
        grid[key] = values;
    }
    base["sweep"] = grid;
    json fit = raw.value("fit", json::array());
    if (!fit.is_array()) throw UsageError("'fit' must be an array of summary column names");
    for (const auto& f : fit)
        if (!f.is_string()) throw UsageError("'fit' entries must be strings");
    if (!fit.empty() && grid.size() != 1) throw UsageError("'fit' needs exactly one swept key");
    base["fit"] = fit;
    const json par = raw.value("parallel", json(false));
    if (!par.is_boolean()) throw UsageError("'parallel' must be true or false");
    base["parallel"] = par;
    return base;
}

Table execute(const json& c) {
    const std::string cmd = c.at("command").get<std::string>();
    if (cmd == "ito-check") return cmd_ito(c);
    if (cmd == "derivative-check") return cmd_derivative(c);
    if (cmd == "wasserstein") return cmd_wasserstein(c);
    if (cmd == "coupling") return cmd_coupling(c);
    if (cmd == "residual") return cmd_residual(c);
    if (cmd == "viscosity-check") return cmd_viscosity(c);
    if (cmd == "dpp-check") return cmd_dpp(c);
    if (cmd == "value-search") return cmd_value_search(c);
    if (cmd == "counterexample") return cmd_counterexample(c);
    if (cmd == "state-dependence") return cmd_state_dependence(c);
    if (cmd == "moment-bound") return cmd_moment(c);
    throw UsageError("unknown command '" + cmd + "'");
}

Table execute_sweep(const json& c) {
    const json& grid = c.at("sweep");
    std::vector<std::string> keys;
    std::vector<std::size_t> sizes;
    for (const auto& [k, v] : grid.items()) {
        keys.push_back(k);
        sizes.push_back(v.size());
    }
    std::size_t cells = 1;
    for (auto s : sizes) cells *= s;
    std::vector<json> configs(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        json cfg = c;
        cfg.erase("sweep");
        cfg.erase("fit");
        cfg.erase("parallel");
        std::size_t rem = cell;
        // last key varies fastest
        for (std::size_t j = keys.size(); j-- > 0;) {
            cfg[keys[j]] = grid[keys[j]][rem % sizes[j]];
            rem /= sizes[j];
        }
        configs[cell] = cfg;
    }
    std::vector<Table> results(cells);
    std::vector<std::exception_ptr> errors(cells);
    const bool parallel = c.at("parallel").get<bool>();
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::size_t cell = 0; cell < cells; ++cell) {
        try {
            results[cell] = execute(configs[cell]);
        } catch (...) {
            errors[cell] = std::current_exception();
        }
    }
    // the first failing cell in grid order decides the diagnostic
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    Table out;
    out.columns = keys;
    std::vector<std::string> summary_keys;
    for (const auto& [k, v] : results.front().summary.items())
        if (v.is_primitive() && std::find(keys.begin(), keys.end(), k) == keys.end()) summary_keys.push_back(k);
    out.columns.insert(out.columns.end(), summary_keys.begin(), summary_keys.end());
    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::vector<json> row;
        for (const auto& k : keys) row.push_back(configs[cell][k]);
        for (const auto& k : summary_keys) row.push_back(results[cell].summary.value(k, json()));
        out.rows.push_back(std::move(row));
    }
    json fits = json::array();
    for (const auto& f : c.at("fit")) {
        const std::string y = f.get<std::string>();
        const std::string& xk = keys.front();
        std::vector<double> xs, ys;
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const json& s = results[cell].summary;
            if (!s.contains(y) || !s[y].is_number()) throw UsageError("fit column '" + y + "' is not a numeric summary value");
            double x = configs[cell][xk].get<double>();
            if (xk == "M" && configs[cell].contains("T")) x = configs[cell]["T"].get<double>() / x;
            xs.push_back(x);
            ys.push_back(std::abs(s[y].get<double>()));
        }
        const auto best = std::min_element(ys.begin(), ys.end()) - ys.begin();
        json fr = {{"x", xk == "M" ? "dt" : xk}, {"y", y}, {"argmin_x", xs[static_cast<std::size_t>(best)]}, {"min_y", ys[static_cast<std::size_t>(best)]}};
        bool positive = true;
        for (std::size_t i = 0; i < xs.size(); ++i) positive = positive && xs[i] > 0.0 && ys[i] > 0.0;
        fr["loglog_slope"] = positive && xs.size() >= 2 ? json(loglog_slope(xs, ys)) : json(nullptr);
        fits.push_back(fr);
    }
    out.summary = {{"cells", cells}, {"fits", fits}};
    return out;
}

std::string csv_text(const std::string& command, const Table& table) {
    std::ostringstream os;
    os << "# mkvlab-csv v1 " << command << "\n";
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
        os << "\n";
    }
    return os.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    fs::rename(tmp, path);
}

namespace {

std::string g_stage = "parsing arguments";

int run_mode(const std::string& config_path, bool sweep) {
    g_stage = "reading config";
    const auto t0 = std::chrono::steady_clock::now();
    const json raw = parse_config(config_path);
    const json cfg = sweep ? resolve_sweep_config(raw) : resolve_run_config(raw);
    std::string out_dir = cfg.at("output").get<std::string>();
    if (const char* env = std::getenv("MKVLAB_OUT_DIR"); env && *env) out_dir = env;
    json env_used = json::object();
    if (const char* th = std::getenv("MKVLAB_THREADS"); th && *th) {
        char* end = nullptr;
        const long n = std::strtol(th, &end, 10);
        if (*end != '\0' || n < 1 || n > 4096) throw UsageError("MKVLAB_THREADS must be a positive integer");
        omp_set_num_threads(static_cast<int>(n));
        env_used["MKVLAB_THREADS"] = n;
    }
    const std::string command = cfg.at("command").get<std::string>();
    g_stage = (sweep ? "sweep of " : "running ") + command;
    const Table table = sweep ? execute_sweep(cfg) : execute(cfg);

    g_stage = "writing outputs to " + out_dir;
    fs::create_directories(out_dir);
    json outputs = json::array();
    auto emit = [&](const std::string& name, const std::string& text) {
        write_atomic((fs::path(out_dir) / name).string(), text);
        outputs.push_back({{"file", name}, {"bytes", text.size()}, {"sha256", sha256_hex(text)}});
    };
    const std::string stem = sweep ? command + "-sweep" : command;
    emit(stem + ".csv", csv_text(command, table));
    if (sweep && !table.summary["fits"].empty()) {
        Table fits;
        fits.columns = {"x", "y", "loglog_slope", "argmin_x", "min_y"};
        for (const auto& f : table.summary["fits"]) fits.rows.push_back({f["x"], f["y"], f["loglog_slope"], f["argmin_x"], f["min_y"]});
        emit(stem + "-fits.csv", csv_text(command, fits));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest = {{"tool", "mkvlab"},      {"version", kVersion},       {"mode", sweep ? "sweep" : "run"},
                     {"config", cfg},         {"environment", env_used},   {"threads", omp_get_max_threads()},
                     {"wall_seconds", secs},  {"summary", table.summary},  {"outputs", outputs}};
    write_atomic((fs::path(out_dir) / (stem + ".manifest.json")).string(), manifest.dump(2) + "\n");
    std::cout << csv_text(command, table);
    return 0;
}

}  // namespace

int main_entry(int argc, char** argv) {
    CLI::App app{"mkvlab: experiments for controlled McKean-Vlasov master equations"};
    app.require_subcommand(1);
    std::string config;
    auto* run = app.add_subcommand("run", "run one command from a JSON config");
    run->add_option("-c,--config", config, "config file")->required();
    auto* sweep = app.add_subcommand("sweep", "Cartesian-product sweep from a JSON config");
    sweep->add_option("-c,--config", config, "config file")->required();
    auto* list = app.add_subcommand("list", "list commands and reference functionals");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        if (list->parsed()) {
            std::cout << "commands:";
            for (const auto& c : command_names()) std::cout << ' ' << c;
            std::cout << "\nreferences:";
            for (const auto& r : reference_ids()) std::cout << ' ' << r;
            std::cout << '\n';
            return 0;
        }
        return run_mode(config, sweep->parsed());
    } catch (const UsageError& e) {
        std::cerr << "mkvlab: usage error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigurationError& e) {
        std::cerr << "mkvlab: usage error: " << e.what() << '\n';
        return 2;
    } catch (const SimulationFault& e) {
        std::cerr << "mkvlab: computation fault while " << g_stage << " at time step " << e.step() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "mkvlab: computation fault while " << g_stage << ": " << e.what() << '\n';
        return 1;
    }
}

}  // namespace mkvlab
