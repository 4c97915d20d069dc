#include "offgrid/cli.hpp"

#include "offgrid/certificates.hpp"
#include "offgrid/errors.hpp"
#include "offgrid/parallel_kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#ifndef OFFGRID_VERSION
#define OFFGRID_VERSION "0.0.0"
#endif

namespace offgrid {

using nlohmann::json;

std::string version() { return OFFGRID_VERSION; }

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw DomainError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    std::sort(v.begin(), v.end());
    const double h = p * (v.size() - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs two or more matched points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("log-log slope needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= x.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": missing or wrong type");
    }
}

template <class T>
void maybe(const json& j, const std::string& key, const std::string& where, T& out) {
    if (j.contains(key)) out = get<T>(j, key, where);
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void write_text(const std::string& dir, const std::string& name, const std::string& content) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    std::ofstream os(std::filesystem::path(dir) / name);
    if (!os) throw ConfigError("cannot write " + name + " in " + dir);
    os << content;
}

double tau_of(const ExperimentConfig& cfg, std::size_t T) {
    return std::isnan(cfg.tau) ? static_cast<double>(T) : cfg.tau;
}

double kappa_of(const ExperimentConfig& cfg, const NoiseModel& nm, const GridMeasure& m) {
    if (cfg.kappa_rule == ExperimentConfig::KappaRule::explicit_value) return cfg.kappa;
    return tuning_kappa(std::sqrt(nm.declared_sigma2()), nm.declared_delta(m), tau_of(cfg, m.size()), cfg.C1);
}

Truth truth_of(const ExperimentConfig& cfg, const KernelContext& ctx) {
    Truth t;
    if (cfg.amplitudes.empty()) return t;
    if (!cfg.theta.empty()) {
        for (double th : cfg.theta)
            if (!ctx.in_window(th)) throw ConfigError("truth.theta: parameter outside Theta_T");
        t.beta = cfg.amplitudes;
        t.theta = cfg.theta;
        return t;
    }
    try {
        return equispaced_truth(ctx, cfg.amplitudes, cfg.gap);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("truth: ") + e.what());
    }
}

SolverConfig solver_of(const ExperimentConfig& cfg, double kappa, const Observation& obs) {
    SolverConfig s = cfg.solver;
    s.kappa = kappa;
    if (!cfg.solver_cap_set) s.max_atoms = SolverConfig::default_cap(obs);
    return s;
}

bool balls_disjoint(const KernelContext& ctx, const Truth& t, double r) {
    for (std::size_t k = 0; k < t.theta.size(); ++k)
        for (std::size_t l = 0; l < k; ++l)
            if (ctx.metric_distance(t.theta[k], t.theta[l]) <= 2.0 * r) return false;
    return true;
}

LimitConstants limit_constants_of(const Scenario& sc) {
    if (sc.spec.family == Family::gaussian_translate) return LimitConstants::gaussian(sc.spec.sigma0);
    return sc.limit ? sc.limit->limit_constants() : sc.ctx.limit_constants();
}

struct ApproxInfo {
    double V_T = 0.0, rho_T = 1.0;
    bool available = false;
};

ApproxInfo approx_of(const Scenario& sc) {
    ApproxInfo a;
    if (!sc.limit) return a;
    const auto c = limit_compare(sc.ctx, *sc.limit, sc.ctx.uniform_grid(0.05));
    a.V_T = c.V_T;
    a.rho_T = c.rho_T;
    a.available = true;
    return a;
}

TheoreticalConstants constants_of(const ExperimentConfig& cfg, const Scenario& sc, int s, double V_T,
                                  double rho_T) {
    if (sc.spec.family == Family::gaussian_translate) {
        auto tc = gaussian_worked_constants(cfg.rho, s, V_T, cfg.eta0, sc.spec.sigma0);
        tc.rho_T = rho_T;
        tc.metric_ok = rho_T <= cfg.rho;
        return tc;
    }
    // Other families: the same recipe with numeric sups, on the limit kernel when it exists.
    const KernelContext& ref = sc.limit ? *sc.limit : sc.ctx;
    const LimitConstants L = limit_constants_of(sc);
    const double r = cfg.r;
    const double eps = epsilon(ref, r / cfg.rho);
    const double nu_v = nu(ref, cfg.rho * r);
    const double u_inf = cfg.eta0 * H2_value(L, eps, nu_v);
    return theoretical_constants(L, r, cfg.rho, eps, nu_v, s, V_T, u_inf, rho_T);
}

json constants_json(const TheoreticalConstants& c) {
    return json{{"r", c.r},           {"rho", c.rho},       {"eps", c.eps},        {"nu", c.nu},
                {"V_T", c.V_T},       {"rho_T", c.rho_T},   {"u_inf", c.u_inf},    {"s", c.s},
                {"C_N", c.C_N},       {"C_Np", c.C_Np},     {"C_F", c.C_F},        {"C_B", c.C_B},
                {"c_N", c.c_N},       {"c_F", c.c_F},       {"c_B", c.c_B},        {"H1", c.H1},
                {"H2", c.H2},         {"u_T_of_s", c.u_T_of_s},
                {"L", {{"m_g", c.L.m_g}, {"L00", c.L.L00}, {"L10", c.L.L10}, {"L11", c.L.L11},
                       {"L20", c.L.L20}, {"L21", c.L.L21}, {"L22", c.L.L22}, {"L3", c.L.L3}}},
                {"hypotheses", {{"radius", c.radius_ok}, {"concavity", c.concavity_ok},
                                {"separation", c.separation_ok}, {"metric", c.metric_ok},
                                {"proximity", c.proximity_ok}, {"derivative", c.derivative_hyp_ok}}}};
}

void apply_jobs(const ExperimentConfig& cfg) {
    if (cfg.jobs > 0) kernels::set_threads(cfg.jobs);
}

}  // namespace

NoiseModel noise_from_json(const json& j, const GridMeasure& m, std::uint64_t seed) {
    const std::string w = "noise";
    const std::string model = get<std::string>(j, "model", w);
    if (model == "none") {
        check_keys(j, {"model"}, w);
        return NoiseModel::iid(0.0, seed);
    }
    if (model == "iid") {
        check_keys(j, {"model", "sigma"}, w);
        return NoiseModel::iid(get<double>(j, "sigma", w), seed);
    }
    if (model == "weighted_iid") {
        check_keys(j, {"model", "sigma", "delta"}, w);
        double d = m.max_weight();
        maybe(j, "delta", w, d);
        return NoiseModel::weighted_iid(get<double>(j, "sigma", w), d, seed);
    }
    if (model == "equicorrelated") {
        check_keys(j, {"model", "sigma", "correlation"}, w);
        return NoiseModel::equicorrelated(get<double>(j, "sigma", w), get<double>(j, "correlation", w), seed);
    }
    if (model == "truncated_white") {
        check_keys(j, {"model", "sigma", "terms"}, w);
        return NoiseModel::truncated_white(get<double>(j, "sigma", w), get<std::size_t>(j, "terms", w), seed);
    }
    if (model == "brownian") {
        check_keys(j, {"model", "scale", "terms"}, w);
        return NoiseModel::brownian(get<double>(j, "scale", w), get<std::size_t>(j, "terms", w), seed);
    }
    throw ConfigError("noise.model: unknown model '" + model + "'");
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    check_keys(j, {"dictionary", "grid", "truth", "noise", "kappa", "solver", "r", "replications", "seed",
                   "out", "jobs", "rates", "certify", "separation", "noise_check"},
               "config");
    if (j.contains("dictionary")) {
        const auto& d = j["dictionary"];
        check_keys(d, {"family", "scale"}, "dictionary");
        if (d.contains("family")) c.scenario.family = family_from_string(get<std::string>(d, "family", "dictionary"));
        maybe(d, "scale", "dictionary", c.scenario.sigma0);
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        check_keys(g, {"T", "window_growth", "shrinkage", "a", "b", "theta_window"}, "grid");
        maybe(g, "T", "grid", c.scenario.T);
        maybe(g, "window_growth", "grid", c.scenario.window_growth);
        maybe(g, "shrinkage", "grid", c.scenario.shrinkage);
        maybe(g, "a", "grid", c.scenario.a);
        maybe(g, "b", "grid", c.scenario.b);
        if (g.contains("theta_window")) {
            const auto w = get<std::vector<double>>(g, "theta_window", "grid");
            require(w.size() == 2, "grid.theta_window: expected [lo, hi]");
            c.scenario.theta_lo = w[0];
            c.scenario.theta_hi = w[1];
        }
    }
    c.scenario.validate();
    if (c.scenario.family != Family::gaussian_translate && std::isnan(c.scenario.a) &&
        c.scenario.family == Family::exp_scale)
        throw ConfigError("grid: exp_scale needs a and b");
    if (j.contains("truth")) {
        const auto& t = j["truth"];
        check_keys(t, {"amplitudes", "gap", "theta"}, "truth");
        maybe(t, "amplitudes", "truth", c.amplitudes);
        maybe(t, "gap", "truth", c.gap);
        maybe(t, "theta", "truth", c.theta);
        for (double a : c.amplitudes) require(a != 0.0 && std::isfinite(a), "truth.amplitudes: must be nonzero");
        require(c.theta.empty() || std::isnan(c.gap), "truth: give gap or theta, not both");
        if (!c.amplitudes.empty()) {
            require(!c.theta.empty() || !std::isnan(c.gap), "truth: amplitudes need gap or theta");
            require(c.theta.empty() || c.theta.size() == c.amplitudes.size(),
                    "truth.theta: length differs from amplitudes");
            require(std::isnan(c.gap) || c.gap > 0.0, "truth.gap: must be positive");
        }
    }
    if (j.contains("noise")) {
        c.noise = j["noise"];
        // Validate keys now against a throwaway measure.
        const auto m = GridMeasure::regular(0.0, 1.0, 4);
        (void)noise_from_json(c.noise, *m, 0);
    }
    if (j.contains("kappa")) {
        const auto& k = j["kappa"];
        check_keys(k, {"rule", "value", "C1", "tau"}, "kappa");
        const std::string rule = get<std::string>(k, "rule", "kappa");
        if (rule == "explicit") {
            c.kappa_rule = ExperimentConfig::KappaRule::explicit_value;
            c.kappa = get<double>(k, "value", "kappa");
            require(c.kappa >= 0.0, "kappa.value: must be >= 0");
        } else if (rule == "tuned") {
            c.kappa_rule = ExperimentConfig::KappaRule::tuned;
            maybe(k, "C1", "kappa", c.C1);
            require(c.C1 >= 0.0, "kappa.C1: must be >= 0");
            if (k.contains("tau") && !(k["tau"].is_string() && k["tau"] == "T")) {
                c.tau = get<double>(k, "tau", "kappa");
                require(c.tau > 1.0, "kappa.tau: must exceed 1");
            }
        } else {
            throw ConfigError("kappa.rule: expected 'explicit' or 'tuned'");
        }
    }
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        const std::string w = "solver";
        check_keys(s, {"max_atoms", "coarse_step", "prune_threshold", "max_outer", "stop_slack", "gradient_tol",
                       "merge_distance"},
                   w);
        if (s.contains("max_atoms")) {
            c.solver.max_atoms = get<std::size_t>(s, "max_atoms", w);
            c.solver_cap_set = true;
        }
        maybe(s, "coarse_step", w, c.solver.coarse_step);
        maybe(s, "prune_threshold", w, c.solver.prune_threshold);
        maybe(s, "max_outer", w, c.solver.max_outer);
        maybe(s, "stop_slack", w, c.solver.stop_slack);
        maybe(s, "gradient_tol", w, c.solver.gradient_tol);
        maybe(s, "merge_distance", w, c.solver.merge_distance);
        try {
            c.solver.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("solver: ") + e.what());
        }
    }
    maybe(j, "r", "config", c.r);
    require(c.r > 0.0, "r: must be positive");
    maybe(j, "replications", "config", c.replications);
    require(c.replications >= 1, "replications: must be >= 1");
    maybe(j, "seed", "config", c.seed);
    maybe(j, "out", "config", c.out_dir);
    maybe(j, "jobs", "config", c.jobs);
    if (j.contains("rates")) {
        check_keys(j["rates"], {"T"}, "rates");
        c.ladder = get<std::vector<std::size_t>>(j["rates"], "T", "rates");
    }
    if (j.contains("certify")) {
        const auto& s = j["certify"];
        check_keys(s, {"rho", "eta0", "s", "gap"}, "certify");
        maybe(s, "rho", "certify", c.rho);
        maybe(s, "eta0", "certify", c.eta0);
        maybe(s, "s", "certify", c.cert_s);
        maybe(s, "gap", "certify", c.cert_gap);
        require(c.rho >= 1.0, "certify.rho: must be >= 1");
        require(c.eta0 > 0.0 && c.eta0 < 1.0, "certify.eta0: must lie in (0, 1)");
        require(c.cert_s >= 1, "certify.s: must be >= 1");
        require(c.cert_gap > 0.0, "certify.gap: must be positive");
    }
    if (j.contains("separation")) {
        const auto& s = j["separation"];
        check_keys(s, {"s", "u", "restarts", "empirical"}, "separation");
        maybe(s, "s", "separation", c.sep_s);
        maybe(s, "u", "separation", c.sep_u);
        maybe(s, "restarts", "separation", c.sep_restarts);
        maybe(s, "empirical", "separation", c.sep_empirical);
        require(c.sep_s >= 1, "separation.s: must be >= 1");
        require(std::isnan(c.sep_u) || c.sep_u > 0.0, "separation.u: must be positive");
    }
    if (j.contains("noise_check")) {
        const auto& s = j["noise_check"];
        check_keys(s, {"variance_reps", "tail_orders", "tail_reps", "tail_u"}, "noise_check");
        maybe(s, "variance_reps", "noise_check", c.variance_reps);
        maybe(s, "tail_orders", "noise_check", c.tail_orders);
        maybe(s, "tail_reps", "noise_check", c.tail_reps);
        maybe(s, "tail_u", "noise_check", c.tail_u);
        require(c.variance_reps >= 1000, "noise_check.variance_reps: must be >= 1000");
        require(c.tail_orders.empty() || c.tail_reps >= 500, "noise_check.tail_reps: must be >= 500");
        for (int o : c.tail_orders) require(o >= 0 && o <= 2, "noise_check.tail_orders: orders lie in 0..2");
    }
    c.echo = j;
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command) {
    if (cfg.out_dir.empty()) return;
    json echo = cfg.echo;
    echo["seed"] = cfg.seed;
    const json m{{"command", command}, {"version", version()}, {"seed", cfg.seed}, {"config", echo}};
    write_text(cfg.out_dir, "manifest.json", m.dump(2) + "\n");
}

RunResult run_fit(const ExperimentConfig& cfg) {
    apply_jobs(cfg);
    const Scenario sc = make_scenario(cfg.scenario);
    const NoiseModel nm = noise_from_json(cfg.noise, *sc.measure, cfg.seed);
    const Truth truth = truth_of(cfg, sc.ctx);
    auto rng = replicate_rng(cfg.seed, 0);
    std::optional<NoiseSampler> sampler;
    if (nm.sigma > 0.0) sampler.emplace(nm, sc.measure);
    Observation obs = make_observation(sc.ctx, truth, sampler ? &*sampler : nullptr, rng);
    const double kappa = kappa_of(cfg, nm, *sc.measure);
    const Estimate est = Solver(sc.ctx, cfg.solver.coarse_step).fit(obs, solver_of(cfg, kappa, obs));

    RunResult res;
    res.report["estimate"] = json::parse(to_json(est));
    const double err = prediction_error(sc.ctx, est, obs);
    std::optional<ErrorDecomposition> dec;
    if (!truth.beta.empty() && balls_disjoint(sc.ctx, truth, cfg.r)) dec = error_decomposition(sc.ctx, est, obs, cfg.r);
    res.report["decomposition"] = dec ? json::parse(to_json(*dec)) : json(nullptr);
    res.report["prediction_error"] = err;
    res.report["truth"] = {{"beta", truth.beta}, {"theta", truth.theta}};

    std::ostringstream csv;
    csv << "seed,T,kappa,support_size,prediction_error,I0,I1,I2,I3,objective,converged,iterations\n";
    csv << cfg.seed << ',' << sc.measure->size() << ',' << fmt(kappa) << ',' << est.beta.size() << ','
        << fmt(err) << ',' << (dec ? fmt(dec->I0) : "") << ',' << (dec ? fmt(dec->I1) : "") << ','
        << (dec ? fmt(dec->I2) : "") << ',' << (dec ? fmt(dec->I3) : "") << ',' << fmt(est.objective) << ','
        << (est.converged ? 1 : 0) << ',' << est.iterations << '\n';
    write_text(cfg.out_dir, "estimate.json", to_json(est) + "\n");
    if (dec) write_text(cfg.out_dir, "decomposition.json", to_json(*dec) + "\n");
    write_text(cfg.out_dir, "summary.csv", csv.str());
    write_manifest(cfg, "fit");

    std::ostringstream t;
    t << "fit: T=" << sc.measure->size() << " kappa=" << fmt(kappa) << " atoms=" << est.beta.size()
      << " converged=" << (est.converged ? "yes" : "no") << " iterations=" << est.iterations << "\n";
    t << "  theta            beta\n";
    for (std::size_t k = 0; k < est.beta.size(); ++k) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-16.8f %-16.8f\n", est.theta[k], est.beta[k]);
        t << buf;
    }
    t << "  prediction error " << fmt(err) << "\n";
    res.text = t.str();
    res.report["summary_csv"] = csv.str();
    return res;
}

RunResult run_rates(const ExperimentConfig& cfg) {
    apply_jobs(cfg);
    if (cfg.ladder.size() < 4) throw ConfigError("rates.T: the ladder needs at least 4 points");
    if (cfg.amplitudes.empty() || std::isnan(cfg.gap))
        throw ConfigError("rates: truth needs amplitudes and an equispaced gap");
    const double s = static_cast<double>(cfg.amplitudes.size());
    RunResult res;
    std::ostringstream rows, reps_csv;
    rows << "T,b_T,delta_T,kappa,reps,median_R,q90_R,median_l2_over_sqrtT,q90_l2_over_sqrtT,"
            "q90_R_over_sqrt_s_kappa,normalized_rate,q90_I0,q90_I1,q90_I2,q90_I3,nonconverged\n";
    reps_csv << "T,replicate,kappa,R,l2,I0,I1,I2,I3,support_size,converged\n";
    std::vector<double> Ts, med_l2, q_ratio, norm_rate;
    std::array<std::vector<double>, 4> qI;
    json per_T = json::array();
    for (std::size_t T : cfg.ladder) {
        ScenarioSpec spec = cfg.scenario;
        spec.T = T;
        const Scenario sc = make_scenario(spec);
        const NoiseModel nm = noise_from_json(cfg.noise, *sc.measure, cfg.seed);
        std::optional<NoiseSampler> sampler;
        if (nm.sigma > 0.0) sampler.emplace(nm, sc.measure);
        const Truth truth = truth_of(cfg, sc.ctx);
        if (!balls_disjoint(sc.ctx, truth, cfg.r)) throw ConfigError("rates: truth gap must exceed 2 r");
        const double kappa = kappa_of(cfg, nm, *sc.measure);
        const double delta = sc.measure->max_weight();
        const Solver solver(sc.ctx, cfg.solver.coarse_step);
        const std::size_t n = cfg.replications;
        std::vector<double> R(n), l2(n), I0(n), I1(n), I2(n), I3(n);
        std::vector<std::size_t> support(n);
        std::vector<int> conv(n);
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
            auto rng = replicate_rng(cfg.seed, (static_cast<std::uint64_t>(T) << 32) | static_cast<std::uint64_t>(r));
            const Observation obs = make_observation(sc.ctx, truth, sampler ? &*sampler : nullptr, rng);
            const Estimate est = solver.fit(obs, solver_of(cfg, kappa, obs));
            const ErrorDecomposition d = error_decomposition(sc.ctx, est, obs, cfg.r);
            R[r] = d.prediction_error;
            l2[r] = d.prediction_error / std::sqrt(delta);
            I0[r] = d.I0, I1[r] = d.I1, I2[r] = d.I2, I3[r] = d.I3;
            support[r] = est.beta.size();
            conv[r] = est.converged ? 1 : 0;
        }
        const double sqT = std::sqrt(static_cast<double>(T));
        std::vector<double> l2n(n), ratio(n);
        for (std::size_t r = 0; r < n; ++r) {
            l2n[r] = l2[r] / sqT;
            ratio[r] = kappa > 0.0 ? R[r] / (std::sqrt(s) * kappa) : 0.0;
            reps_csv << T << ',' << r << ',' << fmt(kappa) << ',' << fmt(R[r]) << ',' << fmt(l2[r]) << ','
                     << fmt(I0[r]) << ',' << fmt(I1[r]) << ',' << fmt(I2[r]) << ',' << fmt(I3[r]) << ','
                     << support[r] << ',' << conv[r] << '\n';
        }
        const double ks = kappa * s;
        auto qn = [&](const std::vector<double>& v) { return ks > 0.0 ? quantile(v, 0.9) / ks : 0.0; };
        const double sigma = std::sqrt(nm.declared_sigma2());
        const double nr = sigma > 0.0 ? quantile(l2n, 0.5) / (sigma * std::sqrt(s * std::log(T) / T)) : 0.0;
        const int nonconv = static_cast<int>(n) - std::accumulate(conv.begin(), conv.end(), 0);
        Ts.push_back(static_cast<double>(T));
        med_l2.push_back(quantile(l2n, 0.5));
        q_ratio.push_back(quantile(ratio, 0.9));
        norm_rate.push_back(nr);
        qI[0].push_back(qn(I0));
        qI[1].push_back(qn(I1));
        qI[2].push_back(qn(I2));
        qI[3].push_back(qn(I3));
        rows << T << ',' << fmt(sc.b) << ',' << fmt(delta) << ',' << fmt(kappa) << ',' << n << ','
             << fmt(quantile(R, 0.5)) << ',' << fmt(quantile(R, 0.9)) << ',' << fmt(med_l2.back()) << ','
             << fmt(quantile(l2n, 0.9)) << ',' << fmt(q_ratio.back()) << ',' << fmt(nr) << ','
             << fmt(qI[0].back()) << ',' << fmt(qI[1].back()) << ',' << fmt(qI[2].back()) << ','
             << fmt(qI[3].back()) << ',' << nonconv << '\n';
        per_T.push_back({{"T", T}, {"b_T", sc.b}, {"delta_T", delta}, {"kappa", kappa},
                         {"median_R", quantile(R, 0.5)}, {"q90_R", quantile(R, 0.9)},
                         {"median_l2_over_sqrtT", med_l2.back()}, {"q90_R_over_sqrt_s_kappa", q_ratio.back()},
                         {"normalized_rate", nr}, {"q90_I0_over_kappa_s", qI[0].back()},
                         {"q90_I1_over_kappa_s", qI[1].back()}, {"q90_I2_over_kappa_s", qI[2].back()},
                         {"q90_I3_over_kappa_s", qI[3].back()}, {"nonconverged", nonconv}});
    }
    auto spread = [](const std::vector<double>& v) {
        const double lo = *std::min_element(v.begin(), v.end());
        const double hi = *std::max_element(v.begin(), v.end());
        return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    };
    // Growth of a bounded ratio: largest value over the value at the smallest T (0 when all vanish).
    auto growth = [](const std::vector<double>& v) {
        const double hi = *std::max_element(v.begin(), v.end());
        if (hi == 0.0) return 0.0;
        return v.front() > 0.0 ? hi / v.front() : std::numeric_limits<double>::infinity();
    };
    const bool noisy = std::all_of(med_l2.begin(), med_l2.end(), [](double x) { return x > 0.0; });
    const double slope = noisy ? loglog_slope(Ts, med_l2) : std::numeric_limits<double>::quiet_NaN();
    res.report["per_T"] = per_T;
    res.report["slope"] = slope;
    res.report["ratio_spread"] = spread(q_ratio);
    res.report["normalized_rate_spread"] = noisy ? spread(norm_rate) : 0.0;
    res.report["I_growth"] = {{"I0", growth(qI[0])}, {"I1", growth(qI[1])}, {"I2", growth(qI[2])},
                              {"I3", growth(qI[3])}};
    res.report["I_spread"] = {{"I0", spread(qI[0])}, {"I2", spread(qI[2])}, {"I3", spread(qI[3])}};
    write_text(cfg.out_dir, "rates.csv", rows.str());
    write_text(cfg.out_dir, "replicates.csv", reps_csv.str());
    write_text(cfg.out_dir, "rates.json", res.report.dump(2) + "\n");
    write_manifest(cfg, "rates");
    std::ostringstream t;
    t << rows.str();
    t << "slope of log(median l2/sqrt(T)) vs log T: " << fmt(slope) << "\n";
    t << "spread of q90 R/(sqrt(s) kappa): " << fmt(spread(q_ratio)) << "\n";
    res.text = t.str();
    return res;
}

RunResult run_certify(const ExperimentConfig& cfg) {
    apply_jobs(cfg);
    const Scenario sc = make_scenario(cfg.scenario);
    const ApproxInfo ap = approx_of(sc);
    const TheoreticalConstants tc = constants_of(cfg, sc, cfg.cert_s, ap.V_T, ap.rho_T);
    RunResult res;
    res.report["constants"] = constants_json(tc);
    res.report["approximation"] = {{"available", ap.available}, {"V_T", ap.V_T}, {"rho_T", ap.rho_T}};
    std::vector<double> support;
    try {
        support = equispaced_support(sc.ctx, cfg.cert_s, cfg.cert_gap);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("certify: ") + e.what());
    }
    const VerificationReport rep = verify_assumptions(sc.ctx, support, tc.r, tc);
    json clauses = json::array();
    std::ostringstream t;
    char buf[160];
    t << "constants: r=" << fmt(tc.r) << " H1=" << fmt(tc.H1) << " H2=" << fmt(tc.H2) << " C_N=" << fmt(tc.C_N)
      << " C_F=" << fmt(tc.C_F) << " c_N=" << fmt(tc.c_N) << " c_F=" << fmt(tc.c_F) << " u_inf=" << fmt(tc.u_inf)
      << "\n";
    t << "support:";
    for (double th : support) t << ' ' << fmt(th);
    t << "  coherence=" << fmt(rep.coherence) << "\n";
    std::snprintf(buf, sizeof buf, "  %-7s %-14s %-14s %-14s %s\n", "clause", "measured", "bound", "margin", "status");
    t << buf;
    for (const auto& c : rep.clauses) {
        clauses.push_back({{"name", c.name}, {"description", c.description}, {"measured", c.measured},
                           {"bound", c.bound}, {"worst_margin", c.worst_margin}, {"pass", c.pass}});
        std::snprintf(buf, sizeof buf, "  %-7s %-14.6g %-14.6g %-14.6g %s\n", c.name.c_str(), c.measured, c.bound,
                      c.worst_margin, c.pass ? "PASS" : "FAIL");
        t << buf;
    }
    t << "coefficient bounds: " << (rep.coefficient_bounds_ok ? "PASS" : "FAIL") << "\n";
    res.report["support"] = support;
    res.report["coherence"] = rep.coherence;
    res.report["coefficient_bounds_ok"] = rep.coefficient_bounds_ok;
    res.report["clauses"] = clauses;
    res.report["patterns"] = rep.patterns;
    res.report["pass"] = rep.pass;
    res.report["first_failure"] = rep.first_failure;
    if (!rep.pass) {
        res.exit_code = 1;
        t << "FAILED: " << rep.first_failure << "\n";
    }
    res.text = t.str();
    write_text(cfg.out_dir, "certify.json", res.report.dump(2) + "\n");
    write_manifest(cfg, "certify");
    return res;
}

RunResult run_separation(const ExperimentConfig& cfg) {
    apply_jobs(cfg);
    const Scenario sc = make_scenario(cfg.scenario);
    const ApproxInfo ap = approx_of(sc);
    const TheoreticalConstants tc = constants_of(cfg, sc, cfg.sep_s, ap.V_T, ap.rho_T);
    SeparationQuery q;
    q.u = std::isnan(cfg.sep_u) ? tc.u_inf : cfg.sep_u;
    q.s = cfg.sep_s;
    q.restarts = cfg.sep_restarts;
    q.seed = cfg.seed;
    RunResult res;
    std::ostringstream t;
    res.report["u"] = q.u;
    res.report["s"] = q.s;
    if (sc.limit) {
        const DeltaResult d = delta(*sc.limit, q);
        res.report["delta_limit"] = {{"delta", d.delta}, {"delta_equispaced", d.delta_equispaced},
                                     {"worst_config", d.worst_config}, {"worst_coherence", d.worst_coherence},
                                     {"steps", d.bisection_steps}, {"heuristic", d.heuristic}};
        t << "delta_inf(u=" << fmt(q.u) << ", s=" << q.s << ") = " << fmt(d.delta) << " (equispaced "
          << fmt(d.delta_equispaced) << ")\n";
    }
    SeparationQuery qT = q;
    qT.u = q.u + (q.s - 1) * ap.V_T;
    const DeltaResult dT = delta(sc.ctx, qT);
    res.report["delta_T"] = {{"u", qT.u}, {"delta", dT.delta}, {"delta_equispaced", dT.delta_equispaced},
                             {"steps", dT.bisection_steps}};
    t << "delta_T(u_T(s), s) = " << fmt(dT.delta);
    // A large V_T pushes u_T(s) above every attainable coherence; the search then stops at its floor.
    if (dT.delta <= qT.lower + qT.tolerance) t << " (search floor: u_T(s) = " << fmt(qT.u) << " is not binding)";
    t << "\n";
    if (cfg.sep_empirical) {
        const EmpiricalSeparation e = empirical_min_separation(sc.ctx, cfg.sep_s, tc.r, tc);
        res.report["empirical"] = {{"found", e.found}, {"gap_d", e.gap_d}, {"gap_euclidean", e.gap_euclidean},
                                   {"support", e.support}, {"failure_below", e.failure_below}, {"steps", e.steps}};
        t << "empirical certificate separation: d-gap " << fmt(e.gap_d) << ", euclidean " << fmt(e.gap_euclidean)
          << (e.found ? "" : " (not found)") << "\n";
        if (!e.found) res.exit_code = 1;
    }
    res.text = t.str();
    write_text(cfg.out_dir, "separation.json", res.report.dump(2) + "\n");
    write_manifest(cfg, "separation");
    return res;
}

RunResult run_noise_check(const ExperimentConfig& cfg) {
    apply_jobs(cfg);
    const Scenario sc = make_scenario(cfg.scenario);
    const NoiseModel nm = noise_from_json(cfg.noise, *sc.measure, cfg.seed);
    const GridMeasure& m = *sc.measure;
    // Test functions: normalized features and their first covariant derivative, plus constants.
    std::vector<HilbertVector> fns;
    const double lo = sc.ctx.lo(), hi = sc.ctx.hi();
    for (double f : {0.25, 0.5, 0.8}) fns.push_back(sc.ctx.covariant_feature(lo + f * (hi - lo), 0));
    fns.push_back(sc.ctx.covariant_feature(lo + 0.5 * (hi - lo), 1));
    fns.emplace_back(m, std::vector<double>(m.size(), 1.0));
    const VarianceReport vr = check_variance_bound(nm, sc.measure, fns, cfg.variance_reps);
    RunResult res;
    std::ostringstream t;
    json checks = json::array();
    t << "variance: model=" << nm.name() << " sigma2=" << fmt(vr.sigma2) << " delta=" << fmt(vr.delta) << "\n";
    for (const auto& c : vr.checks) {
        checks.push_back({{"empirical", c.empirical}, {"bound", c.bound}, {"ratio", c.ratio},
                          {"allowance", c.allowance}, {"pass", c.pass}});
        t << "  empirical " << fmt(c.empirical) << " bound " << fmt(c.bound) << " ratio " << fmt(c.ratio)
          << (c.pass ? " PASS" : " FAIL") << "\n";
    }
    res.report["variance"] = {{"model", nm.name()}, {"sigma2", vr.sigma2}, {"delta", vr.delta},
                              {"reps", vr.reps}, {"checks", checks}, {"pass", vr.pass}};
    bool pass = vr.pass;
    std::string failure = vr.pass ? "" : "variance bound";
    json tails = json::array();
    if (nm.sigma > 0.0) {
        const LimitConstants L = limit_constants_of(sc);
        for (int order : cfg.tail_orders) {
            std::vector<double> u = cfg.tail_u;
            if (u.empty()) {
                const auto [C1, C2] = tail_constants(order, L);
                (void)C2;
                const double scale = std::sqrt(nm.declared_sigma2() * nm.declared_delta(m)) * C1;
                for (int k = 0; k < 10; ++k) u.push_back(scale * (0.5 + 0.5 * k));
            }
            const ExceedanceReport er = empirical_sup_exceedance(sc.ctx, nm, order, u, cfg.tail_reps, L, cfg.r);
            tails.push_back({{"order", order}, {"u", er.u}, {"empirical", er.empirical}, {"std_error", er.std_error},
                             {"bound", er.bound}, {"C1", er.C1}, {"C2", er.C2}, {"pass", er.pass}});
            t << "tail M_" << order << ": " << (er.pass ? "PASS" : "FAIL") << "\n";
            for (std::size_t k = 0; k < er.u.size(); ++k)
                t << "  u=" << fmt(er.u[k]) << " P=" << fmt(er.empirical[k]) << " bound=" << fmt(er.bound[k]) << "\n";
            if (!er.pass && pass) failure = "tail bound M_" + std::to_string(order);
            pass = pass && er.pass;
        }
    }
    res.report["tails"] = tails;
    res.report["pass"] = pass;
    if (!pass) {
        res.exit_code = 1;
        t << "FAILED: " << failure << "\n";
    }
    res.text = t.str();
    write_text(cfg.out_dir, "noise_check.json", res.report.dump(2) + "\n");
    write_manifest(cfg, "noise-check");
    return res;
}

}  // namespace offgrid
