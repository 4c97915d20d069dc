// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
#include "offgrid/certificates.hpp"
#include "offgrid/cli.hpp"
#include "offgrid/errors.hpp"
#include "offgrid/estimator.hpp"
#include "offgrid/kernel.hpp"
#include "offgrid/noise.hpp"
#include "offgrid/scenario.hpp"
#include "offgrid/separation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace offgrid;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

// 1. Diagonal identities of the normalized kernel.
Outcome kernel_identities() {
    constexpr double tol = 1e-8;
    constexpr double budget_s = 10.0;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    double worst = 0.0;
    for (Family fam : {Family::gaussian_translate, Family::cauchy_translate, Family::exp_scale}) {
        for (std::size_t T : {64, 256, 2048}) {
            KernelContext ctx = [&] {
                if (fam == Family::exp_scale)
                    return KernelContext::discrete(DictionarySpec::exp_scale(0.0), GridMeasure::regular(0.0, 10.0, T),
                                                   0.5, 4.0);
                const auto d = fam == Family::gaussian_translate ? DictionarySpec::gaussian(1.0)
                                                                 : DictionarySpec::cauchy(1.0);
                return KernelContext::discrete(d, GridMeasure::regular(-10.0, 10.0, T), -8.0, 8.0);
            }();
            std::uniform_real_distribution<double> U(ctx.lo(), ctx.hi());
            for (int k = 0; k < 20; ++k) {
                const double th = U(rng);
                worst = std::max({worst, std::abs(ctx.kernel_deriv(th, th, 0, 0) - 1.0),
                                  std::abs(ctx.kernel_deriv(th, th, 1, 0)),
                                  std::abs(ctx.kernel_deriv(th, th, 2, 0) + 1.0),
                                  std::abs(ctx.kernel_deriv(th, th, 2, 1))});
            }
        }
    }
    const double dt = seconds_since(t0);
    return {worst <= tol && dt < budget_s,
            "max deviation " + fmt("%.2e", worst) + " (tol 1e-8), " + fmt("%.2f", dt) + " s"};
}

// 2. Constants of the gaussian worked example.
Outcome constants_table() {
    const auto L = LimitConstants::gaussian(1.0);
    const auto c = gaussian_worked_constants(2.0, 2, 0.0, 0.9, 1.0);
    struct Row {
        const char* name;
        double value, target, tol;
    };
    const std::vector<Row> rows = {
        {"L10", L.L10, std::exp(-0.5), 1e-12},
        {"L21", L.L21, std::sqrt(18.0 - 6.0 * std::sqrt(6.0)) * std::exp(std::sqrt(1.5) - 1.5), 1e-12},
        {"L22", L.L22, 3.0, 1e-12},
        {"L3", L.L3, 15.0, 1e-12},
        {"r*", c.r, 0.49, 0.01},
        {"H1", c.H1, 2.9e-3, 2e-4},
        {"H2", c.H2, 3.7e-3, 2e-4},
        {"C_N", c.C_N, 2e-4, 2e-5},
        {"C_F", c.C_F, 2.9e-3, 2e-4},
        {"c_N", c.c_N, 1.9, 0.05},
        {"c_F", c.c_F, 2.6, 0.05},
    };
    bool pass = true;
    std::ostringstream os;
    for (const auto& r : rows) {
        const bool ok = within(r.value, r.target, r.tol);
        pass = pass && ok;
        if (!ok) os << r.name << "=" << fmt("%.6g", r.value) << " outside " << fmt("%.6g", r.target) << "+-"
                    << fmt("%.2g", r.tol) << "; ";
    }
    os << "r*=" << fmt("%.4f", c.r) << " H1=" << fmt("%.3e", c.H1) << " H2=" << fmt("%.3e", c.H2)
       << " C_N=" << fmt("%.3e", c.C_N) << " C_F=" << fmt("%.3e", c.C_F) << " c_N=" << fmt("%.4f", c.c_N)
       << " c_F=" << fmt("%.4f", c.c_F);
    return {pass, os.str()};
}

// 3. Separation on the limit kernel and the empirical certificate separation at T = 2048.
Outcome separation() {
    constexpr double target = 4.5, tol = 0.2, max_euclid = 3.5, budget_s = 300.0;
    const auto t0 = Clock::now();
    const auto c = gaussian_worked_constants();
    const auto lim = KernelContext::limit(DictionarySpec::gaussian(1.0), -12.0, 12.0);
    SeparationQuery q;
    q.u = c.u_inf;
    q.s = 2;
    const DeltaResult d = delta(lim, q);
    ScenarioSpec spec;
    spec.T = 2048;
    const Scenario sc = make_scenario(spec);
    const auto cmp = limit_compare(sc.ctx, *sc.limit, sc.ctx.uniform_grid(0.05));
    const auto tc = gaussian_worked_constants(2.0, 2, cmp.V_T);
    const EmpiricalSeparation e = empirical_min_separation(sc.ctx, 2, tc.r, tc);
    const double dt = seconds_since(t0);
    const bool pass = within(d.delta, target, tol) && e.found && e.gap_euclidean <= max_euclid && dt < budget_s;
    return {pass, "delta_inf=" + fmt("%.3f", d.delta) + " (4.5+-0.2), empirical euclidean gap " +
                      fmt("%.3f", e.gap_euclidean) + (e.found ? "" : " (not found)") + " (<= 3.5), " +
                      fmt("%.1f", dt) + " s"};
}

// 4. Kernel approximation along T with window shrinkage 0.3.
Outcome approximation_trend() {
    constexpr double rho_tol = 1e-2, spread_max = 3.0, shrinkage = 0.3;
    std::vector<double> V, R, c1;
    std::ostringstream os;
    for (std::size_t T : {256, 1024, 4096}) {
        ScenarioSpec spec;
        spec.T = T;
        spec.shrinkage = shrinkage;
        const Scenario sc = make_scenario(spec);
        const auto cmp = limit_compare(sc.ctx, *sc.limit, sc.ctx.uniform_grid(0.02));
        V.push_back(cmp.V_T);
        R.push_back(std::abs(cmp.rho_T - 1.0));
        c1.push_back(cmp.V_T / approximation_gamma(spec));
        os << "T=" << T << " V=" << fmt("%.4g", cmp.V_T) << " |rho-1|=" << fmt("%.3g", R.back())
           << " V/gamma=" << fmt("%.3g", c1.back()) << "; ";
    }
    const bool mono = V[1] < V[0] && V[2] < V[1] && R[1] < R[0] && R[2] < R[1];
    const double spread = *std::max_element(c1.begin(), c1.end()) / *std::min_element(c1.begin(), c1.end());
    os << "c1 spread " << fmt("%.2f", spread);
    return {mono && R.back() < rho_tol && spread <= spread_max, os.str()};
}

// 5. Both certificate kinds on s = 2 supports with d-gap 9 at T = 2048.
Outcome certificates() {
    constexpr double gap = 9.0, budget_s = 30.0;
    const auto t0 = Clock::now();
    ScenarioSpec spec;
    spec.T = 2048;
    const Scenario sc = make_scenario(spec);
    const auto cmp = limit_compare(sc.ctx, *sc.limit, sc.ctx.uniform_grid(0.05));
    const auto tc = gaussian_worked_constants(2.0, 2, cmp.V_T);
    const auto S = equispaced_support(sc.ctx, 2, gap);
    const VerificationReport rep = verify_assumptions(sc.ctx, S, tc.r, tc);
    const double dt = seconds_since(t0);
    std::ostringstream os;
    os << rep.patterns << " patterns, " << rep.clauses.size() << " clauses";
    if (!rep.pass) os << ", first failure " << rep.first_failure;
    os << ", coefficient bounds " << (rep.coefficient_bounds_ok ? "ok" : "violated") << ", " << fmt("%.1f", dt)
       << " s";
    return {rep.pass && rep.patterns == 4 && rep.pass_interpolating && rep.pass_derivative &&
                rep.coefficient_bounds_ok && dt < budget_s,
            os.str()};
}

// 6. Solver properties: exact recovery, KKT residuals and the lasso oracle.
Outcome solver_properties() {
    constexpr double theta_tol = 1e-4, amp_tol = 1e-6, kkt_rel = 2e-6, oracle_tol = 1e-4;
    std::vector<std::string> bad;
    ScenarioSpec spec;
    spec.T = 1024;
    const Scenario sc = make_scenario(spec);
    const Solver solver(sc.ctx);
    std::mt19937_64 rng(0);

    {  // single atom, noiseless
        const Observation obs = make_observation(sc.ctx, Truth{{1.0}, {0.3137}}, nullptr, rng);
        SolverConfig cfg;
        cfg.kappa = 0.05;
        const Estimate est = solver.fit(obs, cfg);
        if (est.theta.size() != 1 || std::abs(est.theta[0] - 0.3137) > theta_tol ||
            std::abs(est.beta[0] - 0.95) > amp_tol)
            bad.push_back("single atom");
    }
    {  // two atoms with d-gap 9, noiseless
        const Truth truth = equispaced_truth(sc.ctx, {1.0, -0.8}, 9.0);
        const Observation obs = make_observation(sc.ctx, truth, nullptr, rng);
        SolverConfig cfg;
        cfg.kappa = 1e-4;
        const Estimate est = solver.fit(obs, cfg);
        bool ok = est.theta.size() == 2;
        for (std::size_t k = 0; ok && k < 2; ++k)
            ok = std::abs(est.theta[k] - truth.theta[k]) < theta_tol && std::abs(est.beta[k] - truth.beta[k]) < 1e-3;
        if (!ok) bad.push_back("two atoms");
    }
    // KKT residuals on noisy converged fits.
    const Truth truth = equispaced_truth(sc.ctx, {1.0, -0.8, 1.2}, 3.5);
    const NoiseSampler ns(NoiseModel::iid(0.5), sc.measure);
    const auto fine = sc.ctx.uniform_grid(0.01);
    double worst_kkt = 0.0;
    int converged = 0;
    for (int rep = 0; rep < 10; ++rep) {
        auto r = replicate_rng(99, rep);
        const Observation obs = make_observation(sc.ctx, truth, &ns, r);
        SolverConfig cfg;
        cfg.kappa = tuning_kappa(obs.sigma, obs.delta, 1024.0, 1.5);
        cfg.max_atoms = 12;
        const Estimate est = solver.fit(obs, cfg);
        if (!est.converged) continue;
        ++converged;
        const HilbertVector res = obs.y - mixture(sc.ctx, est.beta, est.theta);
        for (double th : fine) {
            const double c = std::abs(inner(sc.ctx.covariant_feature(th, 0), res, *sc.measure));
            worst_kkt = std::max(worst_kkt, (c - cfg.kappa) / cfg.kappa);
        }
        for (std::size_t l = 0; l < est.theta.size(); ++l) {
            const double c = inner(sc.ctx.covariant_feature(est.theta[l], 0), res, *sc.measure);
            worst_kkt = std::max(worst_kkt, std::abs(c - cfg.kappa * (est.beta[l] > 0 ? 1.0 : -1.0)) / cfg.kappa);
        }
    }
    if (worst_kkt > kkt_rel) bad.push_back("KKT");
    // Lasso against a brute-force oracle on random s <= 2 problems.
    double worst_oracle = 0.0;
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int s = 1 + trial % 2;
        Eigen::MatrixXd K = Eigen::MatrixXd::Identity(s, s);
        if (s == 2) K(0, 1) = K(1, 0) = 0.8 * U(rng);
        Eigen::VectorXd c(s);
        for (int k = 0; k < s; ++k) c(k) = 1.5 * U(rng);
        const double yy = 4.0, kappa = 0.1 + 0.2 * std::abs(U(rng));
        auto obj = [&](const Eigen::VectorXd& b) { return 0.5 * (yy - 2.0 * c.dot(b) + b.dot(K * b)) + kappa * b.lpNorm<1>(); };
        Eigen::VectorXd best = Eigen::VectorXd::Zero(s), b(s);
        double fbest = obj(best);
        const double step = 5e-3;
        for (int i = -600; i <= 600; ++i)
            for (int j = (s == 2 ? -600 : 0); j <= (s == 2 ? 600 : 0); ++j) {
                b(0) = i * step;
                if (s == 2) b(1) = j * step;
                if (const double f = obj(b); f < fbest) fbest = f, best = b;
            }
        for (double h = step; h > 1e-8; h *= 0.5)
            for (bool moved = true; moved;) {
                moved = false;
                for (int k = 0; k < s; ++k)
                    for (double sg : {1.0, -1.0}) {
                        b = best;
                        b(k) += sg * h;
                        if (const double f = obj(b); f < fbest) fbest = f, best = b, moved = true;
                    }
            }
        const auto lr = lasso_amplitudes(K, c, yy, kappa);
        for (int k = 0; k < s; ++k) worst_oracle = std::max(worst_oracle, std::abs(lr.beta[k] - best(k)));
    }
    if (worst_oracle > oracle_tol) bad.push_back("lasso oracle");
    std::ostringstream os;
    os << "converged " << converged << "/10, max KKT excess " << fmt("%.2e", worst_kkt) << " kappa, oracle gap "
       << fmt("%.2e", worst_oracle);
    for (const auto& b : bad) os << "; failed: " << b;
    return {bad.empty() && converged > 0, os.str()};
}

// 7. Monte Carlo rate study.
Outcome rate_study() {
    constexpr double slope_lo = -0.60, slope_hi = -0.40, spread_max = 3.0, budget_s = 1800.0;
    const auto t0 = Clock::now();
    ExperimentConfig cfg;
    cfg.scenario.T = 256;
    cfg.amplitudes = {1.0, -0.8, 1.2};
    cfg.gap = 3.5;
    cfg.noise = {{"model", "iid"}, {"sigma", 0.5}};
    cfg.kappa_rule = ExperimentConfig::KappaRule::tuned;
    cfg.C1 = 1.5;
    cfg.replications = 200;
    cfg.seed = 7;
    cfg.ladder = {256, 512, 1024, 2048, 4096, 8192};
    const RunResult res = run_rates(cfg);
    const double dt = seconds_since(t0);
    const double slope = res.report["slope"].get<double>();
    const double spread = res.report["ratio_spread"].get<double>();
    const auto& g = res.report["I_growth"];
    const double g0 = g["I0"].get<double>(), g2 = g["I2"].get<double>(), g3 = g["I3"].get<double>();
    const bool pass = slope >= slope_lo && slope <= slope_hi && spread < spread_max && g0 <= spread_max &&
                      g2 <= spread_max && g3 <= spread_max && dt < budget_s;
    std::ostringstream os;
    os << "slope " << fmt("%.3f", slope) << " in [-0.60,-0.40], q90 R/(sqrt(s) kappa) spread " << fmt("%.2f", spread)
       << ", I growth I0 " << fmt("%.2f", g0) << " I2 " << fmt("%.2f", g2) << " I3 " << fmt("%.2f", g3) << ", "
       << fmt("%.0f", dt) << " s";
    return {pass, os.str()};
}

// 8. Sup-tail bounds for M_0, M_1, M_2.
Outcome noise_tails() {
    constexpr std::size_t reps = 1000;
    ScenarioSpec spec;
    spec.T = 512;
    const Scenario sc = make_scenario(spec);
    const NoiseModel nm = NoiseModel::iid(1.0, 5);
    const auto L = LimitConstants::gaussian(1.0);
    bool pass = true;
    std::ostringstream os;
    for (int order = 0; order <= 2; ++order) {
        const auto [C1, C2] = tail_constants(order, L);
        (void)C2;
        const double scale = std::sqrt(nm.declared_sigma2() * nm.declared_delta(*sc.measure)) * C1;
        std::vector<double> u;
        for (int k = 0; k < 10; ++k) u.push_back(scale * (0.5 + 0.5 * k));
        const auto er = empirical_sup_exceedance(sc.ctx, nm, order, u, reps, L);
        double margin = -1.0;
        for (std::size_t k = 0; k < u.size(); ++k)
            margin = std::max(margin, er.empirical[k] - er.bound[k] - 3.0 * er.std_error[k]);
        pass = pass && er.pass;
        os << "M_" << order << (er.pass ? " ok" : " violated") << " (worst excess " << fmt("%.3g", margin) << ") ";
    }
    return {pass, os.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"kernel identities", kernel_identities},
        {"constants table", constants_table},
        {"separation", separation},
        {"approximation trend", approximation_trend},
        {"certificate verification", certificates},
        {"solver correctness", solver_properties},
        {"rate study", rate_study},
        {"noise tails", noise_tails},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s | %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
