#include "offgrid/separation.hpp"

#include "offgrid/errors.hpp"
#include "offgrid/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace offgrid {

double coherence(const KernelContext& ctx, const std::vector<double>& thetas) {
    return gamma_coherence(build_gamma(ctx, thetas));
}

void SeparationQuery::validate() const {
    if (!(u > 0.0)) throw DomainError("separation query: u must be positive");
    if (s < 1) throw DomainError("separation query: s must be >= 1");
    if (!(lower > 0.0) || !(tolerance > 0.0)) throw DomainError("separation query: bad search bounds");
}

namespace {

constexpr double gap_slack = 1e-9;

// Configuration from G-coordinates; empty when it does not fit.
bool config_from_params(const KernelContext& ctx, double delta, const std::vector<double>& p,
                        std::vector<double>& thetas) {
    const double L = ctx.riemannian_length();
    const std::size_t s = p.size();
    double G = p[0];
    if (G < 0.0) return false;
    thetas.resize(s);
    thetas[0] = ctx.from_coordinate(G);
    for (std::size_t k = 1; k < s; ++k) {
        G += delta * (1.0 + gap_slack) + p[k] * p[k];
        if (G > L) return false;
        thetas[k] = ctx.from_coordinate(G);
    }
    return true;
}

// Nelder-Mead maximization of f over R^n.
template <class F>
double nelder_mead_max(F f, std::vector<double>& x0, double scale, int max_evals) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> val(n + 1);
    for (std::size_t k = 0; k < n; ++k) simplex[k + 1][k] += scale;
    for (std::size_t k = 0; k <= n; ++k) val[k] = f(simplex[k]);
    int evals = static_cast<int>(n + 1);
    while (evals < max_evals) {
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t k = 0; k <= n; ++k) idx[k] = k;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return val[a] > val[b]; });
        const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];
        if (std::abs(val[best] - val[worst]) <= 1e-12 * (1.0 + std::abs(val[best])) && evals > 4 * (int)n) break;
        std::vector<double> c(n, 0.0);
        for (std::size_t k = 0; k <= n; ++k)
            if (k != worst)
                for (std::size_t d = 0; d < n; ++d) c[d] += simplex[k][d] / n;
        auto along = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t d = 0; d < n; ++d) x[d] = c[d] + t * (simplex[worst][d] - c[d]);
            return x;
        };
        auto xr = along(-1.0);
        const double fr = f(xr);
        ++evals;
        if (fr > val[best]) {
            auto xe = along(-2.0);
            const double fe = f(xe);
            ++evals;
            if (fe > fr) { simplex[worst] = xe; val[worst] = fe; }
            else { simplex[worst] = xr; val[worst] = fr; }
        } else if (fr > val[second]) {
            simplex[worst] = xr;
            val[worst] = fr;
        } else {
            auto xc = along(0.5);
            const double fc = f(xc);
            ++evals;
            if (fc > val[worst]) {
                simplex[worst] = xc;
                val[worst] = fc;
            } else {
                for (std::size_t k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        simplex[k][d] = simplex[best][d] + 0.5 * (simplex[k][d] - simplex[best][d]);
                    val[k] = f(simplex[k]);
                    ++evals;
                }
            }
        }
    }
    const auto it = std::max_element(val.begin(), val.end());
    x0 = simplex[it - val.begin()];
    return *it;
}

}  // namespace

std::vector<double> equispaced_support(const KernelContext& ctx, int s, double gap) {
    const double L = ctx.riemannian_length();
    std::vector<double> out(s);
    for (int k = 0; k < s; ++k) {
        const double G = 0.5 * L + (k - 0.5 * (s - 1)) * gap;
        if (G < 0.0 || G > L) throw DomainError("equispaced support does not fit in Theta_T");
        out[k] = ctx.from_coordinate(G);
    }
    return out;
}

double max_coherence(const KernelContext& ctx, double delta, int s, bool restarts, int n_restarts,
                     std::uint64_t seed, std::vector<double>* argmax) {
    const double L = ctx.riemannian_length();
    const double span = (s - 1) * delta * (1.0 + gap_slack);
    if (s < 1 || span > L) return -std::numeric_limits<double>::infinity();
    std::vector<double> best_cfg;
    double best = -std::numeric_limits<double>::infinity();
    auto eval = [&](const std::vector<double>& p) {
        std::vector<double> th;
        if (!config_from_params(ctx, delta, p, th)) return -1e300;
        return coherence(ctx, th);
    };
    {
        std::vector<double> p(s, 0.0);
        p[0] = 0.5 * (L - span);
        const double v = eval(p);
        best = v;
        config_from_params(ctx, delta, p, best_cfg);
    }
    if (restarts && s > 1) {
        std::vector<double> vals(n_restarts, -1e300);
        std::vector<std::vector<double>> cfgs(n_restarts);
#pragma omp parallel for schedule(dynamic)
        for (int k = 0; k < n_restarts; ++k) {
            std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (k + 1));
            std::exponential_distribution<double> extra(4.0 / std::max(delta, 1e-3));
            std::vector<double> p(s);
            double used = span;
            for (int j = 1; j < s; ++j) {
                const double e = std::min(extra(rng), std::max(0.0, L - used) / s);
                p[j] = std::sqrt(e);
                used += e;
            }
            std::uniform_real_distribution<double> pos(0.0, std::max(0.0, L - used));
            p[0] = pos(rng);
            nelder_mead_max(eval, p, 0.05 * std::max(delta, 0.1), 60 * s);
            vals[k] = eval(p);
            config_from_params(ctx, delta, p, cfgs[k]);
        }
        for (int k = 0; k < n_restarts; ++k)
            if (vals[k] > best) {
                best = vals[k];
                best_cfg = cfgs[k];
            }
    }
    if (argmax) *argmax = best_cfg;
    return best;
}

DeltaResult delta(const KernelContext& ctx, const SeparationQuery& q) {
    q.validate();
    DeltaResult res;
    const double L = ctx.riemannian_length();
    double hi = std::isnan(q.upper) ? (q.s > 1 ? L / (q.s - 1) : q.lower) : q.upper;
    auto search = [&](bool restarts, std::vector<double>* cfg, double* coh) {
        double lo = q.lower, up = hi;
        const double f_lo = max_coherence(ctx, lo, q.s, restarts, q.restarts, q.seed, cfg);
        if (coh) *coh = f_lo;
        if (f_lo <= q.u) return lo;
        if (max_coherence(ctx, up, q.s, restarts, q.restarts, q.seed) > q.u)
            throw RangeError("delta: coherence still above u at the upper search bound");
        while (up - lo > q.tolerance) {
            const double mid = 0.5 * (lo + up);
            std::vector<double> c;
            const double f = max_coherence(ctx, mid, q.s, restarts, q.restarts, q.seed, &c);
            ++res.bisection_steps;
            if (f <= q.u) up = mid;
            else {
                lo = mid;
                if (cfg) *cfg = c;
                if (coh) *coh = f;
            }
        }
        return up;
    };
    res.delta_equispaced = search(false, nullptr, nullptr);
    if (q.strategy == SeparationQuery::Strategy::equispaced) {
        res.delta = res.delta_equispaced;
        max_coherence(ctx, std::max(q.lower, res.delta - q.tolerance), q.s, false, 0, q.seed, &res.worst_config);
        res.worst_coherence = q.s > 1 ? coherence(ctx, res.worst_config) : 0.0;
        return res;
    }
    res.delta = search(true, &res.worst_config, &res.worst_coherence);
    return res;
}

double psi_s(double M, double delta, int s) {
    const double upper = 0.5 * s + 1.0;
    const auto r = adaptive_gauss_legendre(
        [delta](double t) { return std::exp(-t * t * delta * delta / 4.0); }, 0.0, upper, 1e-13);
    return 2.0 * M * r.value;
}

PsiBound psi_upper_bound(double M, double u, int s) {
    if (!(M > 0.0) || !(u > 0.0)) throw DomainError("psi_upper_bound: M and u must be positive");
    PsiBound b;
    b.uniform = 2.0 * std::sqrt(std::numbers::pi) * M / u;
    if (u > M * (s + 2)) {
        b.finite = 0.0;
        return b;
    }
    double lo = 0.0, hi = b.uniform;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (psi_s(M, mid, s) > u) lo = mid; else hi = mid;
    }
    b.finite = 0.5 * (lo + hi);
    b.residual = std::abs(psi_s(M, b.finite, s) - u);
    return b;
}

double gaussian_envelope_constant() {
    double M = 0.0;
    for (int i = 0; i <= 3; ++i) {
        auto f = [i](double t) { return std::abs(gaussian_poly(i, t)) * std::exp(-t * t / 4.0); };
        double best_t = 0.0, best = f(0.0);
        for (int k = 0; k <= 20000; ++k) {
            const double t = 10.0 * k / 20000.0;
            if (f(t) > best) { best = f(t); best_t = t; }
        }
        // Golden refinement around the best grid point.
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = std::max(0.0, best_t - 1e-3), b = best_t + 1e-3;
        for (int it = 0; it < 100; ++it) {
            const double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
            if (f(x1) < f(x2)) a = x1; else b = x2;
        }
        M = std::max({M, best, f(0.5 * (a + b))});
    }
    return M;
}

EmpiricalSeparation empirical_min_separation(const KernelContext& ctx, int s, double r,
                                             const TheoreticalConstants& constants,
                                             const EmpiricalSeparationOptions& opt) {
    EmpiricalSeparation out;
    double lo = opt.lower > 0.0 ? opt.lower : 2.0 * r * (1.0 + 1e-6);
    auto euclid = [](const std::vector<double>& th) {
        double g = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < th.size(); ++k) g = std::min(g, std::abs(th[k] - th[k - 1]));
        return th.size() > 1 ? g : 0.0;
    };
    auto check = [&](double gap, std::string* fail) {
        const auto sup = equispaced_support(ctx, s, gap);
        try {
            const auto rep = verify_assumptions(ctx, sup, r, constants, opt.verify);
            if (fail) *fail = rep.first_failure;
            return rep.pass;
        } catch (const ConditioningError& e) {
            // Gamma too coherent to solve: the certificate does not exist at this gap.
            if (fail) *fail = e.what();
            return false;
        }
    };
    if (s == 1) {
        out.gap_d = lo;
        out.found = true;
        out.support = equispaced_support(ctx, 1, 0.0);
        return out;
    }
    double hi = std::min(opt.upper, 0.999 * ctx.riemannian_length() / (s - 1));
    if (check(lo, &out.failure_below)) {
        out.gap_d = lo;
        out.found = true;
    } else if (!check(hi, nullptr)) {
        out.gap_d = hi;
        out.found = false;
    } else {
        while (hi - lo > opt.tolerance) {
            const double mid = 0.5 * (lo + hi);
            std::string f;
            ++out.steps;
            if (check(mid, &f)) hi = mid;
            else {
                lo = mid;
                out.failure_below = f;
            }
        }
        out.gap_d = hi;
        out.found = true;
    }
    out.support = equispaced_support(ctx, s, out.gap_d);
    out.gap_euclidean = euclid(out.support);
    return out;
}

}  // namespace offgrid
