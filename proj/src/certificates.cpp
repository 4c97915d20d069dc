#include "offgrid/certificates.hpp"

#include "offgrid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace offgrid {

Eigen::MatrixXd GammaSystem::full() const {
    const Eigen::Index s = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd M(2 * s, 2 * s);
    M << G00, G10.transpose(), G10, G11;
    return M;
}

GammaSystem build_gamma(const KernelContext& ctx, const std::vector<double>& support) {
    const std::size_t s = support.size();
    if (s == 0) throw DomainError("build_gamma: empty support");
    for (std::size_t k = 0; k < s; ++k) {
        if (!ctx.in_window(support[k])) throw DomainError("build_gamma: support point outside Theta_T");
        for (std::size_t l = 0; l < k; ++l)
            if (support[k] == support[l]) throw DomainError("build_gamma: duplicate support points");
    }
    GammaSystem gs;
    gs.support = support;
    const auto fr = ctx.frames(support);
    const Eigen::Index n = static_cast<Eigen::Index>(s);
    gs.G00.resize(n, n);
    gs.G10.resize(n, n);
    gs.G11.resize(n, n);
    gs.G20.resize(n, n);
    gs.G12.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l) {
            const Eigen::Matrix4d K = ctx.kernel_block(fr[k], fr[l]);
            gs.G00(k, l) = K(0, 0);
            gs.G10(k, l) = K(1, 0);
            gs.G11(k, l) = K(1, 1);
            gs.G20(k, l) = K(2, 0);
            gs.G12(k, l) = K(1, 2);
        }
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::abs(gs.G00(k, k) - 1.0) > 1e-6 || std::abs(gs.G11(k, k) - 1.0) > 1e-6 ||
            std::abs(gs.G10(k, k)) > 1e-6 || std::abs(gs.G20(k, k) + 1.0) > 1e-6)
            throw NumericError("build_gamma: diagonal kernel identities violated");
    }
    return gs;
}

double op_norm_inf(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    return M.cwiseAbs().rowwise().sum().maxCoeff();
}

double gamma_coherence(const GammaSystem& gs) {
    const Eigen::Index n = static_cast<Eigen::Index>(gs.size());
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    return std::max({op_norm_inf(I - gs.G00), op_norm_inf(I - gs.G11), op_norm_inf(I + gs.G20),
                     op_norm_inf(gs.G10), op_norm_inf(gs.G10.transpose()), op_norm_inf(gs.G12)});
}

std::string to_string(CertificateKind k) {
    return k == CertificateKind::interpolating ? "interpolating" : "derivative";
}

CertificateCoeffs solve_certificate(const GammaSystem& gs, const Eigen::VectorXd& v, CertificateKind kind) {
    const Eigen::Index n = static_cast<Eigen::Index>(gs.size());
    if (v.size() != n) throw DomainError("solve_certificate: sign vector has wrong length");
    CertificateCoeffs cc;
    cc.kind = kind;
    cc.v = v;
    cc.coherence = gamma_coherence(gs);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    cc.norm_I_minus_G11 = op_norm_inf(I - gs.G11);
    if (!(cc.norm_I_minus_G11 < 1.0)) {
        std::ostringstream msg;
        msg << "solve_certificate: ||I - Gamma11||_op = " << cc.norm_I_minus_G11 << " >= 1";
        throw ConditioningError(msg.str());
    }
    const Eigen::MatrixXd& A = gs.G00;
    const Eigen::MatrixXd B = gs.G10.transpose();
    const Eigen::MatrixXd& C = gs.G10;
    const Eigen::PartialPivLU<Eigen::MatrixXd> Dlu(gs.G11);
    const Eigen::MatrixXd DinvC = Dlu.solve(C);
    const Eigen::MatrixXd S = A - B * DinvC;
    cc.schur_norm = op_norm_inf(I - S);
    const Eigen::PartialPivLU<Eigen::MatrixXd> Slu(S);
    if (!(Slu.rcond() > 1e-13)) {
        std::ostringstream msg;
        msg << "solve_certificate: Schur complement is singular (rcond " << Slu.rcond()
            << ", ||I - S||_op = " << cc.schur_norm << ")";
        throw ConditioningError(msg.str());
    }
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
    if (kind == CertificateKind::interpolating)
        a = v;
    else
        b = v;
    const Eigen::VectorXd Dinvb = Dlu.solve(b);
    cc.alpha = Slu.solve(a - B * Dinvb);
    cc.xi = Dinvb - DinvC * cc.alpha;
    return cc;
}

bool coefficient_bounds_hold(const CertificateCoeffs& cc, double u, double tol) {
    if (!(u < 0.5)) return false;
    const double big = (1.0 - u) / (1.0 - 2.0 * u);
    const double small = u / (1.0 - 2.0 * u);
    const double na = cc.alpha.cwiseAbs().maxCoeff();
    const double nx = cc.xi.cwiseAbs().maxCoeff();
    if (cc.kind == CertificateKind::interpolating) {
        const double nav = (cc.alpha - cc.v).cwiseAbs().maxCoeff();
        return na <= big + tol && nav <= small + tol && nx <= small + tol;
    }
    return na <= small + tol && nx <= big + tol;
}

double eval_certificate(const KernelContext& ctx, const CertificateCoeffs& cc,
                        const std::vector<double>& support, double theta, int order) {
    if (order < 0 || order > 2) throw DomainError("eval_certificate: order must be in 0..2");
    const Frame f = ctx.frame(theta);
    double out = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
        const Eigen::Matrix4d K = ctx.kernel_block(f, ctx.frame(support[k]));
        out += cc.alpha(k) * K(order, 0) + cc.xi(k) * K(order, 1);
    }
    return out;
}

double certificate_norm(const GammaSystem& gs, const CertificateCoeffs& cc) {
    const double q = cc.alpha.dot(gs.G00 * cc.alpha) + 2.0 * cc.alpha.dot(gs.G10.transpose() * cc.xi) +
                     cc.xi.dot(gs.G11 * cc.xi);
    if (q < -1e-10) throw NumericError("certificate_norm: negative quadratic form");
    return std::sqrt(std::max(0.0, q));
}

double certificate_norm(const KernelContext& ctx, const CertificateCoeffs& cc,
                        const std::vector<double>& support) {
    return certificate_norm(build_gamma(ctx, support), cc);
}

HilbertVector assemble_certificate(const KernelContext& ctx, const CertificateCoeffs& cc,
                                   const std::vector<double>& support) {
    if (ctx.is_limit()) throw DomainError("assemble_certificate needs a discrete context");
    HilbertVector p(*ctx.measure());
    for (std::size_t k = 0; k < support.size(); ++k) {
        const Frame f = ctx.frame(support[k]);
        p.axpy(cc.alpha(k), HilbertVector(*ctx.measure(), ctx.covariant_values(f, 0)));
        p.axpy(cc.xi(k), HilbertVector(*ctx.measure(), ctx.covariant_values(f, 1)));
    }
    return p;
}

double H1_value(const LimitConstants& L, double eps, double nu) {
    return std::min({0.5, L.L20, L.L21, nu / 10.0, eps / 10.0});
}

double H2_value(const LimitConstants& L, double eps, double nu) {
    return std::min({1.0 / 6.0, 8.0 * eps / (10.0 * (5.0 + 2.0 * L.L10)),
                     8.0 * nu / (9.0 * (2.0 * L.L20 + 2.0 * L.L21 + 4.0))});
}

TheoreticalConstants theoretical_constants(const LimitConstants& L, double r, double rho, double eps,
                                           double nu, int s, double V_T, double u_inf, double rho_T) {
    if (s < 1) throw DomainError("theoretical_constants: s must be >= 1");
    TheoreticalConstants c;
    c.L = L;
    c.r = r;
    c.rho = rho;
    c.eps = eps;
    c.nu = nu;
    c.s = s;
    c.V_T = V_T;
    c.u_inf = u_inf;
    c.rho_T = rho_T;
    c.C_N = nu / 180.0;
    c.C_Np = 5.0 / 8.0 * L.L20 + 1.0 / 8.0 * L.L21 + 0.5;
    c.C_F = eps / 10.0;
    c.C_B = 2.0;
    c.c_N = 1.0 / 8.0 * L.L20 + 5.0 / 8.0 * L.L21 + 7.0 / 8.0;
    c.c_F = 5.0 / 4.0 * L.L10 + 7.0 / 4.0;
    c.c_B = 2.0;
    c.H1 = H1_value(L, eps, nu);
    c.H2 = H2_value(L, eps, nu);
    c.u_T_of_s = u_inf + (s - 1) * V_T;
    c.radius_ok = r > 0.0 && r < 1.0 / std::sqrt(2.0 * L.L20);
    c.concavity_ok = eps > 0.0 && nu > 0.0;
    c.separation_ok = u_inf > 0.0 && u_inf < c.H2;
    c.metric_ok = rho_T <= rho;
    c.proximity_ok = V_T <= c.H1 && (s - 1) * V_T <= c.H2 - u_inf;
    c.derivative_hyp_ok = V_T <= 1.0 && (s - 1) * V_T + u_inf <= 1.0 / 6.0;
    return c;
}

double gaussian_optimal_radius(double rho, double sigma0) {
    const LimitConstants L = LimitConstants::gaussian(sigma0);
    auto h2 = [&](double r) {
        return H2_value(L, epsilon_gaussian_limit(r / rho), nu_gaussian_limit(rho * r));
    };
    // H2 is the min of an increasing and a decreasing term, hence unimodal on (0, 1/2].
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = 0.5;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = h2(x1), f2 = h2(x2);
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a); f2 = h2(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a); f1 = h2(x1);
        }
    }
    return 0.5 * (a + b);
}

TheoreticalConstants gaussian_worked_constants(double rho, int s, double V_T, double eta0, double sigma0) {
    const LimitConstants L = LimitConstants::gaussian(sigma0);
    const double r = gaussian_optimal_radius(rho, sigma0);
    const double eps = epsilon_gaussian_limit(r / rho);
    const double nu = nu_gaussian_limit(rho * r);
    const double u_inf = eta0 * H2_value(L, eps, nu);
    return theoretical_constants(L, r, rho, eps, nu, s, V_T, u_inf);
}

const ClauseResult& VerificationReport::clause(const std::string& name) const {
    for (const auto& c : clauses)
        if (c.name == name) return c;
    throw DomainError("no clause named " + name);
}

namespace {

std::vector<Eigen::VectorXd> sign_patterns(std::size_t s, const VerifyOptions& opt) {
    std::vector<Eigen::VectorXd> out;
    if (s <= opt.max_exhaustive_s) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << s); ++mask) {
            Eigen::VectorXd v(s);
            for (std::size_t k = 0; k < s; ++k) v(k) = (mask >> k) & 1 ? -1.0 : 1.0;
            out.push_back(v);
        }
        return out;
    }
    std::mt19937_64 rng(opt.seed);
    for (std::size_t p = 0; p < opt.random_patterns; ++p) {
        Eigen::VectorXd v(s);
        for (std::size_t k = 0; k < s; ++k) v(k) = (rng() & 1) ? -1.0 : 1.0;
        out.push_back(v);
    }
    return out;
}

struct PatternOutcome {
    // Worst margins (bound - measured) and measured constants.
    double a1i = INFINITY, a1ii = INFINITY, a1iii = INFINITY, a1iv = INFINITY;
    double a2i = INFINITY, a2ii = INFINITY, a2iii = INFINITY;
    double CN = INFINITY, CNp = 0.0, far1 = 0.0, CB = 0.0;
    double cN = 0.0, far2 = 0.0, cB = 0.0;
    bool bounds_ok = true;
};

}  // namespace

VerificationReport verify_assumptions(const KernelContext& ctx, const std::vector<double>& support,
                                      double r, const TheoreticalConstants& c, const VerifyOptions& opt) {
    const std::size_t s = support.size();
    if (s == 0) throw DomainError("verify_assumptions: empty support");
    if (!(r > 0.0)) throw DomainError("verify_assumptions: r must be positive");
    std::vector<double> Gs(s);
    for (std::size_t k = 0; k < s; ++k) Gs[k] = ctx.coordinate(support[k]);
    for (std::size_t k = 0; k < s; ++k)
        for (std::size_t l = 0; l < k; ++l)
            if (!(std::abs(Gs[k] - Gs[l]) > 2.0 * r))
                throw DomainError("verify_assumptions: support gaps must exceed 2r");

    VerificationReport rep;
    rep.support = support;
    rep.r = r;
    const double L = ctx.riemannian_length();

    // Near grids: d-uniform over each ball, clipped to Theta_T.
    std::vector<double> near_theta, near_d, near_sign;
    std::vector<std::size_t> near_owner;
    const std::size_t np = std::max<std::size_t>(opt.near_points, 2);
    for (std::size_t k = 0; k < s; ++k) {
        for (std::size_t p = 0; p < np; ++p) {
            const double G = Gs[k] - r + 2.0 * r * p / static_cast<double>(np - 1);
            if (G < 0.0 || G > L) continue;
            near_theta.push_back(ctx.from_coordinate(G));
            near_d.push_back(std::abs(G - Gs[k]));
            near_sign.push_back(G >= Gs[k] ? 1.0 : -1.0);
            near_owner.push_back(k);
        }
    }
    rep.near_points_per_ball = np;
    // Far grid.
    rep.far_step = r / opt.far_step_factor;
    std::vector<double> far_theta;
    const std::size_t nf = static_cast<std::size_t>(std::ceil(L / rep.far_step));
    for (std::size_t p = 0; p <= nf; ++p) {
        const double G = L * p / static_cast<double>(nf);
        bool near = false;
        for (double g : Gs) near = near || std::abs(G - g) <= r;
        if (!near) far_theta.push_back(ctx.from_coordinate(G));
    }
    rep.far_points = far_theta.size();

    const GammaSystem gs = build_gamma(ctx, support);
    rep.coherence = gamma_coherence(gs);
    const auto sup_fr = ctx.frames(support);
    const auto near_fr = ctx.frames(near_theta);
    const Eigen::MatrixXd N0 = ctx.kernel_table(near_fr, sup_fr, 0, 0);
    const Eigen::MatrixXd N1 = ctx.kernel_table(near_fr, sup_fr, 0, 1);
    Eigen::MatrixXd F0(0, static_cast<Eigen::Index>(s)), F1 = F0;
    if (!far_theta.empty()) {
        const auto far_fr = ctx.frames(far_theta);
        F0 = ctx.kernel_table(far_fr, sup_fr, 0, 0);
        F1 = ctx.kernel_table(far_fr, sup_fr, 0, 1);
    }

    const auto patterns = sign_patterns(s, opt);
    rep.patterns = patterns.size();
    std::vector<PatternOutcome> outcomes(patterns.size());
    const double tol = opt.tolerance;
    const double sqs = std::sqrt(static_cast<double>(s));
    const double dmin = 1e-3 * r;  // exclude the centre when measuring constants
    std::string err;

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(patterns.size()); ++pi) {
        PatternOutcome& o = outcomes[pi];
        const Eigen::VectorXd& v = patterns[pi];
        try {
            if (opt.interpolating) {
                const auto cc = solve_certificate(gs, v, CertificateKind::interpolating);
                if (rep.coherence < 0.5) o.bounds_ok = o.bounds_ok && coefficient_bounds_hold(cc, rep.coherence);
                const Eigen::VectorXd eta = N0 * cc.alpha + N1 * cc.xi;
                for (Eigen::Index q = 0; q < eta.size(); ++q) {
                    const double d = near_d[q], d2 = d * d;
                    const double vk = v(near_owner[q]);
                    o.a1i = std::min(o.a1i, 1.0 - c.C_N * d2 - std::abs(eta(q)));
                    o.a1ii = std::min(o.a1ii, c.C_Np * d2 - std::abs(eta(q) - vk));
                    if (d > dmin) {
                        o.CN = std::min(o.CN, (1.0 - std::abs(eta(q))) / d2);
                        o.CNp = std::max(o.CNp, std::abs(eta(q) - vk) / d2);
                    }
                }
                if (F0.rows() > 0) {
                    const Eigen::VectorXd far = F0 * cc.alpha + F1 * cc.xi;
                    o.far1 = far.cwiseAbs().maxCoeff();
                    o.a1iii = (1.0 - c.C_F) - o.far1;
                }
                o.CB = certificate_norm(gs, cc) / sqs;
                o.a1iv = c.C_B - o.CB;
            }
            if (opt.derivative) {
                const auto cc = solve_certificate(gs, v, CertificateKind::derivative);
                if (rep.coherence < 0.5) o.bounds_ok = o.bounds_ok && coefficient_bounds_hold(cc, rep.coherence);
                const Eigen::VectorXd eta = N0 * cc.alpha + N1 * cc.xi;
                for (Eigen::Index q = 0; q < eta.size(); ++q) {
                    const double d = near_d[q], d2 = d * d;
                    const double dev = std::abs(eta(q) - v(near_owner[q]) * near_sign[q] * d);
                    o.a2i = std::min(o.a2i, c.c_N * d2 - dev);
                    if (d > dmin) o.cN = std::max(o.cN, dev / d2);
                }
                if (F0.rows() > 0) {
                    const Eigen::VectorXd far = F0 * cc.alpha + F1 * cc.xi;
                    o.far2 = far.cwiseAbs().maxCoeff();
                    o.a2ii = c.c_F - o.far2;
                }
                o.cB = certificate_norm(gs, cc) / sqs;
                o.a2iii = c.c_B - o.cB;
            }
        } catch (const std::exception& e) {
#pragma omp critical
            err = e.what();
        }
    }
    if (!err.empty()) throw ConditioningError(err);

    auto make = [&](const char* name, const char* desc, double bound, auto margin_of, auto measured_of,
                    bool take_min) {
        ClauseResult cr;
        cr.name = name;
        cr.description = desc;
        cr.bound = bound;
        cr.measured = take_min ? INFINITY : 0.0;
        for (const auto& o : outcomes) {
            cr.worst_margin = std::min(cr.worst_margin, margin_of(o));
            cr.measured = take_min ? std::min(cr.measured, measured_of(o)) : std::max(cr.measured, measured_of(o));
        }
        cr.pass = cr.worst_margin >= -tol;
        return cr;
    };
    if (opt.interpolating) {
        rep.clauses.push_back(make("A1-i", "near |eta| <= 1 - C_N d^2", c.C_N,
                                   [](const PatternOutcome& o) { return o.a1i; },
                                   [](const PatternOutcome& o) { return o.CN; }, true));
        rep.clauses.push_back(make("A1-ii", "near |eta - v_k| <= C_N' d^2", c.C_Np,
                                   [](const PatternOutcome& o) { return o.a1ii; },
                                   [](const PatternOutcome& o) { return o.CNp; }, false));
        rep.clauses.push_back(make("A1-iii", "far |eta| <= 1 - C_F", 1.0 - c.C_F,
                                   [](const PatternOutcome& o) { return o.a1iii; },
                                   [](const PatternOutcome& o) { return o.far1; }, false));
        rep.clauses.push_back(make("A1-iv", "||p|| <= C_B sqrt(s)", c.C_B,
                                   [](const PatternOutcome& o) { return o.a1iv; },
                                   [](const PatternOutcome& o) { return o.CB; }, false));
    }
    if (opt.derivative) {
        rep.clauses.push_back(make("A2-i", "near |eta - v_k sign d| <= c_N d^2", c.c_N,
                                   [](const PatternOutcome& o) { return o.a2i; },
                                   [](const PatternOutcome& o) { return o.cN; }, false));
        rep.clauses.push_back(make("A2-ii", "far |eta| <= c_F", c.c_F,
                                   [](const PatternOutcome& o) { return o.a2ii; },
                                   [](const PatternOutcome& o) { return o.far2; }, false));
        rep.clauses.push_back(make("A2-iii", "||q|| <= c_B sqrt(s)", c.c_B,
                                   [](const PatternOutcome& o) { return o.a2iii; },
                                   [](const PatternOutcome& o) { return o.cB; }, false));
    }
    for (const auto& o : outcomes) rep.coefficient_bounds_ok = rep.coefficient_bounds_ok && o.bounds_ok;
    for (const auto& cr : rep.clauses) {
        const bool interp = cr.name.rfind("A1", 0) == 0;
        if (!cr.pass) {
            (interp ? rep.pass_interpolating : rep.pass_derivative) = false;
            if (rep.first_failure.empty()) rep.first_failure = cr.name;
        }
    }
    rep.pass = rep.pass_interpolating && rep.pass_derivative;
    return rep;
}

TaylorReport taylor_check_certificate(const KernelContext& ctx, const CertificateCoeffs& cc,
                                      const std::vector<double>& support, double theta0, double theta,
                                      int scan_points) {
    TaylorReport rep;
    rep.distance = ctx.metric_distance(theta0, theta);
    const double c = (theta >= theta0 ? 1.0 : -1.0) * rep.distance;
    rep.residual = std::abs(eval_certificate(ctx, cc, support, theta, 0) -
                            eval_certificate(ctx, cc, support, theta0, 0) -
                            c * eval_certificate(ctx, cc, support, theta0, 1));
    for (int k = 0; k < scan_points; ++k) {
        const double t = theta0 + (theta - theta0) * k / static_cast<double>(std::max(1, scan_points - 1));
        rep.sup_second = std::max(rep.sup_second, std::abs(eval_certificate(ctx, cc, support, t, 2)));
    }
    rep.bound = 0.5 * rep.distance * rep.distance * rep.sup_second;
    rep.pass = rep.residual <= 1.05 * rep.bound + 1e-14;
    return rep;
}

}  // namespace offgrid
