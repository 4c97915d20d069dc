#pragma once

#include "offgrid/kernel.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace offgrid {

/// Kernel-derivative blocks on a support, Gamma^{[i,j]}_{kl} = K^{[i,j]}(theta_k, theta_l).
/// G20 and G12 are kept for the coherence functional.
struct GammaSystem {
    std::vector<double> support;
    Eigen::MatrixXd G00, G10, G11, G20, G12;

    std::size_t size() const { return support.size(); }
    /// Full 2s x 2s matrix [[G00, G10^T], [G10, G11]].
    Eigen::MatrixXd full() const;
};

GammaSystem build_gamma(const KernelContext& ctx, const std::vector<double>& support);

/// Max of the six l_inf operator norms (max absolute row sum).
double gamma_coherence(const GammaSystem& gs);
/// l_inf-induced operator norm.
double op_norm_inf(const Eigen::MatrixXd& M);

enum class CertificateKind { interpolating, derivative };
std::string to_string(CertificateKind k);

struct CertificateCoeffs {
    Eigen::VectorXd alpha, xi, v;
    CertificateKind kind = CertificateKind::interpolating;
    double coherence = 0.0;         // measured u on the support
    double norm_I_minus_G11 = 0.0;  // ||I - Gamma^{[1,1]}||_op
    double schur_norm = 0.0;        // ||I - S||_op for the Schur block S
};

/// Solves Gamma (alpha; xi) = (v; 0) (interpolating) or (0; v) (derivative) through the
/// Schur complement of Gamma^{[1,1]}.
CertificateCoeffs solve_certificate(const GammaSystem& gs, const Eigen::VectorXd& v, CertificateKind kind);

/// Bounds on (alpha, xi) implied by coherence u < 1/2. Returns true if they hold.
bool coefficient_bounds_hold(const CertificateCoeffs& cc, double u, double tol = 1e-12);

/// eta^{[order]}(theta) = sum_k alpha_k K^{[order,0]}(theta, theta_k) + xi_k K^{[order,1]}(theta, theta_k).
double eval_certificate(const KernelContext& ctx, const CertificateCoeffs& cc,
                        const std::vector<double>& support, double theta, int order);

/// ||p||_T from the Gamma quadratic form.
double certificate_norm(const GammaSystem& gs, const CertificateCoeffs& cc);
double certificate_norm(const KernelContext& ctx, const CertificateCoeffs& cc,
                        const std::vector<double>& support);

/// Explicit p = sum alpha_k phi_T(theta_k) + xi_k phi^{[1]}(theta_k) (discrete mode only).
HilbertVector assemble_certificate(const KernelContext& ctx, const CertificateCoeffs& cc,
                                   const std::vector<double>& support);

struct TheoreticalConstants {
    // Inputs.
    LimitConstants L;
    double r = 0.0, rho = 1.0, eps = 0.0, nu = 0.0, V_T = 0.0, u_inf = 0.0, rho_T = 1.0;
    int s = 1;
    // Interpolating certificate.
    double C_N = 0.0, C_Np = 0.0, C_F = 0.0, C_B = 2.0;
    // Derivative certificate.
    double c_N = 0.0, c_F = 0.0, c_B = 2.0;
    double H1 = 0.0, H2 = 0.0;
    double u_T_of_s = 0.0;
    // Hypothesis flags.
    bool radius_ok = false;         // 0 < r < 1/sqrt(2 L20)
    bool concavity_ok = false;      // eps, nu > 0
    bool separation_ok = false;     // 0 < u_inf < H2
    bool metric_ok = false;         // rho_T <= rho
    bool proximity_ok = false;      // V_T <= H1, (s-1) V_T <= H2 - u_inf
    bool derivative_hyp_ok = false; // V_T <= 1, (s-1) V_T + u_inf <= 1/6
    bool interpolating_hypotheses() const {
        return radius_ok && concavity_ok && separation_ok && metric_ok && proximity_ok;
    }
};

/// H^{(1)}(r, rho), H^{(2)}(r, rho) given eps_inf(r/rho) and nu_inf(rho r).
double H1_value(const LimitConstants& L, double eps, double nu);
double H2_value(const LimitConstants& L, double eps, double nu);

TheoreticalConstants theoretical_constants(const LimitConstants& L, double r, double rho, double eps,
                                           double nu, int s, double V_T, double u_inf,
                                           double rho_T = 1.0);

/// argmax over (0, 1/2] of r -> H^{(2)}(r, rho) for the gaussian limit (golden-section search).
double gaussian_optimal_radius(double rho, double sigma0 = 1.0);

/// Constants for the gaussian worked example: r*, eps/nu in closed form, u_inf = eta0 * H2.
TheoreticalConstants gaussian_worked_constants(double rho = 2.0, int s = 2, double V_T = 0.0,
                                               double eta0 = 0.9, double sigma0 = 1.0);

struct ClauseResult {
    std::string name;
    std::string description;
    double worst_margin = std::numeric_limits<double>::infinity();
    double measured = 0.0;  // measured constant or sup
    double bound = 0.0;     // theoretical constant
    bool pass = true;
};

struct VerificationReport {
    std::vector<double> support;
    double r = 0.0;
    std::size_t near_points_per_ball = 0;
    double far_step = 0.0;
    std::size_t far_points = 0;
    std::size_t patterns = 0;
    double coherence = 0.0;
    bool coefficient_bounds_ok = true;
    std::vector<ClauseResult> clauses;  // A1-i .. A1-iv, A2-i .. A2-iii
    bool pass_interpolating = true;
    bool pass_derivative = true;
    bool pass = true;
    std::string first_failure;

    const ClauseResult& clause(const std::string& name) const;
};

struct VerifyOptions {
    std::size_t near_points = 200;
    double far_step_factor = 50.0;  // far d-step = r / factor
    bool interpolating = true;
    bool derivative = true;
    double tolerance = 1e-9;
    std::size_t max_exhaustive_s = 10;
    std::size_t random_patterns = 64;
    unsigned long long seed = 12345;
};

VerificationReport verify_assumptions(const KernelContext& ctx, const std::vector<double>& support,
                                      double r, const TheoreticalConstants& constants,
                                      const VerifyOptions& opt = {});

/// Covariant Taylor residual of a certificate eta between theta0 and theta.
TaylorReport taylor_check_certificate(const KernelContext& ctx, const CertificateCoeffs& cc,
                                      const std::vector<double>& support, double theta0, double theta,
                                      int scan_points = 201);

}  // namespace offgrid
