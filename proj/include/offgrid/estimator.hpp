#pragma once

#include "offgrid/kernel.hpp"
#include "offgrid/measure.hpp"

#include <optional>
#include <string>
#include <vector>

namespace offgrid {

struct Truth {
    std::vector<double> beta;
    std::vector<double> theta;
};

struct Observation {
    HilbertVector y;
    MeasurePtr measure;
    std::optional<Truth> truth;
    double sigma = 0.0;
    double delta = 0.0;

    /// Throws AlignmentError / DomainError when the pieces disagree.
    void validate() const;
};

struct SolverConfig {
    double kappa = 0.0;
    std::size_t max_atoms = 32;
    double coarse_step = 0.1;       // d-step of the insertion grid
    double gradient_tol = 1e-8;     // Newton insertion and joint refinement
    int max_newton = 50;
    double prune_threshold = 1e-10;
    int max_outer = 100;
    double stop_slack = 1e-6;       // relative to kappa
    double merge_distance = 1e-3;   // in d units
    double kkt_tol = 1e-12;         // lasso coordinate descent
    int max_sweeps = 100000;
    int max_refine = 500;

    void validate() const;
    /// 4 s when the truth is known, else 32.
    static std::size_t default_cap(const Observation& obs);
};

struct Estimate {
    std::vector<double> beta;
    std::vector<double> theta;
    int iterations = 0;
    double max_correlation = 0.0;
    double objective = 0.0;
    double kappa = 0.0;
    bool converged = false;
    /// Objective after each outer iteration (non-increasing).
    std::vector<double> objective_trace;
};

struct ErrorDecomposition {
    double prediction_error = 0.0;
    double I0 = 0.0, I1 = 0.0, I2 = 0.0, I3 = 0.0;
    double l1_diff = 0.0;
    double r = 0.0;
    /// assignment[l] = index of the true atom whose ball holds atom l, or -1 (far region).
    std::vector<int> assignment;
};

/// C1 sigma sqrt(Delta_T log tau).
double tuning_kappa(double sigma, double delta, double tau, double C1);

struct LassoResult {
    std::vector<double> beta;
    int sweeps = 0;
    double duality_gap = 0.0;
    double kkt_residual = 0.0;
};

/// argmin_b 1/2 |y - sum b_k phi_T(theta_k)|^2 + kappa |b|_1 by coordinate descent.
/// `gram` is K_T(theta_k, theta_l), `corr` is <phi_T(theta_k), y>, `y_norm2` is |y|^2.
LassoResult lasso_amplitudes(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double y_norm2,
                             double kappa, double tol = 1e-12, int max_sweeps = 100000,
                             const std::vector<double>& warm = {});
LassoResult lasso_amplitudes(const KernelContext& ctx, const std::vector<double>& theta,
                             const HilbertVector& y, double kappa);

/// Reusable solver state: the insertion grid and its feature table depend only on the context.
class Solver {
public:
    explicit Solver(const KernelContext& ctx, double coarse_step = 0.1);
    Estimate fit(const Observation& obs, const SolverConfig& cfg) const;
    const KernelContext& context() const { return ctx_; }

private:
    const KernelContext& ctx_;
    double step_;
    std::vector<double> grid_;
    RowMatrix table_;
};

Estimate fit(const KernelContext& ctx, const Observation& obs, const SolverConfig& cfg);

/// sum_k beta_k phi_T(theta_k) on the grid.
HilbertVector mixture(const KernelContext& ctx, const std::vector<double>& beta,
                      const std::vector<double>& theta);

/// 1/2 |y - mixture|^2 + kappa |beta|_1.
double objective(const KernelContext& ctx, const Estimate& est, const HilbertVector& y, double kappa);

double prediction_error(const KernelContext& ctx, const Estimate& est, const Observation& obs);

ErrorDecomposition error_decomposition(const KernelContext& ctx, const Estimate& est,
                                       const Observation& obs, double r);

std::string to_json(const Estimate& est, int indent = 2);
std::string to_json(const ErrorDecomposition& e, int indent = 2);

}  // namespace offgrid
