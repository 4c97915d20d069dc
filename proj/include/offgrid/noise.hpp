#pragma once

#include "offgrid/kernel.hpp"
#include "offgrid/measure.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace offgrid {

/// Admissible noise models. `sigma` is the per-sample (or per-coefficient) standard deviation;
/// declared_sigma2() and declared_delta() give the constants of Var<f,w> <= sigma^2 Delta |f|^2.
struct NoiseModel {
    enum class Variant { iid, weighted_iid, correlated, series };
    enum class SeriesKind { truncated_white, brownian, custom };
    enum class CovarianceKind { equicorrelated, explicit_matrix };

    Variant variant = Variant::iid;
    double sigma = 0.0;
    // weighted_iid: the declared common weight Delta_T.
    double delta = 0.0;
    // correlated: Cov(G_i, G_j) = c sigma^2 / T off the diagonal, or an explicit matrix.
    CovarianceKind covariance = CovarianceKind::equicorrelated;
    double correlation = 0.0;
    Eigen::MatrixXd matrix;
    // series: w = sigma sum_k sqrt(xi_k) G_k psi_k with psi_k(t) = sqrt(2) sin((2k+1) pi t / 2).
    SeriesKind series_kind = SeriesKind::truncated_white;
    std::size_t basis_size = 0;
    double brownian_scale = 1.0;  // C_T
    std::vector<double> xi;       // custom weights (p_k xi_k with p = 1)
    std::uint64_t seed = 0;

    static NoiseModel iid(double sigma, std::uint64_t seed = 0);
    static NoiseModel weighted_iid(double sigma, double delta, std::uint64_t seed = 0);
    static NoiseModel equicorrelated(double sigma1, double c, std::uint64_t seed = 0);
    static NoiseModel correlated_matrix(double sigma1, Eigen::MatrixXd cov, std::uint64_t seed = 0);
    static NoiseModel truncated_white(double sigma, std::size_t terms, std::uint64_t seed = 0);
    static NoiseModel brownian(double C_T, std::size_t terms, std::uint64_t seed = 0);

    std::string name() const;
    /// Series weights xi_k (length basis_size).
    std::vector<double> series_weights() const;
    double declared_sigma2() const;
    double declared_delta(const GridMeasure& m) const;
};

/// Stream for replicate `index` derived from a master seed by a counter-based split.
std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index);

/// Precomputed sampler for one model on one measure (covariance roots, basis tables).
class NoiseSampler {
public:
    NoiseSampler(NoiseModel nm, MeasurePtr m);
    HilbertVector sample(std::mt19937_64& rng) const;
    const NoiseModel& model() const { return nm_; }
    const GridMeasure& measure() const { return *m_; }
    /// Analytic Var<f, w>_T under the model.
    double variance(const HilbertVector& f) const;

private:
    NoiseModel nm_;
    MeasurePtr m_;
    Eigen::MatrixXd root_;   // explicit covariance square root
    Eigen::MatrixXd basis_;  // series: T x K, scaled by sigma sqrt(xi_k)
};

HilbertVector sample(const NoiseModel& nm, MeasurePtr m, std::mt19937_64& rng);

struct VarianceCheck {
    double empirical = 0.0;
    double bound = 0.0;    // sigma^2 Delta |f|^2
    double ratio = 0.0;    // empirical / (sigma^2 Delta |f|^2) with the model sigma
    double allowance = 0.0;
    bool pass = false;
};

struct VarianceReport {
    std::vector<VarianceCheck> checks;
    std::size_t reps = 0;
    double sigma2 = 0.0, delta = 0.0;
    bool pass = false;
};

/// Empirical Var<f,w> versus sigma^2 Delta |f|^2 with a 99% one-sided chi-square allowance.
VarianceReport check_variance_bound(const NoiseModel& nm, MeasurePtr m,
                                    const std::vector<HilbertVector>& test_fns, std::size_t reps);

/// c (sigma |Theta|_d sqrt(Delta) / u v 1) exp(-u^2 / (4 sigma^2 Delta C1^2)), c = 2 C2 + 1.
double tail_bound(double C1, double C2, double sigma, double delta, double riemannian_length, double u);

/// (C1, C2) for M_i, i in {0, 1, 2}.
std::pair<double, double> tail_constants(int order, const LimitConstants& L);

struct ExceedanceReport {
    int order = 0;
    std::vector<double> u;
    std::vector<double> empirical;
    std::vector<double> std_error;
    std::vector<double> bound;  // clipped at 1
    std::vector<double> sup_samples;
    double C1 = 1.0, C2 = 1.0;
    double grid_step = 0.0;
    std::size_t grid_points = 0;
    std::size_t reps = 0;
    bool pass = false;  // empirical <= bound + 3 se everywhere
};

/// Monte Carlo P(M_i >= u), M_i = sup_theta |<w, phi^{[i]}(theta)>|, over a d-uniform grid with
/// step r/50 plus a parabolic refinement at the grid maximum.
ExceedanceReport empirical_sup_exceedance(const KernelContext& ctx, const NoiseModel& nm, int order,
                                          const std::vector<double>& u_grid, std::size_t reps,
                                          const LimitConstants& L, double r = 0.49);

}  // namespace offgrid
