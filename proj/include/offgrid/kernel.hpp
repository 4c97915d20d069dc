#pragma once

#include "offgrid/dictionary.hpp"
#include "offgrid/measure.hpp"
#include "offgrid/quadrature.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

namespace offgrid {

/// Per-theta precomputation: derivatives of g and the matrix A(theta) mapping raw
/// feature derivatives to covariant derivatives of the normalized feature,
///   D_i phi_T(theta) = sum_m A(i,m) d^m phi(theta).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Frame {
    double theta = 0.0;
    double g = 0.0, g_prime = 0.0, g_second = 0.0;
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    /// Raw derivative values on the grid (discrete mode only).
    std::array<std::vector<double>, 4> raw;
};

/// Constants of the limit kernel (sups of kernel derivatives and inf of g).
struct LimitConstants {
    double m_g = 0.0;
    double L00 = 0.0, L10 = 0.0, L11 = 0.0, L20 = 0.0, L21 = 0.0, L22 = 0.0, L3 = 0.0;

    /// Analytic values for the Gaussian translate family.
    static LimitConstants gaussian(double sigma0);
};

class KernelContext {
public:
    enum class Mode { discrete, limit };

    /// Finite-T kernel over a grid measure. `lo`, `hi` bound the compact window Theta_T.
    static KernelContext discrete(DictionarySpec d, MeasurePtr m, double lo, double hi,
                                  int probe_count = 33);
    /// Closed-form Lebesgue limit (gaussian_translate or exp_scale).
    static KernelContext limit(DictionarySpec d, double lo, double hi);

    Mode mode() const { return mode_; }
    bool is_limit() const { return mode_ == Mode::limit; }
    const DictionarySpec& dict() const { return dict_; }
    const MeasurePtr& measure() const { return measure_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    bool in_window(double theta) const { return theta >= lo_ && theta <= hi_; }
    double degeneracy_threshold() const { return g_threshold_; }

    Frame frame(double theta) const;
    std::vector<Frame> frames(const std::vector<double>& thetas) const;

    /// <d^a phi(theta), d^b phi(theta')> for a,b in 0..3.
    Eigen::Matrix4d raw_gram(const Frame& a, const Frame& b) const;
    /// K^{[i,j]}(theta, theta') for all i,j in 0..3.
    Eigen::Matrix4d kernel_block(const Frame& a, const Frame& b) const;

    double kernel_deriv(double theta, double theta2, int i, int j) const;
    double g(double theta) const { return frame(theta).g; }
    double g_prime(double theta) const { return frame(theta).g_prime; }

    /// phi^{[i]}(theta) as a grid vector (discrete mode only).
    HilbertVector covariant_feature(double theta, int i) const;
    /// Values of phi^{[i]} at the grid points from a frame (discrete mode only).
    std::vector<double> covariant_values(const Frame& f, int i) const;

    /// Row k holds phi^{[i]}(thetas[k]) on the grid (discrete mode only).
    RowMatrix covariant_matrix(const std::vector<Frame>& fr, int i) const;
    /// Table K^{[i,j]}(a_k, b_l). Discrete mode uses a weighted matrix product.
    Eigen::MatrixXd kernel_table(const std::vector<Frame>& a, const std::vector<Frame>& b, int i,
                                 int j) const;

    /// Riemannian coordinate G(theta) with G(lo) = 0 (spline or closed form).
    double coordinate(double theta) const;
    double from_coordinate(double G) const;
    double riemannian_length() const { return length_; }
    /// |G(theta) - G(theta')| through the coordinate spline.
    double fast_distance(double theta, double theta2) const {
        return std::abs(coordinate(theta) - coordinate(theta2));
    }
    /// |G(theta) - G(theta')| by adaptive Gauss-Legendre of sqrt(g) (closed form in the limit).
    double metric_distance(double theta, double theta2) const;
    /// Points of Theta_T uniform in the G-coordinate, spacing <= step, endpoints included.
    std::vector<double> uniform_grid(double step) const;

    /// Limit constants: analytic for the gaussian limit, numeric grid sups otherwise.
    LimitConstants limit_constants() const;

private:
    KernelContext() = default;
    void finish_frame(Frame& f, const Eigen::Matrix4d& self) const;
    Eigen::Matrix4d limit_raw(double theta, double theta2) const;
    void build_coordinate();

    Mode mode_ = Mode::limit;
    DictionarySpec dict_;
    MeasurePtr measure_;
    double lo_ = 0.0, hi_ = 0.0;
    double g_threshold_ = 0.0;
    double length_ = 0.0;
    MonotoneSpline G_;
};

/// Closed-form probabilists' polynomial: k^{(n)}(t) = P_n(t) exp(-t^2/2).
double gaussian_poly(int n, double t);

/// Estimate of 1 - sup{|K(theta,theta')| : d(theta,theta') >= r} over Theta_T^2.
struct SupSearch {
    double value = 0.0;
    double step = 0.0;      // d-step of the search grid
    std::size_t grid_points = 0;
    double theta = 0.0, theta2 = 0.0;  // location of the sup
    bool closed_form = false;
};

SupSearch epsilon_search(const KernelContext& ctx, double r);
SupSearch nu_search(const KernelContext& ctx, double r);
/// Closed form for the gaussian limit, grid search otherwise. Empty admissible set: +inf.
double epsilon(const KernelContext& ctx, double r);
double nu(const KernelContext& ctx, double r);

/// Gaussian limit closed forms.
double epsilon_gaussian_limit(double r);
double nu_gaussian_limit(double r);

struct LimitComparison {
    double V_T = 0.0;
    double rho_T = 1.0;
    double sup_kernel_diff = 0.0;  // max over i,j in 0..2
    double sup_h_diff = 0.0;
    std::size_t probes = 0;
};

LimitComparison limit_compare(const KernelContext& ctx_T, const KernelContext& ctx_inf,
                              const std::vector<double>& probe_grid);

struct TaylorReport {
    double residual = 0.0;
    double bound = 0.0;
    double distance = 0.0;
    double sup_second = 0.0;
    bool pass = false;
};

/// Covariant Taylor residual of phi_T between theta0 and theta, with sup |phi^{[2]}| on a grid scan.
TaylorReport taylor_check_feature(const KernelContext& ctx, double theta0, double theta,
                                  int scan_points = 201);

/// CSV rows "theta,theta2,i,j,value" for all pairs and i,j <= max_order.
void export_kernel_csv(const KernelContext& ctx, const std::vector<double>& thetas, int max_order,
                       std::ostream& os);

}  // namespace offgrid
