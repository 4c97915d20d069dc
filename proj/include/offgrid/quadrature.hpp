#pragma once

#include <functional>
#include <vector>

namespace offgrid {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Adaptive Gauss-Legendre: each panel is compared with its two halves and split until
/// the difference is below the (panel-scaled) absolute tolerance.
QuadratureResult adaptive_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                         double abs_tol = 1e-9, int max_depth = 40);

/// Fixed 15-point Gauss-Legendre rule on [a,b].
double gauss_legendre15(const std::function<double(double)>& f, double a, double b);

/// Monotone piecewise-cubic Hermite interpolant of an increasing function given nodes,
/// values and nonnegative derivatives (slopes limited with Fritsch-Carlson).
class MonotoneSpline {
public:
    MonotoneSpline() = default;
    MonotoneSpline(std::vector<double> x, std::vector<double> y, std::vector<double> dy);

    double operator()(double x) const;
    /// Inverse on [y.front(), y.back()] by safeguarded Newton.
    double inverse(double y) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    double y_min() const { return y_.front(); }
    double y_max() const { return y_.back(); }
    bool empty() const { return x_.empty(); }

private:
    std::size_t segment(double x) const;
    std::vector<double> x_, y_, d_;
};

}  // namespace offgrid
