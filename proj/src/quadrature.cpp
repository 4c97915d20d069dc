#include "offgrid/quadrature.hpp"

#include "offgrid/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace offgrid {

namespace {

constexpr std::array<double, 8> gl15_x = {
    0.0000000000000000, 0.2011940939974345, 0.3941513470775634, 0.5709721726085388,
    0.7244177313601701, 0.8482065834104272, 0.9372733924007060, 0.9879925180204854};
constexpr std::array<double, 8> gl15_w = {
    0.2025782419255613, 0.1984314853271116, 0.1861610000155622, 0.1662692058169939,
    0.1395706779261543, 0.1071592204671719, 0.0703660474881081, 0.0307532419961173};

struct Panel {
    double a, b, whole;
    int depth;
};

}  // namespace

double gauss_legendre15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = gl15_w[0] * f(c);
    for (std::size_t k = 1; k < gl15_x.size(); ++k)
        s += gl15_w[k] * (f(c - h * gl15_x[k]) + f(c + h * gl15_x[k]));
    return s * h;
}

QuadratureResult adaptive_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                         double abs_tol, int max_depth) {
    QuadratureResult res;
    if (a == b) {
        res.converged = true;
        return res;
    }
    const double sign = b > a ? 1.0 : -1.0;
    if (b < a) std::swap(a, b);
    const double length = b - a;
    std::vector<Panel> stack{{a, b, gauss_legendre15(f, a, b), 0}};
    res.evaluations = 15;
    res.converged = true;
    while (!stack.empty()) {
        const Panel p = stack.back();
        stack.pop_back();
        const double m = 0.5 * (p.a + p.b);
        const double left = gauss_legendre15(f, p.a, m);
        const double right = gauss_legendre15(f, m, p.b);
        res.evaluations += 30;
        const double err = std::abs(left + right - p.whole);
        const double local_tol = abs_tol * (p.b - p.a) / length;
        if (err <= local_tol || p.depth >= max_depth) {
            if (err > local_tol) res.converged = false;
            res.value += left + right;
            res.error_estimate += err;
            continue;
        }
        stack.push_back({p.a, m, left, p.depth + 1});
        stack.push_back({m, p.b, right, p.depth + 1});
    }
    res.value *= sign;
    if (!res.converged || !std::isfinite(res.value)) {
        std::ostringstream msg;
        msg << "adaptive Gauss-Legendre did not converge on [" << a << ", " << b
            << "]: error estimate " << res.error_estimate << ", evaluations " << res.evaluations;
        throw NumericError(msg.str());
    }
    return res;
}

MonotoneSpline::MonotoneSpline(std::vector<double> x, std::vector<double> y, std::vector<double> dy)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(dy)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n || d_.size() != n)
        throw DomainError("MonotoneSpline: need >= 2 nodes with matching values");
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double h = x_[k + 1] - x_[k];
        const double delta = (y_[k + 1] - y_[k]) / h;
        if (delta <= 0.0) {
            d_[k] = d_[k + 1] = 0.0;
            continue;
        }
        const double a = d_[k] / delta, b = d_[k + 1] / delta;
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double tau = 3.0 / std::sqrt(s);
            d_[k] = tau * a * delta;
            d_[k + 1] = tau * b * delta;
        }
    }
}

std::size_t MonotoneSpline::segment(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(k, x_.size() - 2);
}

double MonotoneSpline::operator()(double x) const {
    const std::size_t k = segment(x);
    const double h = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] +
           (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * d_[k + 1];
}

double MonotoneSpline::inverse(double y) const {
    if (y <= y_.front()) return x_.front();
    if (y >= y_.back()) return x_.back();
    auto it = std::upper_bound(y_.begin(), y_.end(), y);
    const std::size_t k = std::min(static_cast<std::size_t>(it - y_.begin()) - 1, x_.size() - 2);
    double lo = x_[k], hi = x_[k + 1];
    double x = lo + (hi - lo) * (y - y_[k]) / (y_[k + 1] - y_[k]);
    for (int it_n = 0; it_n < 100; ++it_n) {
        const double fx = (*this)(x) - y;
        if (fx > 0) hi = x; else lo = x;
        if (std::abs(fx) < 1e-15 * (1.0 + std::abs(y)) || hi - lo < 1e-15 * (1.0 + std::abs(x))) break;
        // Derivative of the Hermite cubic.
        const double h = x_[k + 1] - x_[k];
        const double t = (x - x_[k]) / h;
        const double dp = ((6 * t * t - 6 * t) * y_[k] + (3 * t * t - 4 * t + 1) * h * d_[k] +
                           (-6 * t * t + 6 * t) * y_[k + 1] + (3 * t * t - 2 * t) * h * d_[k + 1]) / h;
        double xn = dp > 0 ? x - fx / dp : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        x = xn;
    }
    return x;
}

}  // namespace offgrid
