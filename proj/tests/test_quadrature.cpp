#include "offgrid/errors.hpp"
#include "offgrid/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace offgrid;

TEST_CASE("15-point rule integrates polynomials of degree 29 exactly") {
    const double v = gauss_legendre15([](double x) { return std::pow(x, 28) + x * x * x; }, -1.0, 1.0);
    CHECK(v == doctest::Approx(2.0 / 29.0).epsilon(1e-13));
}

TEST_CASE("adaptive rule converges on peaked integrands") {
    const auto r = adaptive_gauss_legendre([](double x) { return std::exp(-x * x / 2.0); }, -30.0, 30.0, 1e-12);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
    const auto s = adaptive_gauss_legendre([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-10);
    CHECK(s.value == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("adaptive rule reports failure with diagnostics") {
    CHECK_THROWS_AS(adaptive_gauss_legendre([](double x) { return 1.0 / x; }, -1.0, 1.0, 1e-14, 6), NumericError);
}

TEST_CASE("monotone spline interpolates and inverts") {
    std::vector<double> x, y, dy;
    for (int k = 0; k <= 40; ++k) {
        const double t = k * 0.1;
        x.push_back(t);
        y.push_back(t + std::sin(t) * 0.5);
        dy.push_back(1.0 + 0.5 * std::cos(t));
    }
    const MonotoneSpline s(x, y, dy);
    for (double t : {0.0, 0.33, 1.71, 3.99}) {
        CHECK(s(t) == doctest::Approx(t + 0.5 * std::sin(t)).epsilon(1e-5));
        CHECK(s.inverse(s(t)) == doctest::Approx(t).epsilon(1e-10));
    }
    double prev = s(0.0);
    for (int k = 1; k <= 400; ++k) {
        const double v = s(k * 0.01);
        CHECK(v >= prev);
        prev = v;
    }
}
