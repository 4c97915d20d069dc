#include "offgrid/errors.hpp"
#include "offgrid/kernel.hpp"
#include "offgrid/noise.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace offgrid;

namespace {
std::vector<HilbertVector> test_functions(const GridMeasure& m) {
    std::vector<HilbertVector> out;
    std::vector<double> a(m.size()), b(m.size()), c(m.size(), 1.0);
    for (std::size_t j = 0; j < m.size(); ++j) {
        const double t = m.points()[j];
        a[j] = std::exp(-t * t);
        b[j] = std::sin(3.0 * t);
    }
    out.emplace_back(m, a);
    out.emplace_back(m, b);
    out.emplace_back(m, c);
    return out;
}
}  // namespace

TEST_CASE("iid noise attains the variance bound") {
    const auto m = GridMeasure::regular(-3.0, 3.0, 128);
    const auto nm = NoiseModel::iid(0.7, 42);
    const auto rep = check_variance_bound(nm, m, test_functions(*m), 4000);
    CHECK(rep.pass);
    CHECK(rep.delta == doctest::Approx(m->max_weight()));
    for (const auto& c : rep.checks) CHECK(c.ratio == doctest::Approx(1.0).epsilon(0.1));
    const NoiseSampler sm(nm, m);
    const auto f = test_functions(*m)[0];
    CHECK(sm.variance(f) == doctest::Approx(0.49 * m->max_weight() * inner(f, f, *m)));
}

TEST_CASE("equicorrelated noise: analytic variance and the factor-two allowance") {
    const auto m = GridMeasure::regular(0.0, 1.0, 64);
    const auto nm = NoiseModel::equicorrelated(1.0, 0.9, 7);
    CHECK(nm.declared_sigma2() == doctest::Approx(2.0));
    const NoiseSampler sm(nm, m);
    const auto fns = test_functions(*m);
    for (const auto& f : fns) {
        // Direct sum over the covariance matrix.
        double v = 0.0;
        const double T = m->size();
        for (std::size_t i = 0; i < m->size(); ++i)
            for (std::size_t j = 0; j < m->size(); ++j) {
                const double cov = i == j ? 1.0 : 0.9 / T;
                v += m->weights()[i] * f[i] * m->weights()[j] * f[j] * cov;
            }
        CHECK(sm.variance(f) == doctest::Approx(v).epsilon(1e-12));
        CHECK(sm.variance(f) <= nm.declared_sigma2() * nm.declared_delta(*m) * inner(f, f, *m));
    }
    const auto rep = check_variance_bound(nm, m, fns, 4000);
    CHECK(rep.pass);
    for (const auto& c : rep.checks) CHECK(c.ratio <= 2.0 * (1.0 + c.allowance));
}

TEST_CASE("explicit covariance matrices are validated") {
    const auto m = GridMeasure::regular(0.0, 1.0, 4);
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(4, 4);
    C(0, 1) = C(1, 0) = 0.2;
    CHECK_NOTHROW(NoiseSampler(NoiseModel::correlated_matrix(1.0, C), m));
    C(0, 1) = C(1, 0) = 0.3;  // > sigma^2 / T
    CHECK_THROWS_AS(NoiseSampler(NoiseModel::correlated_matrix(1.0, C), m), ModelError);
    Eigen::MatrixXd N = Eigen::MatrixXd::Identity(4, 4) * 0.1;
    N(0, 1) = N(1, 0) = 0.25;
    CHECK_THROWS_AS(NoiseSampler(NoiseModel::correlated_matrix(1.0, N), m), ModelError);
    CHECK_THROWS_AS(NoiseSampler(NoiseModel::weighted_iid(1.0, 0.3), m), ModelError);
}

TEST_CASE("Brownian series reproduces the min(s,t) covariance") {
    const auto m = GridMeasure::regular(0.0, 1.0, 50);
    const double C = 1.3;
    const auto nm = NoiseModel::brownian(C, 4000, 3);
    CHECK(nm.declared_delta(*m) == doctest::Approx(4.0 * C * C / (std::numbers::pi * std::numbers::pi)));
    const NoiseSampler sm(nm, m);
    const auto f = test_functions(*m)[1];
    double v = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i)
        for (std::size_t j = 0; j < m->size(); ++j)
            v += m->weights()[i] * f[i] * m->weights()[j] * f[j] * C * C *
                 std::min(m->points()[i], m->points()[j]);
    CHECK(sm.variance(f) == doctest::Approx(v).epsilon(1e-3));
    CHECK(sm.variance(f) <= nm.declared_delta(*m) * inner(f, f, *m));
}

TEST_CASE("truncated white noise has Delta = 1") {
    const auto m = GridMeasure::regular(0.0, 1.0, 200);
    const auto nm = NoiseModel::truncated_white(0.5, 30, 9);
    CHECK(nm.declared_delta(*m) == 1.0);
    const auto rep = check_variance_bound(nm, m, test_functions(*m), 2000);
    CHECK(rep.pass);
    const auto bad = GridMeasure::regular(-1.0, 1.0, 10);
    CHECK_THROWS_AS(NoiseSampler(nm, bad), ModelError);
}

TEST_CASE("replicate streams are deterministic and distinct") {
    auto a = replicate_rng(5, 0), b = replicate_rng(5, 0), c = replicate_rng(5, 1);
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    CHECK(x != z);
    const auto m = GridMeasure::regular(0.0, 1.0, 16);
    auto r1 = replicate_rng(1, 2), r2 = replicate_rng(1, 2);
    CHECK(sample(NoiseModel::iid(1.0), m, r1).values() == sample(NoiseModel::iid(1.0), m, r2).values());
}

TEST_CASE("tail bound shape and constants") {
    const auto L = LimitConstants::gaussian(1.0);
    CHECK(tail_constants(0, L) == std::pair<double, double>{1.0, 1.0});
    CHECK(tail_constants(2, L).first == doctest::Approx(std::sqrt(6.0)));
    CHECK(tail_constants(2, L).second == doctest::Approx(std::sqrt(30.0)));
    double prev = 1e300;
    for (double u = 0.25; u < 2.0; u += 0.25) {
        const double b = tail_bound(1.0, 1.0, 1.0, 0.05, 10.0, u);
        CHECK(b < prev);
        prev = b;
    }
    CHECK_THROWS_AS(tail_constants(3, L), DomainError);
}

TEST_CASE("sup exceedance stays under the tail bound") {
    const auto m = GridMeasure::regular(-6.0, 6.0, 256);
    const auto ctx = KernelContext::discrete(DictionarySpec::gaussian(1.0), m, -4.0, 4.0);
    const auto nm = NoiseModel::iid(1.0, 17);
    const double s = std::sqrt(m->max_weight());
    std::vector<double> u;
    for (int k = 0; k < 10; ++k) u.push_back(s * (0.5 + 0.5 * k));
    const auto rep = empirical_sup_exceedance(ctx, nm, 0, u, 500, LimitConstants::gaussian(1.0));
    CHECK(rep.pass);
    CHECK(rep.sup_samples.size() == 500);
    for (std::size_t k = 1; k < rep.empirical.size(); ++k) CHECK(rep.empirical[k] <= rep.empirical[k - 1]);
}
