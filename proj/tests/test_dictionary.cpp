#include "offgrid/dictionary.hpp"
#include "offgrid/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace offgrid;

namespace {
// Five-point central difference of theta -> feature_value(d, theta, t, i).
double fd(const DictionarySpec& d, double theta, double t, int i, double h) {
    auto f = [&](double th) { return feature_value(d, th, t, i); };
    return (-f(theta + 2 * h) + 8 * f(theta + h) - 8 * f(theta - h) + f(theta - 2 * h)) / (12 * h);
}
}  // namespace

TEST_CASE("theta-derivatives match finite differences for every family") {
    const DictionarySpec specs[] = {DictionarySpec::gaussian(0.7), DictionarySpec::cauchy(1.3),
                                    DictionarySpec::sinc(0.9), DictionarySpec::exp_scale(0.0)};
    const double ts[] = {-1.7, -0.2, 0.0, 0.05, 0.6, 2.4};
    for (const auto& d : specs) {
        const double theta = d.family == Family::exp_scale ? 1.3 : 0.31;
        for (double t : ts) {
            const double tt = d.family == Family::exp_scale ? std::abs(t) : t;
            for (int i = 0; i < 3; ++i) {
                const double exact = feature_value(d, theta, tt, i + 1);
                CHECK(exact == doctest::Approx(fd(d, theta, tt, i, 1e-3)).epsilon(1e-7).scale(1.0));
            }
        }
    }
}

TEST_CASE("sinc is smooth across the series switch") {
    for (int i = 0; i <= 3; ++i) {
        const double y = 1.0 / 3.14159265358979323846;
        const double a = profile_deriv(Family::sinc_translate, y * (1.0 - 1e-12), i);
        const double b = profile_deriv(Family::sinc_translate, y * (1.0 + 1e-12), i);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
    CHECK(profile_deriv(Family::sinc_translate, 0.0, 0) == doctest::Approx(1.0));
    CHECK(profile_deriv(Family::sinc_translate, 0.0, 1) == doctest::Approx(0.0));
}

TEST_CASE("feature_derivs fills all orders consistently") {
    const auto d = DictionarySpec::gaussian(1.0);
    const std::vector<double> t = {-1.0, 0.0, 0.5, 2.0};
    std::array<std::vector<double>, 4> out;
    feature_derivs(d, 0.2, t, out);
    for (int i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < t.size(); ++j)
            CHECK(out[i][j] == doctest::Approx(feature_value(d, 0.2, t[j], i)).epsilon(1e-14));
}

TEST_CASE("family names and rejected kernels") {
    CHECK(family_from_string("gaussian") == Family::gaussian_translate);
    CHECK(family_from_string(to_string(Family::exp_scale)) == Family::exp_scale);
    CHECK_THROWS_AS(family_from_string("laplace"), ConfigError);
    CHECK_THROWS_AS(family_from_string("nope"), ConfigError);
    CHECK_THROWS_AS(DictionarySpec::gaussian(0.0).validate(), DomainError);
    CHECK_THROWS_AS(feature_value(DictionarySpec::exp_scale(0.0), -1.0, 0.5, 0), DomainError);
}

TEST_CASE("regularity check passes for a gaussian on a fine grid and fails off the data") {
    const auto m = GridMeasure::regular(-6.0, 6.0, 512);
    const auto ok = check_regularity(DictionarySpec::gaussian(1.0), *m, {-2.0, 0.0, 3.0});
    CHECK(ok.pass);
    for (const auto& p : ok.probes) CHECK(p.normalized_gram_det > 0.5);
    // A feature centred far outside the grid has numerically zero norm.
    const auto bad = check_regularity(DictionarySpec::gaussian(0.1), *m, {100.0});
    CHECK_FALSE(bad.pass);
}
