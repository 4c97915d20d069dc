#include "offgrid/errors.hpp"
#include "offgrid/measure.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace offgrid;

TEST_CASE("regular grid has equal weights and the right points") {
    const auto m = GridMeasure::regular(-2.0, 2.0, 8);
    CHECK(m->size() == 8);
    CHECK(m->uniform_weights());
    CHECK(m->max_weight() == doctest::Approx(0.5));
    CHECK(m->total_mass() == doctest::Approx(4.0));
    CHECK(m->points().front() == doctest::Approx(-1.5));
    CHECK(m->points().back() == doctest::Approx(2.0));
}

TEST_CASE("probability measure weights sum to one") {
    const auto m = GridMeasure::probability({0.1, 0.4, 0.9, 1.3});
    CHECK(m->total_mass() == doctest::Approx(1.0));
    CHECK(m->max_weight() == doctest::Approx(0.25));
}

TEST_CASE("invalid measures are rejected") {
    CHECK_THROWS_AS(GridMeasure({0.0, 0.0}, {1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(GridMeasure({0.0, 1.0}, {1.0, -1.0}), DomainError);
    CHECK_THROWS_AS(GridMeasure({0.0, 1.0}, {1.0}), AlignmentError);
    CHECK_THROWS_AS(GridMeasure::regular(1.0, 0.0, 4), DomainError);
}

TEST_CASE("inner product is bilinear, symmetric and matches the weighted sum") {
    const auto m = GridMeasure::regular(0.0, 1.0, 257);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    std::vector<double> a(m->size()), b(m->size()), c(m->size());
    for (std::size_t j = 0; j < m->size(); ++j) a[j] = N(rng), b[j] = N(rng), c[j] = N(rng);
    const HilbertVector f(*m, a), g(*m, b), h(*m, c);
    double direct = 0.0;
    for (std::size_t j = 0; j < m->size(); ++j) direct += m->weights()[j] * a[j] * b[j];
    CHECK(inner(f, g, *m) == doctest::Approx(direct).epsilon(1e-13));
    CHECK(inner(f, g, *m) == doctest::Approx(inner(g, f, *m)).epsilon(1e-15));
    CHECK(inner(2.0 * f + h, g, *m) ==
          doctest::Approx(2.0 * inner(f, g, *m) + inner(h, g, *m)).epsilon(1e-12));
    CHECK(norm(f, *m) * norm(g, *m) >= std::abs(inner(f, g, *m)));
}

TEST_CASE("vectors on different measures do not mix") {
    const auto m1 = GridMeasure::regular(0.0, 1.0, 4);
    const auto m2 = GridMeasure::regular(0.0, 1.0, 4);
    const HilbertVector f(*m1), g(*m2);
    CHECK_THROWS_AS(inner(f, g, *m1), AlignmentError);
    HilbertVector h(*m1);
    CHECK_THROWS_AS(h += g, AlignmentError);
}

TEST_CASE("compensated sum recovers cancellation") {
    CompensatedSum s;
    s.add(1e16);
    s.add(1.0);
    s.add(-1e16);
    CHECK(s.value() == 1.0);
}

TEST_CASE("table round trip") {
    const auto m = GridMeasure::regular(-1.0, 3.0, 5);
    std::stringstream ss;
    m->write_table(ss);
    const auto back = GridMeasure::read_table(ss);
    REQUIRE(back->size() == m->size());
    for (std::size_t j = 0; j < m->size(); ++j) {
        CHECK(back->points()[j] == doctest::Approx(m->points()[j]).epsilon(1e-15));
        CHECK(back->weights()[j] == doctest::Approx(m->weights()[j]).epsilon(1e-15));
    }
}
