#include "offgrid/certificates.hpp"
#include "offgrid/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace offgrid;

namespace {
const KernelContext& limit_ctx() {
    static const KernelContext ctx = KernelContext::limit(DictionarySpec::gaussian(1.0), -12.0, 12.0);
    return ctx;
}
}  // namespace

TEST_CASE("gamma system carries the diagonal identities") {
    const auto gs = build_gamma(limit_ctx(), {-3.0, 0.5, 4.0});
    for (int k = 0; k < 3; ++k) {
        CHECK(gs.G00(k, k) == doctest::Approx(1.0));
        CHECK(gs.G11(k, k) == doctest::Approx(1.0));
        CHECK(std::abs(gs.G10(k, k)) < 1e-12);
    }
    CHECK((gs.full() - gs.full().transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(build_gamma(limit_ctx(), {1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(build_gamma(limit_ctx(), {20.0}), DomainError);
}

TEST_CASE("interpolating certificate interpolates signs with zero slope") {
    const std::vector<double> S = {-4.0, 0.0, 4.5};
    const auto gs = build_gamma(limit_ctx(), S);
    Eigen::VectorXd v(3);
    v << 1.0, -1.0, 1.0;
    const auto cc = solve_certificate(gs, v, CertificateKind::interpolating);
    for (int k = 0; k < 3; ++k) {
        CHECK(eval_certificate(limit_ctx(), cc, S, S[k], 0) == doctest::Approx(v(k)).epsilon(1e-12));
        CHECK(std::abs(eval_certificate(limit_ctx(), cc, S, S[k], 1)) < 1e-12);
    }
    CHECK(coefficient_bounds_hold(cc, cc.coherence));
    CHECK(certificate_norm(gs, cc) == doctest::Approx(certificate_norm(limit_ctx(), cc, S)).epsilon(1e-12));
}

TEST_CASE("derivative certificate vanishes on the support with prescribed slope") {
    const std::vector<double> S = {-4.0, 0.0, 4.5};
    const auto gs = build_gamma(limit_ctx(), S);
    Eigen::VectorXd v(3);
    v << -1.0, 1.0, 1.0;
    const auto cc = solve_certificate(gs, v, CertificateKind::derivative);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(eval_certificate(limit_ctx(), cc, S, S[k], 0)) < 1e-12);
        CHECK(eval_certificate(limit_ctx(), cc, S, S[k], 1) == doctest::Approx(v(k)).epsilon(1e-12));
    }
    CHECK(coefficient_bounds_hold(cc, cc.coherence));
}

TEST_CASE("explicit certificate vector matches the quadratic-form norm") {
    const auto ctx = KernelContext::discrete(DictionarySpec::gaussian(1.0), GridMeasure::regular(-10, 10, 1024), -7, 7);
    const std::vector<double> S = {-3.0, 3.0};
    const auto gs = build_gamma(ctx, S);
    Eigen::VectorXd v(2);
    v << 1.0, -1.0;
    const auto cc = solve_certificate(gs, v, CertificateKind::interpolating);
    const HilbertVector p = assemble_certificate(ctx, cc, S);
    CHECK(norm(p, *ctx.measure()) == doctest::Approx(certificate_norm(gs, cc)).epsilon(1e-10));
    // eta(theta) = <phi_T(theta), p>.
    const double th = 1.1;
    CHECK(inner(ctx.covariant_feature(th, 0), p, *ctx.measure()) ==
          doctest::Approx(eval_certificate(ctx, cc, S, th, 0)).epsilon(1e-10));
}

TEST_CASE("nearly coincident atoms are ill-conditioned") {
    const std::vector<double> S = {0.0, 1e-4};
    const auto gs = build_gamma(limit_ctx(), S);
    Eigen::VectorXd v(2);
    v << 1.0, 1.0;
    CHECK_THROWS_AS(solve_certificate(gs, v, CertificateKind::interpolating), ConditioningError);
}

TEST_CASE("worked gaussian constants") {
    const auto c = gaussian_worked_constants();
    CHECK(c.r == doctest::Approx(0.4852).epsilon(1e-3));
    CHECK(c.H2 == doctest::Approx(3.73e-3).epsilon(1e-2));
    CHECK(c.H1 == doctest::Approx(2.9e-3).epsilon(4e-2));
    CHECK(c.C_N == doctest::Approx(2.05e-4).epsilon(1e-2));
    CHECK(c.c_N == doctest::Approx(1.8626).epsilon(1e-4));
    CHECK(c.c_F == doctest::Approx(1.25 * std::exp(-0.5) + 1.75).epsilon(1e-12));
    CHECK(c.u_inf == doctest::Approx(0.9 * c.H2));
    CHECK(c.interpolating_hypotheses());
    CHECK(c.derivative_hyp_ok);
    // The optimal radius maximizes H2.
    const auto L = LimitConstants::gaussian(1.0);
    auto H2 = [&](double r) { return H2_value(L, epsilon_gaussian_limit(r / 2), nu_gaussian_limit(2 * r)); };
    CHECK(H2(c.r) >= H2(c.r - 0.01));
    CHECK(H2(c.r) >= H2(c.r + 0.01));
}

TEST_CASE("hypothesis flags follow their definitions") {
    const auto L = LimitConstants::gaussian(1.0);
    const auto bad_r = theoretical_constants(L, 0.8, 2.0, 0.01, 0.01, 2, 0.0, 1e-4);
    CHECK_FALSE(bad_r.radius_ok);
    const auto ok = gaussian_worked_constants(2.0, 3, 1e-4);
    CHECK(ok.u_T_of_s == doctest::Approx(ok.u_inf + 2e-4));
    const auto far = gaussian_worked_constants(2.0, 2, 0.5);
    CHECK_FALSE(far.proximity_ok);
}

TEST_CASE("assumption verification passes on a well separated support") {
    const auto c = gaussian_worked_constants();
    const auto S = std::vector<double>{-6.5, 6.5};  // d-gap 13/sqrt(2) ~ 9.2
    const auto rep = verify_assumptions(limit_ctx(), S, c.r, c);
    CHECK(rep.pass);
    CHECK(rep.patterns == 4);
    CHECK(rep.coefficient_bounds_ok);
    CHECK(rep.clauses.size() == 7);
    CHECK(rep.clause("A1-iii").pass);
    CHECK_THROWS_AS(verify_assumptions(limit_ctx(), {0.0, 0.5}, c.r, c), DomainError);
}

TEST_CASE("certificate Taylor residual is bounded") {
    const std::vector<double> S = {-4.0, 4.0};
    const auto gs = build_gamma(limit_ctx(), S);
    Eigen::VectorXd v(2);
    v << 1.0, -1.0;
    const auto cc = solve_certificate(gs, v, CertificateKind::interpolating);
    const auto rep = taylor_check_certificate(limit_ctx(), cc, S, -4.0, -3.7);
    CHECK(rep.pass);
}
