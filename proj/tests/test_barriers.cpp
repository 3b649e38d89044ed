#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pucci/barriers.hpp"

using namespace pucci;
using namespace pucci::barriers;

namespace {

// closed-form profile evaluated through std::pow only, independent of the
// library's extended-precision path; lets the constant be varied
double profile(double C, double R, double alpha, double r) {
    return C * std::pow(R, alpha) * std::pow(R * R - r * r, -alpha);
}

// residual by central finite differences of the profile
double fd_residual(double C, double R, double alpha, double Lambda, double s,
                   int N, double r, double h) {
    const double u0 = profile(C, R, alpha, r);
    const double up = profile(C, R, alpha, r + h);
    const double um = profile(C, R, alpha, r - h);
    const double d2 = (up - 2.0 * u0 + um) / (h * h);
    const double lap =
        r == 0.0 ? N * d2 : d2 + (N - 1) * (up - um) / (2.0 * h) / r;
    return -Lambda * lap + std::pow(u0, s);
}

double fd_residual_min(double C, double R, double alpha, double Lambda,
                       double s, int N) {
    double m = 1e300;
    for (int k = 0; k <= 199; ++k)
        m = std::min(m, fd_residual(C, R, alpha, Lambda, s, N,
                                    0.995 * R * k / 199.0, 1e-6 * R));
    return m;
}

}  // namespace

TEST_CASE("sharp constants for reference parameter sets") {
    {
        const auto [alpha, C] = osserman_constant(ProblemParams(1.0, 2.0, 2, 3.0));
        CHECK(alpha == 1.0);
        CHECK(C == doctest::Approx(4.0).epsilon(1e-14));
    }
    {
        const auto [alpha, C] = osserman_constant(ProblemParams(1.0, 1.0, 3, 3.0));
        CHECK(alpha == 1.0);
        CHECK(C == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-14));
    }
    {
        const auto [alpha, C] = osserman_constant(ProblemParams(1.0, 1.0, 2, 2.0));
        CHECK(alpha == 2.0);
        CHECK(C == doctest::Approx(24.0).epsilon(1e-14));
    }
    {
        // N = 2(alpha+1): both arguments of the max coincide
        const auto [alpha, C] = osserman_constant(ProblemParams(1.0, 1.0, 3, 5.0));
        CHECK(alpha == 0.5);
        CHECK(C == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-14));
    }
}

TEST_CASE("profile identities and scaling") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    for (double R : {0.5, 1.0, 2.0, 7.0}) {
        const OssermanBarrier b(R, p);
        CHECK(b.value(0.0) ==
              doctest::Approx(b.C / std::pow(R, b.alpha)).epsilon(1e-14));
        for (double rho : {0.0, 0.3, 0.6, 0.9}) {
            // U(rho R; R) R^alpha depends on rho only
            const double lhs = b.value(rho * R) * std::pow(R, b.alpha);
            const double rhs = b.C * std::pow(1.0 - rho * rho, -b.alpha);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
        CHECK(b.value(-0.4 * R) == b.value(0.4 * R));
        CHECK_THROWS_AS(b.eval(R), std::domain_error);
        CHECK_THROWS_AS(b.eval(-R), std::domain_error);
        CHECK_THROWS_AS(b.eval(1.1 * R), std::domain_error);
    }

    const OssermanBarrier b1(1.0, p);
    for (double r : {0.0, 0.2, 0.5, 0.8, 0.99}) {
        const auto d = b1.eval(r);
        CHECK(d.U > 0.0);
        CHECK(d.dU >= 0.0);
        CHECK(d.d2U > 0.0);
    }
    // delta^alpha U(R - delta) -> C / 2^alpha at the boundary
    for (double delta : {1e-3, 1e-4, 1e-5}) {
        const double lim = std::pow(delta, b1.alpha) * b1.value(1.0 - delta) *
                           std::pow(2.0, b1.alpha) / b1.C;
        CHECK(std::abs(lim - 1.0) < 3.0 * delta);
    }
    CHECK_THROWS_AS(OssermanBarrier(0.0, p), std::invalid_argument);
}

TEST_CASE("residual agrees with a finite-difference evaluation") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    const OssermanBarrier b(1.0, p);
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double fd = fd_residual(b.C, b.R, b.alpha, p.Lambda, p.s, p.dim, r, 1e-5);
        const double lib = osserman_residual_at(b, r);
        const double scale = std::pow(b.value(r), p.s);
        CHECK(std::abs(lib - fd) < 1e-5 * scale);
    }
    // at the center the Laplacian collapses to N U''
    const double d2_fd =
        2.0 * (b.value(1e-4) - b.value(0.0)) / 1e-8;  // even profile
    const double at0 = std::pow(b.value(0.0), p.s) - p.Lambda * p.dim * d2_fd;
    CHECK(osserman_residual_at(b, 0.0) == doctest::Approx(at0).epsilon(1e-6));
    CHECK_THROWS_AS(osserman_residual_at(b, 1.0), std::domain_error);
}

TEST_CASE("the constant is sharp") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    const OssermanBarrier b(1.0, p);
    const double scale = std::pow(b.value(0.0), p.s);

    CHECK(osserman_residual_check(b, 1000) >= -1e-12 * scale);
    CHECK(fd_residual_min(b.C, 1.0, b.alpha, p.Lambda, p.s, p.dim) >=
          -1e-2 * scale);
    // one percent below the constant the inequality fails near the boundary
    CHECK(fd_residual_min(0.99 * b.C, 1.0, b.alpha, p.Lambda, p.s, p.dim) < -1.0);
    CHECK_THROWS_AS(osserman_residual_check(b, 50), std::invalid_argument);
}

TEST_CASE("residual is nonnegative across the parameter matrix") {
    for (double s : {1.5, 2.0, 3.0, 5.0}) {
        for (double Lambda : {1.0, 2.0, 5.0}) {
            for (int N : {2, 3}) {
                const ProblemParams p(1.0, Lambda, N, s);
                const OssermanBarrier b(1.0, p);
                const double chk = osserman_residual_check(b, 1000);
                CHECK(chk >= -1e-9 * std::pow(b.value(0.0), s));
            }
        }
    }
    // N = 2(alpha+1) makes the residual identically zero
    for (double Lambda : {1.0, 2.0, 5.0}) {
        const OssermanBarrier b(1.0, ProblemParams(1.0, Lambda, 3, 5.0));
        CHECK(std::abs(osserman_residual_check(b, 1000)) <
              1e-9 * std::pow(b.value(0.0), 5.0));
    }
}

TEST_CASE("barrier ignores the lower ellipticity bound") {
    const OssermanBarrier a(1.0, ProblemParams(1.0, 2.0, 2, 3.0));
    const OssermanBarrier b(1.0, ProblemParams(2.0, 2.0, 2, 3.0));
    CHECK(a.C == b.C);
    for (double r : {0.0, 0.4, 0.9}) CHECK(a.value(r) == b.value(r));
}

TEST_CASE("comparison verdicts") {
    const std::vector<double> u{0.0, 1.0, 2.0};
    const std::vector<double> below{0.5, 1.5, 2.5};
    const ComparisonVerdict ok = comparison_verdict(u, below, 1e-12);
    CHECK(ok.pass);
    CHECK(ok.max_excess <= -0.5);

    std::vector<double> pierced = below;
    pierced[1] = 0.9;
    const ComparisonVerdict bad = comparison_verdict(u, pierced, 1e-12);
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst_index == 1);
    CHECK(bad.max_excess == doctest::Approx(0.1).epsilon(1e-12));

    CHECK_THROWS_AS(comparison_verdict(u, std::vector<double>{1.0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("sampling matches pointwise evaluation") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    const OssermanBarrier b(3.0, p);

    const radial::RadialGrid rg = radial::make_radial_grid(
        2.0, 64, radial::Grading::uniform);
    const std::vector<double> sr = sample_barrier(b, rg);
    REQUIRE(sr.size() == rg.size());
    for (size_t i = 0; i < sr.size(); ++i)
        CHECK(sr[i] == b.value(rg.nodes[i]));

    const grid2d::CartesianGrid2 g =
        grid2d::make_grid(0.25, 2.0, grid2d::DirectionStencil::axes_only());
    const std::vector<double> s2 = sample_barrier(b, g);
    REQUIRE(static_cast<int>(s2.size()) == g.active_count());
    const auto [x, y] = g.coords(5);
    CHECK(s2[5] == b.value(std::hypot(x, y)));
}

TEST_CASE("interior bound saturates as boundary data grows") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    LocalBoundConfig cfg;
    // coarse grids inflate the first cell of the boundary layer; h must
    // resolve the largest datum for the cap to be visible
    cfg.h = 0.025;
    auto zero = [](double, double) { return 0.0; };

    const LocalBoundReport rep =
        local_bound_experiment(p, zero, 1.0, 2.0, {10.0, 1e3, 1e5}, cfg);
    REQUIRE(rep.sup_inner.size() == 3);
    CHECK(rep.sup_inner[0] <= rep.sup_inner[1] + 1e-10);
    CHECK(rep.sup_inner[1] <= rep.sup_inner[2] + 1e-10);

    // the envelope on the outer ball caps the inner sup: U(1; 2) = 8/3
    const OssermanBarrier cap(2.0, p);
    CHECK(cap.value(1.0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
    CHECK(rep.sup_inner.back() <= cap.value(1.0) + 0.05);
    // saturation: the two largest data values give nearly the same sup
    CHECK(std::abs(rep.sup_inner[2] - rep.sup_inner[1]) <=
          0.1 * rep.sup_inner[2]);
    CHECK(rep.f_norm == 0.0);
    CHECK(rep.ratio == doctest::Approx(rep.sup_inner[2]).epsilon(1e-12));

    CHECK_THROWS_AS(
        local_bound_experiment(p, zero, 2.0, 1.0, {10.0, 1e3, 1e5}, cfg),
        std::invalid_argument);
    CHECK_THROWS_AS(local_bound_experiment(p, zero, 1.0, 2.0, {10.0, 1e3}, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        local_bound_experiment(p, zero, 1.0, 2.0, {10.0, 20.0, 50.0}, cfg),
        std::invalid_argument);
    auto negf = [](double, double) { return -1.0; };
    CHECK_THROWS_AS(
        local_bound_experiment(p, negf, 1.0, 2.0, {10.0, 1e3, 1e5}, cfg),
        std::invalid_argument);
}
