#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pucci/core.hpp"

using namespace pucci;

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ProblemParams(0.0, 1.0, 2, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(ProblemParams(2.0, 1.0, 2, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(ProblemParams(1.0, 2.0, 0, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(ProblemParams(1.0, 2.0, 2, 1.0), std::invalid_argument);
    const ProblemParams p(1.0, 2.0, 3, 2.0);
    CHECK(p.n_plus() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(p.n_minus() == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("branch coefficient") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    CHECK(theta(1.0, p) == 2.0);
    CHECK(theta(-0.5, p) == 1.0);
    CHECK(theta(0.0, p) == 2.0);
}

TEST_CASE("extremal operators on eigenvalue lists") {
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    const std::array<double, 2> e{3.0, -1.0};
    CHECK(pucci_plus_eigen(e, p) == 5.0);
    CHECK(pucci_minus_eigen(e, p) == 1.0);
    const std::array<double, 2> iso{-2.0, -2.0};
    CHECK(pucci_plus_eigen(iso, p) == -4.0);
}

TEST_CASE("swap identity is exact in floating point") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const ProblemParams p(0.5 + std::abs(U(rng)) / 4.0,
                              3.0 + std::abs(U(rng)), 3, 2.0);
        std::array<double, 3> e{U(rng), U(rng), U(rng)};
        std::array<double, 3> ne{-e[0], -e[1], -e[2]};
        CHECK(pucci_minus_eigen(e, p) == -pucci_plus_eigen(ne, p));
    }
}

TEST_CASE("radial form matches the eigenvalue form") {
    const ProblemParams p2(1.0, 2.0, 2, 3.0);
    // u = 1 - r^2 at r = 0.5: both curvatures negative
    CHECK(pucci_radial(0.75, -1.0, -2.0, 0.5, p2) == doctest::Approx(-4.0));
    CHECK(pucci_radial(0.0, 0.0, 0.0, 1.0, p2) == 0.0);
    const ProblemParams p3(1.0, 2.0, 3, 3.0);
    CHECK(pucci_radial(0.0, 1.0, 1.0, 1.0, p3) == doctest::Approx(6.0));
    CHECK_THROWS_AS(pucci_radial(0.0, 1.0, 1.0, 0.0, p3), std::domain_error);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    std::uniform_real_distribution<double> R(0.1, 10.0);
    for (int trial = 0; trial < 5000; ++trial) {
        const int N = 2 + (rng() % 2);
        const double lam = 0.5 + std::abs(U(rng)) / 4.0;
        const ProblemParams p(lam, lam * (1.0 + std::abs(U(rng)) / 5.0), N, 3.0);
        const double du = U(rng), d2u = U(rng), r = R(rng);
        // radial Hessian spectrum: d2u once, du/r with multiplicity N-1
        std::vector<double> eigs{d2u};
        for (int k = 1; k < N; ++k) eigs.push_back(du / r);
        const double a = pucci_radial(0.0, du, d2u, r, p);
        const double b = pucci_plus_eigen(eigs, p);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("odd power and its derivative") {
    CHECK(power_nonlinearity(-2.0, 3.0) == -8.0);
    CHECK(power_nonlinearity(0.0, 1.5) == 0.0);
    CHECK(power_nonlinearity(4.0, 1.5) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(power_nonlinearity_derivative(-2.0, 3.0) == doctest::Approx(12.0));
    CHECK(power_nonlinearity_derivative(0.0, 2.0) == 0.0);

    // derivative against central differences
    for (double u : {-3.0, -0.7, 0.4, 2.5}) {
        const double h = 1e-6;
        const double fd = (power_nonlinearity(u + h, 2.5) -
                           power_nonlinearity(u - h, 2.5)) /
                          (2.0 * h);
        CHECK(power_nonlinearity_derivative(u, 2.5) ==
              doctest::Approx(fd).epsilon(1e-8));
    }
}

TEST_CASE("gap constant validated by brute force") {
    for (double s : {1.5, 2.0, 3.0, 5.0}) {
        const double delta = power_gap_delta(s);
        CHECK(delta == std::exp2(1.0 - s));
        const double scanned = oracles::gap_ratio_scan(s);
        CHECK(scanned >= delta * (1.0 - 1e-9));
        // equality on the antisymmetric diagonal
        const double t = 1.7;
        const double ratio = std::abs(power_nonlinearity(t, s) -
                                      power_nonlinearity(-t, s)) /
                             std::pow(2.0 * t, s);
        CHECK(ratio == doctest::Approx(delta).epsilon(1e-12));
    }
    CHECK_THROWS_AS(power_gap_delta(1.0), std::invalid_argument);
}

TEST_CASE("symmetric 2x2 spectral form") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    const ProblemParams p(1.0, 2.0, 2, 3.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const SymmetricMatrix2 m{U(rng), U(rng), U(rng)};
        const auto e = m.eigenvalues();
        CHECK(e[0] <= e[1]);
        // trace and determinant identities
        const double det = m.a11 * m.a22 - m.a12 * m.a12;
        CHECK(std::abs(e[0] + e[1] - (m.a11 + m.a22)) <= 1e-12 * (1.0 + std::abs(m.a11 + m.a22)));
        CHECK(std::abs(e[0] * e[1] - det) <= 1e-10 * (1.0 + std::abs(det)));
        CHECK(pucci_plus(m, p) ==
              doctest::Approx(pucci_plus_eigen(e, p)).epsilon(1e-14));
        CHECK(pucci_minus(m, p) ==
              doctest::Approx(pucci_minus_eigen(e, p)).epsilon(1e-14));
    }
    const SymmetricMatrix2 diag{3.0, 0.0, -1.0};
    CHECK(pucci_plus(diag, p) == 5.0);
}
