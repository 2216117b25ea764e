#include <catch2/catch_amalgamated.hpp>

#include <nslet/geometry.hpp>
#include <nslet/specialfn.hpp>

#include "oracles.hpp"

using namespace nslet;

TEST_CASE("erf matches frozen reference value at x = 1") {
    // frozen from the series/continued-fraction oracle
    CHECK(std::abs(nslet::erf(1.0) - 0.842700792949715) <= 1e-14);
}

TEST_CASE("erf matches the independent oracle on [-6, 6]") {
    double worst = 0.0;
    for (int i = 0; i < 397; ++i) {
        const double x = -6.0 + 12.0 * i / 396.0;
        worst = std::max(worst, std::abs(nslet::erf(x) - oracle::erf_ref(x)));
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("erf is odd and erfc is its complement") {
    for (const double x : {0.0, 0.3, 0.46875, 0.8, 2.5, 5.0, 11.0}) {
        CHECK(nslet::erf(-x) == -nslet::erf(x));
        CHECK(std::abs(nslet::erf(x) + nslet::erfc(x) - 1.0) <= 1e-14);
        CHECK(std::abs(nslet::erfc(-x) - (2.0 - nslet::erfc(x))) <= 1e-14);
    }
}

TEST_CASE("erfc underflows cleanly for huge arguments") {
    CHECK(nslet::erfc(30.0) == 0.0);
    CHECK(nslet::erfc(-30.0) == 2.0);
}

TEST_CASE("heat kernel: frozen peak value and causal zero") {
    // 4*pi*nu*tau = 1 makes the prefactor exactly 1 at R = 0
    CHECK(heat_kernel(0.0, 1.0 / (4.0 * pi), 1.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(heat_kernel(1.0, 0.0, 1.0) == 0.0);  // H(0) = 0 convention
    CHECK(heat_kernel(1.0, -2.0, 1.0) == 0.0); // pre-history
    CHECK_THROWS_AS(heat_kernel(1.0, 1.0, 0.0), validation_error);
    CHECK_THROWS_AS(heat_kernel(1.0, 1.0, -1.0), validation_error);
}

TEST_CASE("heat kernel integrates to one") {
    const double nu = 0.7, tau = 0.35;
    // support radius ~ sqrt(4 nu tau) ~ 1; integrate far into the tail
    const QuadratureRule ball = ball_rule({0, 0, 0}, 8.0, 64);
    double mass = 0.0;
    for (std::size_t i = 0; i < ball.size(); ++i)
        mass += ball.weights[i] * heat_kernel(norm(ball.nodes[i].x), tau, nu);
    CHECK(mass == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("heat kernel underflow clamp produces exact zeros far out") {
    CHECK(heat_kernel(60.0, 1.0, 1.0) == 0.0); // exponent ~ -900 < -745
}
