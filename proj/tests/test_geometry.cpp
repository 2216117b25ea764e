#include <algorithm>
#include <catch2/catch_amalgamated.hpp>

#include <nslet/geometry.hpp>
#include <nslet/specialfn.hpp>

#include "oracles.hpp"

using namespace nslet;

namespace {

double integrate(const QuadratureRule& rule, const std::function<double(const Vec3&)>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * f(rule.nodes[i].x);
    return s;
}

} // namespace

TEST_CASE("gauss_legendre hits polynomials exactly") {
    std::vector<double> x, w;
    gauss_legendre(3, 0.0, 1.0, x, w);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += w[i] * std::pow(x[i], 5);
    CHECK(s == Catch::Approx(1.0 / 6.0).epsilon(1e-14)); // degree 5 = 2n-1
}

TEST_CASE("ball rule: measure and the frozen x1^2 moment") {
    const QuadratureRule ball = ball_rule({0, 0, 0}, 1.0, 8);
    double volume = 0.0;
    for (double w : ball.weights) {
        CHECK(w > 0.0);
        volume += w;
    }
    CHECK(volume == Catch::Approx(4.0 * pi / 3.0).epsilon(1e-10));
    // oracle: spherical factorization gives (1/5) * (4 pi / 3) = 4 pi / 15
    const double moment = integrate(ball, [](const Vec3& p) { return p[0] * p[0]; });
    CHECK(std::abs(moment - 4.0 * pi / 15.0) <= 1e-12);
}

TEST_CASE("sphere rule: area, normals, and the frozen n1*n1 moment") {
    const double R = 2.5;
    const QuadratureRule sph = sphere_rule({0, 0, 0}, R, 12);
    double area = 0.0;
    for (std::size_t i = 0; i < sph.size(); ++i) {
        CHECK(sph.weights[i] > 0.0);
        area += sph.weights[i];
        const Vec4& n = sph.normals[i];
        CHECK(n[0] == 0.0); // lateral normals are purely spatial
        const Vec3 ns{n[1], n[2], n[3]};
        CHECK(std::abs(norm(ns) - 1.0) <= 1e-14);
        // radial direction
        CHECK(norm(sph.nodes[i].x - R * ns) <= 1e-12);
    }
    CHECK(area == Catch::Approx(4.0 * pi * R * R).epsilon(1e-10));

    const QuadratureRule unit = sphere_rule({0, 0, 0}, 1.0, 8);
    // oracle: int n1^2 dS = (4 pi / 3) R^2 at R = 1
    const double m = integrate(unit, [](const Vec3& p) { return p[0] * p[0]; });
    CHECK(std::abs(m - 4.0 * pi / 3.0) <= 1e-12);
}

TEST_CASE("rules are polynomially exact up to their order") {
    // int over unit ball of x1^2 x2^4: spherical factorization
    //   = (int r^8 r^2 dr) * (int n1^2 n2^4 dOmega) = (1/9) * (4 pi * 1*3 / 105)
    const double exact = (1.0 / 9.0) * 4.0 * pi * 3.0 / 105.0;
    const QuadratureRule ball = ball_rule({0, 0, 0}, 1.0, 6);
    const double got = integrate(ball, [](const Vec3& p) {
        return p[0] * p[0] * std::pow(p[1], 4);
    });
    CHECK(got == Catch::Approx(exact).epsilon(1e-12));
}

TEST_CASE("weight multiset is invariant under axis relabeling") {
    for (const auto* build : {"sphere", "ball"}) {
        std::array<std::vector<double>, 3> ws;
        for (int pole = 0; pole < 3; ++pole) {
            const QuadratureRule r = std::string(build) == "sphere"
                                         ? sphere_rule({0, 0, 0}, 1.0, 10, pole)
                                         : ball_rule({0, 0, 0}, 1.0, 10, pole);
            ws[pole] = r.weights;
            std::sort(ws[pole].begin(), ws[pole].end());
        }
        for (int pole = 1; pole < 3; ++pole) {
            REQUIRE(ws[pole].size() == ws[0].size());
            for (std::size_t i = 0; i < ws[0].size(); ++i)
                CHECK(std::abs(ws[pole][i] - ws[0][i]) <= 1e-13 * (1.0 + std::abs(ws[0][i])));
        }
    }
}

TEST_CASE("ball quadrature of exp(-|x|^2) converges at >= 4x per order doubling") {
    // radius 4 keeps the coarse-order error well above machine noise
    const double R = 4.0;
    // oracle: 4 pi int_0^R r^2 e^{-r^2} dr = pi^{3/2} erf(R) - 2 pi R e^{-R^2}
    const double exact = std::pow(pi, 1.5) * oracle::erf_ref(R) - 2.0 * pi * R * std::exp(-R * R);
    double prev_err = -1.0;
    for (const int order : {8, 16, 32}) {
        const QuadratureRule ball = ball_rule({0, 0, 0}, R, order);
        const double got = integrate(ball, [](const Vec3& p) { return std::exp(-dot(p, p)); });
        const double err = std::abs(got - exact);
        if (prev_err > 0.0) CHECK(prev_err / std::max(err, 1e-300) >= 4.0);
        prev_err = err;
    }
}

TEST_CASE("spherinder rule: measures, normals, and a divergence-theorem flux") {
    const SpherinderSurface s = make_spherinder({0.5, -0.25, 1.0}, 1.0, 0.0, 1.0);
    const QuadratureRule rule = spherinder_rule(s, 8, 4);

    double lateral = 0.0, caps = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        CHECK(rule.weights[i] > 0.0);
        if (rule.normals[i][0] == 0.0)
            lateral += rule.weights[i];
        else
            caps += rule.weights[i];
    }
    CHECK(lateral == Catch::Approx(4.0 * pi * 1.0 * 1.0).epsilon(1e-10)); // 4 pi R^2 (t1-t0)
    CHECK(caps == Catch::Approx(2.0 * 4.0 * pi / 3.0).epsilon(1e-10));

    // flux of the spatial field F(x) = x - c through the boundary:
    // lateral contributes 3 * (4 pi / 3) * (t1 - t0), caps contribute zero
    // (spatial field, time normals). Matches the divergence theorem.
    double flux = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const Vec3 F = rule.nodes[i].x - s.center.x;
        const Vec4& n = rule.normals[i];
        flux += rule.weights[i] * (F[0] * n[1] + F[1] * n[2] + F[2] * n[3]);
    }
    CHECK(flux == Catch::Approx(3.0 * (4.0 * pi / 3.0)).epsilon(1e-10));
}

TEST_CASE("spherinder rule honors caps_included") {
    const SpherinderSurface s = make_spherinder({0, 0, 0}, 2.0, -1.0, 1.0, false, false);
    const QuadratureRule rule = spherinder_rule(s, 6, 3);
    for (std::size_t i = 0; i < rule.size(); ++i) CHECK(rule.normals[i][0] == 0.0);
    double area = 0.0;
    for (double w : rule.weights) area += w;
    CHECK(area == Catch::Approx(4.0 * pi * 4.0 * 2.0).epsilon(1e-10));
}

TEST_CASE("geometry validation errors") {
    CHECK_THROWS_AS(ball_rule({0, 0, 0}, -1.0, 4), validation_error);
    CHECK_THROWS_AS(sphere_rule({0, 0, 0}, 0.0, 4), validation_error);
    CHECK_THROWS_AS(make_spherinder({0, 0, 0}, 1.0, 1.0, 0.0), validation_error);
    std::vector<double> x, w;
    CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0, x, w), validation_error);
}
