#include <catch2/catch_amalgamated.hpp>

#include <nslet/flux.hpp>

#include "oracles.hpp"

using namespace nslet;

namespace {

Mat3 plus(const Mat3& a, double s) {
    Mat3 r = a;
    for (int k = 0; k < 3; ++k) r[k][k] += s;
    return r;
}

} // namespace

TEST_CASE("euler momentum flux: -I with the documented part split") {
    const auto s = make_spherinder({0.0, 0.0, 0.0}, 1.0, -1.0, 1.0);
    const auto rep = euler_momentum_flux(s, {24, 24});

    CHECK(max_abs(plus(rep.matrix, 1.0)) <= 1e-6);         // matrix = -I
    CHECK(max_abs(plus(rep.smooth_part, -1.0 / 3.0)) <= 1e-6);  // cap dipole = +(1/3) I
    CHECK(rep.estimated_error <= 1e-10);

    const Mat3 pressure = pressure_atom_lateral_flux(1.0, 24);
    CHECK(max_abs(plus(pressure, 1.0 / 3.0)) <= 1e-6); // lateral pressure = -(1/3) I

    // report invariant: the total is the exact sum of the parts
    CHECK(rep.matrix == rep.atom_part + rep.smooth_part);

    // atom part = point atom (-I) + pressure atom (-(1/3) I)
    CHECK(max_abs(plus(rep.atom_part, 4.0 / 3.0)) <= 1e-6);
}

TEST_CASE("euler momentum flux vanishes when the origin event is outside") {
    // window strictly after the impulse: both caps live, everything cancels
    const auto after = euler_momentum_flux(make_spherinder({0, 0, 0}, 1.0, 0.5, 1.5), {16, 16});
    CHECK(max_abs(after.matrix) <= 1e-12);

    // window strictly before: Heaviside kills the field entirely
    const auto before = euler_momentum_flux(make_spherinder({0, 0, 0}, 1.0, -2.0, -1.0), {16, 16});
    CHECK(max_abs(before.matrix) == 0.0);
    CHECK(before.estimated_error == 0.0);
}

TEST_CASE("euler momentum flux is invariant under quadrature-frame rotation") {
    const auto s = make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0);
    const auto r0 = euler_momentum_flux(s, {24, 24, 0});
    const auto r1 = euler_momentum_flux(s, {24, 24, 1});
    const auto r2 = euler_momentum_flux(s, {24, 24, 2});
    CHECK(max_abs(r0.matrix - r2.matrix) <= 1e-8);
    CHECK(max_abs(r1.matrix - r2.matrix) <= 1e-8);
}

TEST_CASE("flux preconditions are enforced") {
    CHECK_THROWS_AS(euler_momentum_flux(make_spherinder({0.5, 0, 0}, 1.0, -1.0, 1.0), {8, 8}),
                    validation_error);
    CHECK_THROWS_AS(euler_momentum_flux(make_spherinder({0, 0, 0}, 1.0, 0.0, 1.0), {8, 8}),
                    validation_error);
    CHECK_THROWS_AS(euler_viscous_flux(make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0), {8, 8}, 0.0),
                    validation_error);
    CHECK_THROWS_AS(stokeslet_total_flux(make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0), {8, 8}, -1.0),
                    validation_error);
    CHECK_THROWS_AS(green_identity_near([](const SpaceTimePoint&) { return Vec3{0, 0, 0}; },
                                        [](const SpaceTimePoint&) { return zero_mat3(); },
                                        {0.0, {0, 0, 0}}, 0.0, 0.1),
                    validation_error);
}

TEST_CASE("euler viscous flux is zero for several radii and viscosities") {
    for (const auto& [R, nu] : {std::pair{1.0, 1.0}, {1.0, 2.0}, {0.3, 1.0}}) {
        const auto rep =
            euler_viscous_flux(make_spherinder({0, 0, 0}, R, -1.0, 1.0), {16, 12}, nu);
        CHECK(max_abs(rep.matrix) <= 1e-8);
        CHECK(max_abs(rep.atom_part) == 0.0);
        CHECK(rep.matrix == rep.atom_part + rep.smooth_part);
    }
}

TEST_CASE("euler Bernoulli flux is zero and its integrand cancels antipodally") {
    for (const double R : {1.0, 2.0}) {
        const auto rep = euler_bernoulli_flux(make_spherinder({0, 0, 0}, R, -1.0, 1.0), {16, 12});
        CHECK(max_abs(rep.matrix) <= 1e-8);
    }

    // pointwise parity: (u_kj u_ki n_j + p^B_k n_i) at x and -x sum to zero
    const Vec3 x{0.6, -0.3, 0.74};
    const Vec3 n{x[0] / norm(x), x[1] / norm(x), x[2] / norm(x)};
    const auto a = eulerlet(x, 0.7, false);
    const auto b = eulerlet(-1.0 * x, 0.7, false);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) {
            const double fa = dot(a.u[k], n) * a.u[k][i] + a.p[k] * n[i];
            const double fb = dot(b.u[k], -1.0 * n) * b.u[k][i] + b.p[k] * (-n[i]);
            CHECK(std::abs(fa + fb) <= 1e-15 * std::max(1.0, std::abs(fa)));
        }
}

TEST_CASE("stokeslet total flux: -I for nu spanning two decades") {
    Mat3 results[3];
    int idx = 0;
    for (const double nu : {0.1, 1.0, 10.0}) {
        const auto rep =
            stokeslet_total_flux(make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0), {32, 32}, nu);
        CHECK(max_abs(plus(rep.matrix, 1.0)) <= 1e-4);
        CHECK(rep.matrix == rep.atom_part + rep.smooth_part);
        CHECK(rep.estimated_error <= 1e-4);
        results[idx++] = rep.matrix;
    }
    // the identity is nu-independent
    CHECK(max_abs(results[0] - results[1]) <= 1e-4);
    CHECK(max_abs(results[1] - results[2]) <= 1e-4);
}

TEST_CASE("stokeslet total flux self-converges under order doubling") {
    const auto s = make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0);
    const auto lo = stokeslet_total_flux(s, {32, 32}, 0.1);
    const auto hi = stokeslet_total_flux(s, {64, 64}, 0.1);
    CHECK((hi.estimated_error <= lo.estimated_error / 4.0 || hi.estimated_error <= 1e-12));
    CHECK(max_abs(hi.matrix - lo.matrix) <= lo.estimated_error + 1e-12);
}

TEST_CASE("stokeslet flux pieces: frozen end-cap value, causal zero") {
    // end-cap ball integral of u^S has the closed form -(2/3) M(eta) I with
    // M = erf(eta) - (2/sqrt(pi)) eta e^{-eta^2}, eta = R/sqrt(4 nu T);
    // isolate it as (full surface) - (lateral-only surface)
    const auto full = stokeslet_total_flux(make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0), {32, 32}, 1.0);
    const auto walls = stokeslet_total_flux(
        make_spherinder({0, 0, 0}, 1.0, -1.0, 1.0, false, false), {32, 32}, 1.0);
    const Mat3 cap = full.smooth_part - walls.smooth_part;
    const double eta = 0.5;
    const double M = oracle::erf_ref(eta) - 1.1283791670955126 * eta * std::exp(-eta * eta);
    CHECK(max_abs(plus(cap, (2.0 / 3.0) * M)) <= 1e-9);

    const auto before =
        stokeslet_total_flux(make_spherinder({0, 0, 0}, 1.0, -3.0, -0.5), {16, 16}, 1.0);
    CHECK(max_abs(before.matrix) == 0.0);
}

TEST_CASE("all four identities hold together on a sample of (R, T)") {
    for (const auto& [R, T] : {std::pair{0.5, 2.0}, {2.0, 0.5}}) {
        const auto s = make_spherinder({0, 0, 0}, R, -T, T);
        CHECK(max_abs(plus(euler_momentum_flux(s, {24, 24}).matrix, 1.0)) <= 1e-6);
        CHECK(max_abs(euler_viscous_flux(s, {16, 12}, 1.0).matrix) <= 1e-8);
        CHECK(max_abs(euler_bernoulli_flux(s, {16, 12}).matrix) <= 1e-8);
        CHECK(max_abs(plus(stokeslet_total_flux(s, {32, 32}, 1.0).matrix, 1.0)) <= 1e-4);
    }
}

TEST_CASE("green identity near the point: null and constant fields") {
    const StressField no_stress = [](const SpaceTimePoint&) { return zero_mat3(); };

    const Vec3 zero = green_identity_near(
        [](const SpaceTimePoint&) { return Vec3{0, 0, 0}; }, no_stress, {0.3, {0.1, -0.2, 0.4}},
        0.05, 0.05, {16, 16});
    CHECK(max_abs(zero) == 0.0);

    const Vec3 c{0.7, -0.3, 1.1};
    const Vec3 got = green_identity_near([&](const SpaceTimePoint&) { return c; }, no_stress,
                                         {0.3, {0.1, -0.2, 0.4}}, 0.05, 0.05, {16, 16});
    CHECK(max_abs(got + c) <= 1e-12);
}

TEST_CASE("green identity near the point: exact O(T) defect for space-time-linear fields") {
    const Vec3 a{0.3, -0.2, 0.5};
    const Mat3 G{{{0.2, -0.1, 0.4}, {0.3, 0.1, -0.2}, {-0.4, 0.25, 0.15}}};
    const Vec3 c{0.4, 0.7, -0.3};
    const double nu = 1.0;
    const VelocityField u = [&](const SpaceTimePoint& p) {
        return a + apply(G, p.x) + p.t * c;
    };
    const StressField stress = [&](const SpaceTimePoint&) {
        Mat3 t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t[i][j] = nu * (G[i][j] + G[j][i]);
        return t;
    };
    const SpaceTimePoint center{0.6, {0.2, -0.1, 0.3}};
    const Vec3 uc = u(center);

    double errs[2];
    int idx = 0;
    for (const double R : {0.2, 0.1}) {
        const Vec3 got = green_identity_near(u, stress, center, R, R, {16, 16}, nu);
        // defect is exactly (2/3) c T for this field class
        const Vec3 defect = got + uc;
        CHECK(max_abs(defect - (2.0 / 3.0 * R) * c) <= 1e-12);
        errs[idx++] = max_abs(defect);
    }
    const double slope = std::log2(errs[0] / errs[1]);
    CHECK(slope >= 0.9);
    CHECK(slope <= 1.1);
}
