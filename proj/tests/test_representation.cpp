#include <catch2/catch_amalgamated.hpp>

#include <nslet/representation.hpp>

#include <cmath>

using namespace nslet;

namespace {

// Heat evolution of the Gaussian vortex blob, closed form: the x_j prefactor
// turns sigma^2 -> s^2 = sigma^2 + 2 nu t with an extra sigma^5/s^5 in front,
// so u(x,t) = a sigma^3 / s^5 e^{-r^2/2s^2} (-x2, x1, 0).
Vec3 evolved_blob(const Vec3& x, double t, double sigma, double a, double nu) {
    const double s2 = sigma * sigma + 2.0 * nu * t;
    const double amp = a * sigma * sigma * sigma / (s2 * s2 * std::sqrt(s2));
    const double e = std::exp(-dot(x, x) / (2.0 * s2));
    return {-amp * e * x[1], amp * e * x[0], 0.0};
}

// grad[i][j] = du_i/dx_j of the same field.
Mat3 evolved_blob_grad(const Vec3& x, double t, double sigma, double a, double nu) {
    const double s2 = sigma * sigma + 2.0 * nu * t;
    const double amp = a * sigma * sigma * sigma / (s2 * s2 * std::sqrt(s2));
    const double e = std::exp(-dot(x, x) / (2.0 * s2));
    const Vec3 g{-x[1], x[0], 0.0};
    Mat3 m = zero_mat3();
    m[0][1] = -1.0;
    m[1][0] = 1.0;
    Mat3 out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = amp * e * (m[i][j] - g[i] * x[j] / s2);
    return out;
}

SampledField blob_on(const Vec3& origin, double spacing, const std::array<int, 3>& dims, double nu,
                     double sigma = 1.0, double amplitude = 1.0) {
    return make_divfree_field(GaussianBlob{sigma, amplitude}, origin, spacing, dims, nu);
}

SurfaceDensity lateral_density(const Vec3& center, double radius, double t0, double t1, int sp, int ti) {
    const auto wall = make_spherinder(center, radius, t0, t1, false, false);
    return make_surface_density(wall, sp, ti, [](const SpaceTimePoint&) { return Vec3{0.0, 0.0, 0.0}; });
}

} // namespace

TEST_CASE("single layer: null density and causality give exact zeros") {
    const auto s = make_spherinder({0.2, 0.0, -0.1}, 0.7, 0.5, 1.5);
    auto d = make_surface_density(s, 8, 3, [](const SpaceTimePoint&) { return Vec3{0.0, 0.0, 0.0}; });
    const std::vector<SpaceTimePoint> far{{2.0, {2.5, 0.0, 0.0}}, {0.9, {0.2, 2.0, 1.0}}};

    for (const auto& u : single_layer_velocity(d, {KernelFamily::stokes, 0.3, {}}, far)) {
        CHECK(u[0] == 0.0);
        CHECK(u[1] == 0.0);
        CHECK(u[2] == 0.0);
    }

    // Non-trivial density, queries strictly before the surface's time support.
    for (std::size_t m = 0; m < d.rule.size(); ++m) d.samples[m] = {1.0, -2.0, 0.5};
    const std::vector<SpaceTimePoint> early{{0.4, {2.5, 0.0, 0.0}}, {-1.0, {0.0, 3.0, 0.0}}};
    for (auto family : {KernelFamily::euler, KernelFamily::stokes, KernelFamily::oseen})
        for (const auto& u : single_layer_velocity(d, {family, 0.3, {0.1, 0.0, 0.2}}, early)) {
            CHECK(u[0] == 0.0);
            CHECK(u[1] == 0.0);
            CHECK(u[2] == 0.0);
        }
}

TEST_CASE("single layer: point-concentrated density reproduces the kernel") {
    const auto s = make_spherinder({0.0, 0.0, 0.0}, 0.5, 0.0, 1.0);
    const SpaceTimePoint q{1.3, {1.8, -0.6, 0.9}};
    for (auto family : {KernelFamily::euler, KernelFamily::stokes, KernelFamily::oseen}) {
        const KernelSpec spec{family, 0.4, {0.2, -0.1, 0.0}};
        for (int kdir = 0; kdir < 3; ++kdir) {
            auto d = make_surface_density(s, 6, 3, [](const SpaceTimePoint&) { return Vec3{0.0, 0.0, 0.0}; });
            const std::size_t m0 = d.rule.size() / 3;
            d.samples[m0][kdir] = 1.0;
            const auto out = single_layer_velocity(d, spec, {q})[0];

            const Vec3 dx = q.x - d.rule.nodes[m0].x;
            const double tau = q.t - d.rule.nodes[m0].t;
            REQUIRE(tau > 0.0);
            const Mat3 uk = family == KernelFamily::euler ? eulerlet(dx, tau, false).u
                            : family == KernelFamily::stokes
                                ? stokeslet(dx, tau, spec.nu, false).u
                                : oseenlet(dx, tau, spec.nu, spec.stream, false).u;
            for (int k = 0; k < 3; ++k)
                CHECK(out[k] == Catch::Approx(d.rule.weights[m0] * uk[k][kdir]).margin(1e-18));
        }
    }
}

TEST_CASE("single layer is linear in the density") {
    const auto s = make_spherinder({0.0, 0.0, 0.0}, 0.6, 0.0, 1.0);
    const auto F = [](const SpaceTimePoint& p) {
        return Vec3{std::sin(3.0 * p.x[0]) + p.t, p.x[1] * p.x[2], std::cos(2.0 * p.x[2])};
    };
    const auto G = [](const SpaceTimePoint& p) {
        return Vec3{p.x[0] * p.x[0], std::exp(-p.t), 0.3 - p.x[1]};
    };
    const double alpha = 2.25, beta = -1.5;
    auto dF = make_surface_density(s, 8, 4, F);
    auto dG = make_surface_density(s, 8, 4, G);
    auto dC = dF;
    for (std::size_t m = 0; m < dC.samples.size(); ++m)
        dC.samples[m] = alpha * dF.samples[m] + beta * dG.samples[m];

    const std::vector<SpaceTimePoint> qs{{1.4, {1.5, 0.2, -0.3}}, {0.8, {-0.1, 1.9, 0.4}}};
    const KernelSpec spec{KernelFamily::stokes, 0.25, {}};
    const auto uF = single_layer_velocity(dF, spec, qs);
    const auto uG = single_layer_velocity(dG, spec, qs);
    const auto uC = single_layer_velocity(dC, spec, qs);
    for (std::size_t n = 0; n < qs.size(); ++n) {
        const double scale = std::max(1.0, max_abs(uC[n]));
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(uC[n][k] - (alpha * uF[n][k] + beta * uG[n][k])) <= 1e-12 * scale);
    }
}

TEST_CASE("single layer rejects on-surface queries") {
    const auto s = make_spherinder({0.0, 0.0, 0.0}, 1.0, 0.0, 1.0);
    auto d = make_surface_density(s, 8, 3, [](const SpaceTimePoint&) { return Vec3{1.0, 0.0, 0.0}; });
    const KernelSpec spec{KernelFamily::stokes, 0.5, {}};

    // On the lateral wall mid-interval.
    CHECK_THROWS_AS(single_layer_velocity(d, spec, {{0.5, {1.0, 0.0, 0.0}}}), validation_error);
    // On the end cap, inside the sphere.
    CHECK_THROWS_AS(single_layer_velocity(d, spec, {{1.0, {0.3, 0.2, 0.0}}}), validation_error);
    // Inside the ball mid-interval but away from wall and caps: allowed.
    CHECK_NOTHROW(single_layer_velocity(d, spec, {{0.5, {0.1, 0.0, 0.0}}}));
    // A node-spacing away from the wall: allowed.
    CHECK_NOTHROW(single_layer_velocity(d, spec, {{0.5, {1.0 + pi / 5.0, 0.0, 0.0}}}));
}

TEST_CASE("ivp: zero initial field gives exact zero at every query") {
    auto u0 = make_grid({-1.0, -1.0, -1.0}, 0.25, {9, 9, 9});
    u0.nu = 0.1;
    u0.divergence_free = true;
    for (const auto& q : {SpaceTimePoint{0.5, {0.3, 0.0, 0.0}}, SpaceTimePoint{2.0, {4.0, 1.0, -2.0}}}) {
        const Vec3 u = ivp_velocity(u0, q);
        CHECK(u[0] == 0.0);
        CHECK(u[1] == 0.0);
        CHECK(u[2] == 0.0);
    }
}

TEST_CASE("ivp preconditions are enforced") {
    auto u0 = blob_on({-6.0, -6.0, -6.0}, 0.25, {49, 49, 49}, 0.01);
    CHECK_THROWS_AS(ivp_velocity(u0, {0.0, {1.0, 0.0, 0.0}}), validation_error);
    CHECK_THROWS_AS(ivp_velocity(u0, {-1.0, {1.0, 0.0, 0.0}}), validation_error);
    CHECK_THROWS_AS(ivp_velocity(u0, {1.0, {1.0, 0.0, 0.0}}, 2), validation_error);
    CHECK_THROWS_AS(ivp_velocity(u0, {1.0, {1.0, 0.0, 0.0}}, 1, nullptr), validation_error);

    auto unlabeled = u0;
    unlabeled.divergence_free = false;
    CHECK_THROWS_AS(ivp_velocity(unlabeled, {1.0, {1.0, 0.0, 0.0}}), validation_error);

    // A sigma = 1 blob truncated at [-2,2] has a far-from-decayed boundary.
    auto tight = blob_on({-2.0, -2.0, -2.0}, 0.25, {17, 17, 17}, 0.01);
    CHECK_THROWS_AS(ivp_velocity(tight, {1.0, {0.5, 0.0, 0.0}}), validation_error);
}

TEST_CASE("ivp at t just above zero is the identity on the initial field") {
    const double nu = 0.01, t = 1e-6;
    auto u0 = blob_on({-6.0, -6.0, -6.0}, 0.2, {61, 61, 61}, nu);
    for (const Vec3 probe : {Vec3{1.0, 0.4, -0.2}, Vec3{0.6, -0.8, 0.4}, Vec3{-1.2, 0.2, 0.0}}) {
        const Vec3 u = ivp_velocity(u0, {t, probe});
        const Vec3 want = trilinear(u0, probe); // probes sit on nodes
        CHECK(norm(u - want) <= 0.01 * norm(want));
    }
}

TEST_CASE("ivp matches the closed-form heat-widened blob at order 0") {
    const double nu = 0.01, t = 1.0, sigma = 1.0, a = 1.0;
    auto u0 = blob_on({-6.0, -6.0, -6.0}, 12.0 / 63.0, {64, 64, 64}, nu, sigma, a);
    double num = 0.0, den = 0.0;
    for (int px = -2; px <= 2; ++px)
        for (int py = -2; py <= 2; ++py)
            for (int pz = -2; pz <= 2; ++pz) {
                const Vec3 x{double(px), double(py), double(pz)};
                const Vec3 got = ivp_velocity(u0, {t, x});
                const Vec3 want = evolved_blob(x, t, sigma, a, nu);
                const Vec3 diff = got - want;
                num += dot(diff, diff);
                den += dot(want, want);
            }
    REQUIRE(den > 0.0);
    CHECK(std::sqrt(num / den) <= 0.02); // measured 1.09e-2
}

TEST_CASE("near-cell dipole face conversion matches a fine volume quadrature") {
    const double h = 0.2, c = 5.0; // c = 1/sqrt(4 nu t) for nu = 0.01, t = 1
    std::vector<double> g4x, g4w, g20x, g20w, fx, fw;
    gauss_legendre(4, -0.5 * h, 0.5 * h, g4x, g4w);
    gauss_legendre(20, -0.5 * h, 0.5 * h, g20x, g20w);
    gauss_legendre(24, -0.5 * h, 0.5 * h, fx, fw);

    const Vec3 u0c{0.3, -1.2, 0.7};
    const Vec3 cell{0.2, -0.1, 0.3};
    for (const Vec3 xq : {Vec3{0.25, 0.0, 0.3}, Vec3{0.9, -0.4, 0.1}}) {
        // +(1/4pi) int_cell u0_i Hess_ki dV', integrated directly.
        Vec3 want{0.0, 0.0, 0.0};
        for (std::size_t qi = 0; qi < fx.size(); ++qi)
            for (std::size_t qj = 0; qj < fx.size(); ++qj)
                for (std::size_t qk = 0; qk < fx.size(); ++qk) {
                    const Vec3 y = xq - (cell + Vec3{fx[qi], fx[qj], fx[qk]});
                    const auto hc = detail::erf_over_r_hessian(norm(y), c, false);
                    const double w = fw[qi] * fw[qj] * fw[qk] / (4.0 * pi);
                    const double pd = hc.P * dot(y, u0c);
                    for (int k = 0; k < 3; ++k) want[k] += w * (pd * y[k] + hc.Q * u0c[k]);
                }

        // The divergence-theorem identity itself is exact: resolved faces
        // reproduce the fine volume quadrature to machine precision.
        const Vec3 fine = detail::dipole_cell_faces(xq, cell, h, c, u0c, g20x, g20w);
        CHECK(norm(fine - want) <= 1e-12 * std::max(1.0, norm(want)));

        // The production 4-node faces carry only quadrature error.
        const Vec3 got = detail::dipole_cell_faces(xq, cell, h, c, u0c, g4x, g4w);
        CHECK(norm(got - want) <= 1e-6);
    }
}

TEST_CASE("force impulse of the initial field") {
    auto zero = make_grid({-1.0, -1.0, -1.0}, 0.5, {5, 5, 5});
    const Vec3 j0 = force_impulse_initial(zero);
    CHECK(j0[0] == 0.0);
    CHECK(j0[1] == 0.0);
    CHECK(j0[2] == 0.0);

    // Gaussian x-directed field: J = (-pi^(3/2), 0, 0).
    auto g = make_grid({-5.0, -5.0, -5.0}, 0.25, {41, 41, 41});
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k) {
                const Vec3 x = g.node(i, j, k);
                g.values[g.index(i, j, k)] = {std::exp(-dot(x, x)), 0.0, 0.0};
            }
    const Vec3 jg = force_impulse_initial(g);
    const double pi32 = 5.568327996831707845; // pi^(3/2)
    CHECK(std::abs(jg[0] + pi32) <= 1e-6);
    CHECK(std::abs(jg[1]) <= 1e-12);
    CHECK(std::abs(jg[2]) <= 1e-12);

    // A curl field integrates to zero up to the grid tail.
    auto blob = blob_on({-6.0, -6.0, -6.0}, 0.25, {49, 49, 49}, 0.01);
    CHECK(norm(force_impulse_initial(blob)) <= 1e-9);
}

TEST_CASE("continuation step: zero density returns prev; point density hits the Eulerlet") {
    const double eps = 0.05, dt = 0.05, t = 1.0;
    const Vec3 x0{0.3, 0.0, -0.1};
    auto d = lateral_density(x0, eps, t - dt, t, 8, 3);

    const Vec3 prev{0.4, -0.2, 0.9};
    const Vec3 same = continuation_step(prev, {t, x0}, d, eps, dt);
    CHECK(same[0] == prev[0]);
    CHECK(same[1] == prev[1]);
    CHECK(same[2] == prev[2]);

    const Vec3 z = continuation_step({0.0, 0.0, 0.0}, {t, x0}, d, eps, dt);
    CHECK(norm(z) == 0.0);

    auto dp = d;
    const std::size_t m0 = dp.rule.size() / 2;
    dp.samples[m0] = {0.0, 1.0, 0.0};
    const Vec3 u = continuation_step({0.0, 0.0, 0.0}, {t, x0}, dp, eps, dt);
    const Mat3 ek = eulerlet(x0 - dp.rule.nodes[m0].x, t - dp.rule.nodes[m0].t, false).u;
    for (int k = 0; k < 3; ++k)
        CHECK(u[k] == Catch::Approx(dp.rule.weights[m0] * ek[k][1]).margin(1e-18));
}

TEST_CASE("continuation step validation") {
    const double eps = 0.05, dt = 0.05, t = 1.0;
    const Vec3 x0{0.0, 0.0, 0.0};
    auto good = lateral_density(x0, eps, t - dt, t, 6, 2);
    CHECK_THROWS_AS(continuation_step({0, 0, 0}, {t, x0}, good, -eps, dt), validation_error);
    CHECK_THROWS_AS(continuation_step({0, 0, 0}, {t, x0}, good, eps, 0.0), validation_error);
    CHECK_THROWS_AS(continuation_step({0, 0, 0}, {t, x0}, good, 2.0 * eps, dt), validation_error);
    CHECK_THROWS_AS(continuation_step({0, 0, 0}, {t, x0}, good, eps, 0.5 * dt), validation_error);

    const auto capped = make_spherinder(x0, eps, t - dt, t, true, true);
    auto bad = make_surface_density(capped, 6, 2, [](const SpaceTimePoint&) { return Vec3{0, 0, 0}; });
    CHECK_THROWS_AS(continuation_step({0, 0, 0}, {t, x0}, bad, eps, dt), validation_error);
}

TEST_CASE("velocity bound arithmetic and the continuation chain") {
    CHECK(velocity_bound(1.0, 2.0, 3.0, 0.0) == 7.0);
    CHECK(velocity_bound(0.0, 0.0, 123.0, 0.0) == 0.0);
    CHECK_THROWS_AS(velocity_bound(-1.0, 1.0, 1.0, 0.0), validation_error);
    CHECK_THROWS_AS(velocity_bound(1.0, -1.0, 1.0, 0.0), validation_error);
    CHECK_THROWS_AS(velocity_bound(1.0, 1.0, 1.0, -0.5), validation_error);

    // Three chained steps: the measured velocity never exceeds the bound.
    const double eps = 0.05, dt = 0.05;
    const Vec3 x0{0.2, 0.1, 0.0};
    Vec3 u{0.0, 0.0, 0.0};
    double bound = 0.0;
    for (int step = 1; step <= 3; ++step) {
        const double t = 0.5 + dt * step;
        const auto wall = make_spherinder(x0, eps, t - dt, t, false, false);
        auto d = make_surface_density(wall, 8, 3, [step](const SpaceTimePoint& p) {
            return Vec3{0.3 * p.x[1] + 0.1 * step, -0.2 * p.x[0], 0.05 * p.t};
        });
        double adi = 0.0, emax = 0.0;
        for (std::size_t m = 0; m < d.rule.size(); ++m) {
            adi += d.rule.weights[m] * norm(d.samples[m]);
            const Mat3 ek = eulerlet(x0 - d.rule.nodes[m].x, t - d.rule.nodes[m].t, false).u;
            emax = std::max(emax, frobenius(ek));
        }
        u = continuation_step(u, {t, x0}, d, eps, dt);
        bound = velocity_bound(bound, adi, emax, 0.0);
        CHECK(norm(u) <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("divergence-free blob construction") {
    const double sigma = 1.0, a = 0.8, h = 0.125;
    auto f = blob_on({-4.0, -4.0, -4.0}, h, {65, 65, 65}, 0.1, sigma, a);
    CHECK(f.divergence_free);

    // Symbolic curl oracle.
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < f.dims[0]; ++i)
        for (int j = 0; j < f.dims[1]; ++j)
            for (int k = 0; k < f.dims[2]; ++k) {
                const Vec3 x = f.node(i, j, k);
                const double e = a * std::exp(-dot(x, x) / (2.0 * sigma * sigma)) / (sigma * sigma);
                const Vec3 want{-e * x[1], e * x[0], 0.0};
                worst = std::max(worst, norm(f.values[f.index(i, j, k)] - want));
                scale = std::max(scale, norm(want));
            }
    CHECK(worst <= 0.01 * scale);

    auto zero = blob_on({-4.0, -4.0, -4.0}, 0.25, {33, 33, 33}, 0.1, 1.0, 0.0);
    CHECK(max_abs(zero) == 0.0);

    CHECK_THROWS_AS(blob_on({-4.0, -4.0, -4.0}, 0.4, {21, 21, 21}, 0.1), validation_error);
}

TEST_CASE("divergence-free label holds on the canonical grid") {
    auto f = blob_on({-6.0, -6.0, -6.0}, 12.0 / 63.0, {64, 64, 64}, 0.01);
    CHECK(max_discrete_divergence(f) <= 1e-6 * max_abs(f));
    CHECK(divergence_label_ok(f));
}

TEST_CASE("pde residual: zero flow, heat-evolved blob, and the convective term") {
    FlowProvider zero{[](const SpaceTimePoint&) { return Vec3{0, 0, 0}; },
                      [](const SpaceTimePoint&) { return 0.0; }};
    const Vec3 rz = pde_residual(zero, {1.0, {0.2, 0.0, 0.0}}, 0.1, 0.05);
    CHECK(norm(rz) == 0.0);

    const double nu = 0.01, sigma = 1.0, a = 1.0, h = 0.01;
    FlowProvider blob{[=](const SpaceTimePoint& p) { return evolved_blob(p.x, p.t, sigma, a, nu); }, {}};
    const SpaceTimePoint at{0.8, {0.7, -0.3, 0.5}};

    // Residual scale: the size of the terms being cancelled.
    const Vec3 u0 = blob.velocity(at);
    double lap_scale = 0.0;
    for (int d = 0; d < 3; ++d) {
        Vec3 xp = at.x, xm = at.x;
        xp[d] += h;
        xm[d] -= h;
        lap_scale += max_abs(blob.velocity({at.t, xp}) - 2.0 * u0 + blob.velocity({at.t, xm})) / (h * h);
    }
    const double scale = nu * lap_scale;
    REQUIRE(scale > 0.0);

    const Vec3 rl = pde_residual(blob, at, nu, h, ResidualMode::linearized);
    CHECK(max_abs(rl) <= 1e-4 * scale);

    // Full mode adds exactly the centered convective term.
    Vec3 conv{0.0, 0.0, 0.0};
    for (int d = 0; d < 3; ++d) {
        Vec3 xp = at.x, xm = at.x;
        xp[d] += h;
        xm[d] -= h;
        conv += (u0[d] / (2.0 * h)) * (blob.velocity({at.t, xp}) - blob.velocity({at.t, xm}));
    }
    const Vec3 rf = pde_residual(blob, at, nu, h, ResidualMode::full);
    CHECK(max_abs(rf - rl - conv) <= 1e-14 * std::max(1.0, max_abs(conv)));
    CHECK(max_abs(rf - conv) <= 1e-4 * std::max(scale, max_abs(conv)));

    // A provider whose domain ends propagates its error through the stencil.
    FlowProvider walled{[](const SpaceTimePoint& p) -> Vec3 {
                            if (norm(p.x) > 1.0) throw validation_error("outside");
                            return {0, 0, 0};
                        },
                        {}};
    CHECK_THROWS_AS(pde_residual(walled, {1.0, {0.99, 0.0, 0.0}}, 0.1, 0.05), validation_error);
}

TEST_CASE("force impulse is boundary independent for the Stokes-evolved blob") {
    const double nu = 0.01, sigma = 1.0, a = 1.0;

    // Volume form at initial time.
    auto u0 = blob_on({-6.0, -6.0, -6.0}, 0.25, {49, 49, 49}, nu, sigma, a);
    const Vec3 j_vol = force_impulse_initial(u0);

    // Lateral-surface form with the null interior complement: F_i = tau_ij n_j,
    // tau_ij = -p delta_ij + nu du_i/dx_j with p = 0 for the heat-evolved blob.
    const auto wall = make_spherinder({0.0, 0.0, 0.0}, 2.5, 0.0, 1.0, false, false);
    const auto rule = spherinder_rule(wall, 12, 4);
    Vec3 j_surf{0.0, 0.0, 0.0};
    double abs_scale = 0.0;
    for (std::size_t m = 0; m < rule.size(); ++m) {
        const Vec3 n{rule.normals[m][1], rule.normals[m][2], rule.normals[m][3]};
        const Mat3 g = evolved_blob_grad(rule.nodes[m].x, rule.nodes[m].t, sigma, a, nu);
        const Vec3 f = nu * apply(g, n);
        j_surf += rule.weights[m] * f;
        abs_scale += rule.weights[m] * norm(f);
    }
    REQUIRE(abs_scale > 0.0);
    CHECK(norm(j_surf - j_vol) <= 0.01 * abs_scale);
    CHECK(norm(j_surf) <= 0.01 * abs_scale);
}
