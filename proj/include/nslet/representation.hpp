#ifndef NSLET_REPRESENTATION_HPP
#define NSLET_REPRESENTATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <type_traits>
#include <utility>
#include <vector>

#include "core.hpp"
#include "field.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "nslet_series.hpp"
#include "specialfn.hpp"

// Single-layer velocity representations: surface distributions of kernel
// impulses, initial-value propagation from a sampled field, force impulses,
// the Eulerlet continuation step and its Cauchy-Schwarz bound.

namespace nslet {

enum class KernelFamily { euler, stokes, oseen };

struct KernelSpec {
    KernelFamily family = KernelFamily::stokes;
    double nu = 1.0;           // stokes / oseen only
    Vec3 stream{0.0, 0.0, 0.0}; // oseen only
};

// Surface density F_i sampled on a spherinder quadrature rule. The spatial
// and time orders are kept so that consumers can reconstruct the node
// spacing (on-surface rejection works with half-spacing tolerances).
struct SurfaceDensity {
    SpherinderSurface surface;
    QuadratureRule rule;
    std::vector<Vec3> samples;
    int spatial_order = 0;
    int time_order = 0;
};

namespace detail {

inline void check_density(const SurfaceDensity& d, const char* who) {
    if (d.samples.size() != d.rule.size())
        throw validation_error(std::string(who) + ": sample count does not match the quadrature rule");
    for (const auto& f : d.samples)
        for (int i = 0; i < 3; ++i)
            if (!std::isfinite(f[i])) throw validation_error(std::string(who) + ": non-finite density sample");
}

// Smooth kernel velocity tensor for one space-time separation.
inline Mat3 layer_kernel(const KernelSpec& spec, const Vec3& dx, double tau) {
    switch (spec.family) {
        case KernelFamily::euler: return eulerlet(dx, tau, false).u;
        case KernelFamily::stokes: return stokeslet(dx, tau, spec.nu, false).u;
        case KernelFamily::oseen: return oseenlet(dx, tau, spec.nu, spec.stream, false).u;
    }
    throw validation_error("layer_kernel: unknown kernel family");
}

} // namespace detail

template <class Fn>
SurfaceDensity make_surface_density(const SpherinderSurface& s, int spatial_order, int time_order, Fn&& sample_at) {
    SurfaceDensity d;
    d.surface = s;
    d.rule = spherinder_rule(s, spatial_order, time_order);
    d.spatial_order = spatial_order;
    d.time_order = time_order;
    d.samples.reserve(d.rule.size());
    for (const auto& node : d.rule.nodes) d.samples.push_back(sample_at(node));
    detail::check_density(d, "make_surface_density");
    return d;
}

// u_k(x,t) = sum over surface nodes of w F_i u_ki(x - x', t - t'). Causality
// comes from the kernels' Heaviside factor; nodes at or after the query time
// are skipped outright. Kernel atoms sit at zero separation (velocity) or on
// a time slice (pressure), so with the queries held off the surface by the
// rejection test below they never fire and the smooth part is the whole sum.
inline std::vector<Vec3> single_layer_velocity(const SurfaceDensity& density, const KernelSpec& kernel,
                                               const std::vector<SpaceTimePoint>& queries) {
    detail::check_density(density, "single_layer_velocity");
    const auto& s = density.surface;
    const int ntheta = std::max(1, (density.spatial_order + 2) / 2);
    const double h_sp = pi * s.radius / ntheta;
    const double h_t = (s.t_end - s.t_start) / std::max(1, density.time_order);

    std::vector<Vec3> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        const double dist = norm(q.x - s.center.x);
        const bool in_band = q.t >= s.t_start - 0.5 * h_t && q.t <= s.t_end + 0.5 * h_t;
        if (in_band && std::abs(dist - s.radius) <= 0.5 * h_sp)
            throw validation_error("single_layer_velocity: query lies on the density surface");
        const bool near_cap_start = s.caps_included.first && std::abs(q.t - s.t_start) <= 0.5 * h_t;
        const bool near_cap_end = s.caps_included.second && std::abs(q.t - s.t_end) <= 0.5 * h_t;
        if ((near_cap_start || near_cap_end) && dist <= s.radius + 0.5 * h_sp)
            throw validation_error("single_layer_velocity: query lies on a density cap");

        Vec3 u{0.0, 0.0, 0.0};
        for (std::size_t m = 0; m < density.rule.size(); ++m) {
            const double tau = q.t - density.rule.nodes[m].t;
            if (tau <= 0.0) continue;
            const Mat3 uk = detail::layer_kernel(kernel, q.x - density.rule.nodes[m].x, tau);
            const double w = density.rule.weights[m];
            for (int k = 0; k < 3; ++k) u[k] += w * dot(uk[k], density.samples[m]);
        }
        out.push_back(u);
    }
    return out;
}

namespace detail {

// Exact heat mass of one grid cell along one axis: integral of the 1-d heat
// kernel over [lo, hi] at distance x.
inline double heat_cell_mass_1d(double x, double lo, double hi, double w4) {
    return 0.5 * (erf((x - lo) / w4) - erf((x - hi) / w4));
}

// Per-axis heat weights for the midpoint grid. Below sigma_heat = 0.7 h the
// kernel is too narrow for midpoint sampling and each cell gets its exact
// erf mass instead; the crossover keeps both branches under the module's
// percent-level tolerances (midpoint aliasing ~ exp(-2 pi^2 sigma^2/h^2)).
inline std::vector<double> heat_axis_weights(double xq, double o, double h, int n, double nu, double t) {
    const double w4 = std::sqrt(4.0 * nu * t);
    const double sigma_heat = std::sqrt(2.0 * nu * t);
    std::vector<double> w(static_cast<std::size_t>(n));
    if (sigma_heat >= 0.7 * h) {
        const double norm1d = 1.0 / std::sqrt(4.0 * pi * nu * t);
        for (int i = 0; i < n; ++i) {
            const double dx = xq - (o + h * i);
            w[static_cast<std::size_t>(i)] = h * norm1d * exp_clamped(-dx * dx / (4.0 * nu * t));
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const double c = o + h * i;
            w[static_cast<std::size_t>(i)] = heat_cell_mass_1d(xq, c - 0.5 * h, c + 0.5 * h, w4);
        }
    }
    return w;
}

// Cell integral of the Stokeslet dipole against a locally constant u0,
// converted by the divergence theorem to the six cell faces:
//   int_cell Hess_ki[psi](x - x') dV' = -oint (grad_k psi)(x - x') n_i dS',
// with psi = erf(c R)/R and grad_k psi = Q(R) y_k, y = x - x'. Q is the
// bounded Hessian trace coefficient, so the face quadrature sees no
// singularity even when x sits inside the cell; between adjacent cells the
// shared faces telescope, which is exactly the discrete integration by parts
// that annihilates divergence-free data.
inline Vec3 dipole_cell_faces(const Vec3& xq, const Vec3& cell_center, double h, double c, const Vec3& u0c,
                              const std::vector<double>& gx, const std::vector<double>& gw) {
    Vec3 out{0.0, 0.0, 0.0};
    const std::size_t ng = gx.size();
    for (int d = 0; d < 3; ++d) {
        const int a = (d + 1) % 3, b = (d + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            const double nsign = side ? 1.0 : -1.0;
            const double un = nsign * u0c[d]; // u0 . n on this face
            if (un == 0.0) continue;
            Vec3 xp = cell_center;
            xp[d] += nsign * 0.5 * h;
            Vec3 acc{0.0, 0.0, 0.0};
            for (std::size_t qa = 0; qa < ng; ++qa)
                for (std::size_t qb = 0; qb < ng; ++qb) {
                    Vec3 y = xq - xp;
                    y[a] -= gx[qa];
                    y[b] -= gx[qb];
                    const double Q = erf_over_r_hessian(norm(y), c, false).Q;
                    acc += (gw[qa] * gw[qb] * Q) * y;
                }
            // - u0_i * (1/4pi) * oint grad_k psi n_i dS'
            out += (-un / (4.0 * pi)) * acc;
        }
    }
    return out;
}

} // namespace detail

// Initial-value propagation u_k(x,t) = -int u_i(x',0) u_ki(x - x', t) dV' on
// the u0 grid (midpoint cells). The Stokeslet splits into a heat convolution,
// accumulated with separable per-axis weights, and the erf/R dipole, which
// gets midpoint weights except on the 7^3 cell block around the query where
// it is resolved by exact cell-face integrals. The Stokeslet's pressure
// time-slice atom lives at tau = 0 and never fires for t > 0. At order 1 the
// tabulated series correction is added by midpoint where its grid covers the
// separation; outside coverage (including the cut ball) it contributes zero.
inline Vec3 ivp_velocity(const SampledField& u0, const SpaceTimePoint& query, int order = 0,
                         const CorrectionField* correction = nullptr) {
    if (!(query.t > 0.0)) throw validation_error("ivp_velocity: query time must be positive");
    if (!u0.divergence_free) throw validation_error("ivp_velocity: u0 must be labeled divergence-free");
    if (!(u0.nu > 0.0)) throw validation_error("ivp_velocity: u0 must carry a positive viscosity");
    if (order != 0 && order != 1) throw validation_error("ivp_velocity: order must be 0 or 1");
    if (order == 1) {
        if (!correction) throw validation_error("ivp_velocity: order 1 requires a correction field");
        if (std::abs(correction->nu - u0.nu) > 1e-12 * std::max(1.0, std::abs(u0.nu)))
            throw validation_error("ivp_velocity: correction viscosity mismatch");
        if (std::abs(correction->time() - query.t) > 1e-9 * std::max(1.0, std::abs(query.t)))
            throw validation_error("ivp_velocity: correction tabulated at a different time");
    }

    const double umax = max_abs(u0);
    double tail = 0.0;
    for (int i = 0; i < u0.dims[0]; ++i)
        for (int j = 0; j < u0.dims[1]; ++j)
            for (int k = 0; k < u0.dims[2]; ++k) {
                if (i != 0 && i != u0.dims[0] - 1 && j != 0 && j != u0.dims[1] - 1 && k != 0 &&
                    k != u0.dims[2] - 1)
                    continue;
                tail = std::max(tail, max_abs(u0.values[u0.index(i, j, k)]));
            }
    // The canonical blob configuration (sigma = 1 on [-6,6]^3) carries a
    // boundary tail near 2e-7 relative (the centered curl overshoots a
    // Gaussian tail by sinh(xh)/(xh) at x = 6 sigma), so the decay gate sits
    // just above it.
    if (tail > 2.5e-7 * umax)
        throw validation_error("ivp_velocity: grid too small, initial field has not decayed at the boundary");

    const double h = u0.spacing;
    const double t = query.t;
    const double nu = u0.nu;
    const double c = 1.0 / std::sqrt(4.0 * nu * t);

    const auto wx = detail::heat_axis_weights(query.x[0], u0.origin[0], h, u0.dims[0], nu, t);
    const auto wy = detail::heat_axis_weights(query.x[1], u0.origin[1], h, u0.dims[1], nu, t);
    const auto wz = detail::heat_axis_weights(query.x[2], u0.origin[2], h, u0.dims[2], nu, t);

    // Near-cell window: Chebyshev distance <= 3 in index space.
    int win_lo[3], win_hi[3];
    for (int d = 0; d < 3; ++d) {
        const int idx = static_cast<int>(std::lround((query.x[d] - u0.origin[d]) / h));
        win_lo[d] = std::max(0, idx - 3);
        win_hi[d] = std::min(u0.dims[d] - 1, idx + 3);
    }
    const auto near_cell = [&](int i, int j, int k) {
        return i >= win_lo[0] && i <= win_hi[0] && j >= win_lo[1] && j <= win_hi[1] && k >= win_lo[2] &&
               k <= win_hi[2];
    };

    const double w_cell = h * h * h;
    Vec3 out{0.0, 0.0, 0.0};
    for (int i = 0; i < u0.dims[0]; ++i)
        for (int j = 0; j < u0.dims[1]; ++j)
            for (int k = 0; k < u0.dims[2]; ++k) {
                const Vec3& v = u0.values[u0.index(i, j, k)];
                const double wh = wx[static_cast<std::size_t>(i)] * wy[static_cast<std::size_t>(j)] *
                                  wz[static_cast<std::size_t>(k)];
                out += wh * v; // -u0_i (-heat delta_ki)
                if (near_cell(i, j, k)) continue;
                const Vec3 dx = query.x - u0.node(i, j, k);
                const auto hc = detail::erf_over_r_hessian(norm(dx), c, false);
                // -u0_i (-1/4pi)(P dx_k dx_i + Q delta_ki)
                const double pd = hc.P * dot(dx, v);
                const double sc = w_cell / (4.0 * pi);
                for (int m = 0; m < 3; ++m) out[m] += sc * (pd * dx[m] + hc.Q * v[m]);
            }

    std::vector<double> gx, gw;
    gauss_legendre(4, -0.5 * h, 0.5 * h, gx, gw);
    for (int i = win_lo[0]; i <= win_hi[0]; ++i)
        for (int j = win_lo[1]; j <= win_hi[1]; ++j)
            for (int k = win_lo[2]; k <= win_hi[2]; ++k) {
                const Vec3& v = u0.values[u0.index(i, j, k)];
                if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) continue;
                out += detail::dipole_cell_faces(query.x, u0.node(i, j, k), h, c, v, gx, gw);
            }

    if (order == 1) {
        for (int i = 0; i < u0.dims[0]; ++i)
            for (int j = 0; j < u0.dims[1]; ++j)
                for (int k = 0; k < u0.dims[2]; ++k) {
                    const Vec3 dx = query.x - u0.node(i, j, k);
                    if (!covers(*correction, dx)) continue;
                    const Vec3& v = u0.values[u0.index(i, j, k)];
                    for (int m = 0; m < 3; ++m)
                        out[m] -= w_cell * dot(trilinear(correction->grids[m], dx), v);
                }
    }
    return out;
}

// J_i = -int_V u_i(x',0) dV', midpoint rule on the grid.
inline Vec3 force_impulse_initial(const SampledField& u0) {
    const double w = u0.spacing * u0.spacing * u0.spacing;
    Vec3 j{0.0, 0.0, 0.0};
    for (const auto& v : u0.values) j += v;
    return {-w * j[0], -w * j[1], -w * j[2]};
}

// One Eulerlet continuation step: u(x,t) = u(x,t-dt) + lateral single-layer
// integral over the spherinder wall of radius eps. The Eulerlet's point atom
// sits at zero spatial separation, off the wall for any probe inside it, so
// only the smooth dipole part contributes. Densities with caps are rejected:
// the step is defined on the curved part of the surface only.
inline Vec3 continuation_step(const Vec3& prev, const SpaceTimePoint& probe, const SurfaceDensity& density,
                              double eps, double dt) {
    if (!(eps > 0.0) || !(dt > 0.0))
        throw validation_error("continuation_step: eps and dt must be positive");
    detail::check_density(density, "continuation_step");
    const auto& s = density.surface;
    if (s.caps_included.first || s.caps_included.second)
        throw validation_error("continuation_step: density must live on the lateral wall only");
    if (std::abs(s.radius - eps) > 1e-9 * std::max(1.0, eps))
        throw validation_error("continuation_step: surface radius does not match eps");
    if (std::abs((s.t_end - s.t_start) - dt) > 1e-9 * std::max(1.0, dt))
        throw validation_error("continuation_step: surface time span does not match dt");

    Vec3 u = prev;
    for (std::size_t m = 0; m < density.rule.size(); ++m) {
        const double tau = probe.t - density.rule.nodes[m].t;
        if (tau <= 0.0) continue;
        const Mat3 uk = eulerlet(probe.x - density.rule.nodes[m].x, tau, false).u;
        const double w = density.rule.weights[m];
        for (int k = 0; k < 3; ++k) u[k] += w * dot(uk[k], density.samples[m]);
    }
    return u;
}

// Cauchy-Schwarz chain bound: |u(t)| <= |u(t-dt)| + (oint |F|) max|u^E| (1 + f(eps)).
inline double velocity_bound(double prev_bound, double abs_density_integral, double eulerlet_max,
                             double f_eps) {
    if (!(prev_bound >= 0.0) || !(abs_density_integral >= 0.0) || !(eulerlet_max >= 0.0) || !(f_eps >= 0.0))
        throw validation_error("velocity_bound: inputs must be non-negative");
    return prev_bound + abs_density_integral * eulerlet_max * (1.0 + f_eps);
}

struct GaussianBlob {
    double sigma = 1.0;
    double amplitude = 1.0;
};

// Divergence-free sampled fields built as the discrete central curl of an
// analytic vector potential. The potential is evaluated off-grid at node +- h,
// so the centered divergence of the result cancels identically on every
// interior node (difference operators commute on analytic samples) and the
// divergence-free label holds at the rounding floor.
template <class Potential>
    requires std::is_invocable_r_v<Vec3, Potential&, const Vec3&>
SampledField make_divfree_field(Potential&& psi, const Vec3& origin, double spacing,
                                const std::array<int, 3>& dims, double nu) {
    SampledField f = make_grid(origin, spacing, dims);
    f.nu = nu;
    f.divergence_free = true;
    const double inv2h = 1.0 / (2.0 * spacing);
    for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j)
            for (int k = 0; k < dims[2]; ++k) {
                const Vec3 x = f.node(i, j, k);
                Vec3 d[3]; // d[a] = (psi(x + h e_a) - psi(x - h e_a)) / 2h
                for (int a = 0; a < 3; ++a) {
                    Vec3 xp = x, xm = x;
                    xp[a] += spacing;
                    xm[a] -= spacing;
                    const Vec3 pp = psi(xp), pm = psi(xm);
                    d[a] = inv2h * (pp - pm);
                }
                f.values[f.index(i, j, k)] = {d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]};
            }
    return f;
}

inline SampledField make_divfree_field(const GaussianBlob& blob, const Vec3& origin, double spacing,
                                       const std::array<int, 3>& dims, double nu) {
    if (!(blob.sigma > 0.0)) throw validation_error("make_divfree_field: sigma must be positive");
    if (!(spacing > 0.0) || spacing > blob.sigma / 3.0)
        throw validation_error("make_divfree_field: grid too coarse for sigma (need >= 6 nodes across it)");
    const double a = blob.amplitude, s2 = blob.sigma * blob.sigma;
    return make_divfree_field(
        [a, s2](const Vec3& x) -> Vec3 { return {0.0, 0.0, a * exp_clamped(-dot(x, x) / (2.0 * s2))}; },
        origin, spacing, dims, nu);
}

struct FlowProvider {
    std::function<Vec3(const SpaceTimePoint&)> velocity;
    std::function<double(const SpaceTimePoint&)> pressure; // empty means p = 0
};

enum class ResidualMode { linearized, full };

// Central-difference Navier-Stokes residual u_i,0 + u_j u_i,j + p_,i - nu u_i,jj
// at one space-time point. Linearized mode drops the convective term for
// Stokes-level checks. Providers signal stencil points outside their domain
// by throwing; the error propagates.
inline Vec3 pde_residual(const FlowProvider& flow, const SpaceTimePoint& at, double nu, double h,
                         ResidualMode mode = ResidualMode::full) {
    if (!(h > 0.0)) throw validation_error("pde_residual: step must be positive");
    if (!(nu >= 0.0)) throw validation_error("pde_residual: nu must be non-negative");
    if (!flow.velocity) throw validation_error("pde_residual: provider has no velocity");

    const Vec3 u0 = flow.velocity(at);
    const Vec3 utp = flow.velocity({at.t + h, at.x});
    const Vec3 utm = flow.velocity({at.t - h, at.x});
    Vec3 up[3], um[3];
    for (int d = 0; d < 3; ++d) {
        Vec3 xp = at.x, xm = at.x;
        xp[d] += h;
        xm[d] -= h;
        up[d] = flow.velocity({at.t, xp});
        um[d] = flow.velocity({at.t, xm});
    }
    const double inv2h = 1.0 / (2.0 * h), invh2 = 1.0 / (h * h);

    Vec3 res;
    for (int i = 0; i < 3; ++i) {
        double r = (utp[i] - utm[i]) * inv2h;
        for (int d = 0; d < 3; ++d) r -= nu * (up[d][i] - 2.0 * u0[i] + um[d][i]) * invh2;
        if (mode == ResidualMode::full)
            for (int d = 0; d < 3; ++d) r += u0[d] * (up[d][i] - um[d][i]) * inv2h;
        res[i] = r;
    }
    if (flow.pressure) {
        for (int i = 0; i < 3; ++i) {
            Vec3 xp = at.x, xm = at.x;
            xp[i] += h;
            xm[i] -= h;
            res[i] += (flow.pressure({at.t, xp}) - flow.pressure({at.t, xm})) * inv2h;
        }
    }
    return res;
}

} // namespace nslet

#endif
