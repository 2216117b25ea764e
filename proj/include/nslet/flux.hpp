#ifndef NSLET_FLUX_HPP
#define NSLET_FLUX_HPP

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "kernels.hpp"
#include "parallel.hpp"

// Distributional flux identities over spherinder boundaries. Smooth kernel
// parts are integrated by product quadrature; atoms contribute through the
// closed-form rules below:
//
//   * a space-point velocity atom inside a cap ball adds its tensor weight
//     times H(t_cap) with the cap's orientation;
//   * a time-slice pressure atom collapses the time integral and leaves its
//     spatial profile integrated over the lateral sphere (it fires only when
//     the slice lies strictly inside the time interval).
//
// All results are stated for outward normals around the kernel origin.

namespace nslet {

struct QuadratureOrders {
    int spatial = 24;
    int time = 24;
    int pole = 2; // sphere-frame axis used to lay out nodes; results must not depend on it
};

struct FluxReport {
    Mat3 matrix = zero_mat3(); // always atom_part + smooth_part, summed entrywise
    Mat3 atom_part = zero_mat3();
    Mat3 smooth_part = zero_mat3();
    QuadratureOrders orders;
    double estimated_error = 0.0; // max-abs drift against the half-order evaluation
};

using VelocityField = std::function<Vec3(const SpaceTimePoint&)>;
using StressField = std::function<Mat3(const SpaceTimePoint&)>;

// Lateral-sphere integral of the pressure atom's spatial profile against the
// outward normal: the time-collapsed atom rule. Equals -(1/3) d_ki up to
// quadrature rounding; the end-cap dipole integral is its negative, because
// in divergence form the cap ball integral of -(1/4pi)[1/R]_{,ki} becomes the
// bounding-sphere integral of -profile_k n_i (the principal value averages to
// zero and the concentrated part of the second derivative is exactly the
// boundary term).
inline Mat3 pressure_atom_lateral_flux(double radius, int spatial_order, int pole = 2) {
    const auto rule = sphere_rule({0.0, 0.0, 0.0}, radius, spatial_order, pole);
    return parallel_reduce(rule.size(), zero_mat3(), [&](std::size_t q) {
        const Vec3 prof = pressure_slice_profile(rule.nodes[q].x);
        Mat3 m;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                m[k][i] = rule.weights[q] * prof[k] * rule.normals[q][1 + i];
        return m;
    });
}

namespace detail {

inline void require_origin_surface(const SpherinderSurface& s) {
    if (max_abs(s.center.x) > 1e-12 * s.radius)
        throw validation_error("flux: surface must be centered at the kernel origin");
    if (s.t_start == 0.0 || s.t_end == 0.0)
        throw validation_error("flux: a cap may not sit exactly on the kernel's time origin");
}

inline QuadratureOrders halved(const QuadratureOrders& o) {
    return {std::max(2, o.spatial / 2), std::max(2, o.time / 2), o.pole};
}

inline bool pressure_atom_fires(const SpherinderSurface& s) {
    return s.t_start < 0.0 && s.t_end > 0.0;
}

// caps with orientation sign, honoring caps_included
inline std::vector<std::pair<double, double>> oriented_caps(const SpherinderSurface& s) {
    std::vector<std::pair<double, double>> caps;
    if (s.caps_included.first) caps.push_back({s.t_start, -1.0});
    if (s.caps_included.second) caps.push_back({s.t_end, +1.0});
    return caps;
}

// Time panels for lateral quadrature of Stokes-type integrands, clipped to
// tau > 0. The e^{-R^2/(4 nu tau)} wall transition is graded by splitting at
// fixed multiples of the diffusion time R^2/(4 nu); plain Gauss-Legendre loses
// its spectral rate across that essential decay if applied to [0, t] whole.
inline std::vector<std::pair<double, double>> lateral_time_panels(const SpherinderSurface& s,
                                                                  double nu) {
    std::vector<std::pair<double, double>> panels;
    const double lo = std::max(s.t_start, 0.0), hi = s.t_end;
    if (!(hi > lo)) return panels;
    const double td = s.radius * s.radius / (4.0 * nu);
    std::vector<double> pts{lo};
    for (const double b : {0.1 * td, td, 10.0 * td})
        if (b > lo && b < hi) pts.push_back(b);
    pts.push_back(hi);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) panels.push_back({pts[i], pts[i + 1]});
    return panels;
}

// Plain lateral window for the eulerlet ops (time-independent integrands for
// tau > 0; the only care needed is clipping away the Heaviside jump).
inline std::vector<std::pair<double, double>> lateral_window(const SpherinderSurface& s) {
    std::vector<std::pair<double, double>> panels;
    const double lo = std::max(s.t_start, 0.0), hi = s.t_end;
    if (hi > lo) panels.push_back({lo, hi});
    return panels;
}

// Integrates f(node, t, spatial normal, weight) over sphere x time panels.
template <class Slice>
Mat3 lateral_integral(const SpherinderSurface& s,
                      const std::vector<std::pair<double, double>>& panels, int spatial_order,
                      int time_order, int pole, const Slice& slice) {
    Mat3 total = zero_mat3();
    const auto sphere = sphere_rule(s.center.x, s.radius, spatial_order, pole);
    std::vector<double> tx, tw;
    for (const auto& [a, b] : panels) {
        gauss_legendre(time_order, a, b, tx, tw);
        const std::size_t nq = sphere.size();
        total += parallel_reduce(static_cast<std::size_t>(time_order) * nq, zero_mat3(),
                                 [&](std::size_t idx) {
                                     const std::size_t it = idx / nq, iq = idx % nq;
                                     const Vec3& x = sphere.nodes[iq].x;
                                     const Vec3 n{sphere.normals[iq][1], sphere.normals[iq][2],
                                                  sphere.normals[iq][3]};
                                     return slice(x, tx[it], n, tw[it] * sphere.weights[iq]);
                                 });
    }
    return total;
}

struct FluxParts {
    Mat3 atom = zero_mat3();
    Mat3 smooth = zero_mat3();
};

template <class Eval>
FluxReport assemble_report(const QuadratureOrders& orders, const Eval& eval) {
    const FluxParts full = eval(orders);
    const FluxParts half = eval(halved(orders));
    FluxReport r;
    r.atom_part = full.atom;
    r.smooth_part = full.smooth;
    r.matrix = full.atom + full.smooth;
    r.orders = orders;
    r.estimated_error = max_abs(r.matrix - (half.atom + half.smooth));
    return r;
}

} // namespace detail

// Flux of (u^E_ki n_0 + p^E_k n_i) ds over the spherinder boundary. The velocity
// term lives on the caps (only n_0 is nonzero there): the point atom by rule,
// the smooth dipole in divergence form over the bounding sphere. The pressure
// atom fires on the lateral wall when the time origin is interior. Encloses
// the origin event  ->  -d_ki; time window entirely on one side of 0  ->  0.
inline FluxReport euler_momentum_flux(const SpherinderSurface& s,
                                      const QuadratureOrders& orders = {}) {
    detail::require_origin_surface(s);
    return detail::assemble_report(orders, [&](const QuadratureOrders& o) {
        detail::FluxParts parts;
        const Mat3 pflux = pressure_atom_lateral_flux(s.radius, o.spatial, o.pole);
        for (const auto& [t_cap, sign] : detail::oriented_caps(s)) {
            const double h = heaviside(t_cap);
            if (h == 0.0) continue;
            parts.atom += (-sign * h) * identity_mat3();
            parts.smooth += (-sign * h) * pflux;
        }
        if (detail::pressure_atom_fires(s)) parts.atom += pflux;
        return parts;
    });
}

// Flux of nu u^E_{ki,j} n_j ds over the lateral wall -> 0 (slice-wise, by the
// harmonicity of the dipole away from the origin).
inline FluxReport euler_viscous_flux(const SpherinderSurface& s, const QuadratureOrders& orders,
                                     double nu) {
    detail::require_origin_surface(s);
    if (!(nu > 0.0)) throw validation_error("euler_viscous_flux: nu must be positive");
    return detail::assemble_report(orders, [&](const QuadratureOrders& o) {
        detail::FluxParts parts;
        parts.smooth = detail::lateral_integral(
            s, detail::lateral_window(s), o.spatial, o.time, o.pole,
            [&](const Vec3& x, double t, const Vec3& n, double w) {
                const auto kv = eulerlet(x, t, true);
                Mat3 m;
                for (int k = 0; k < 3; ++k)
                    for (int i = 0; i < 3; ++i)
                        m[k][i] = w * nu * dot((*kv.grad_u)[k][i], n);
                return m;
            });
        return parts;
    });
}

// Flux of (u^E_kj u^E_ki n_j + p^B_k n_i) ds over the lateral wall -> 0 (parity of
// the even dipole squared against the odd normal).
inline FluxReport euler_bernoulli_flux(const SpherinderSurface& s,
                                       const QuadratureOrders& orders = {}) {
    detail::require_origin_surface(s);
    return detail::assemble_report(orders, [&](const QuadratureOrders& o) {
        detail::FluxParts parts;
        parts.smooth = detail::lateral_integral(
            s, detail::lateral_window(s), o.spatial, o.time, o.pole,
            [&](const Vec3& x, double t, const Vec3& n, double w) {
                const auto kv = eulerlet(x, t, false);
                Mat3 m;
                for (int k = 0; k < 3; ++k) {
                    const double un = dot(kv.u[k], n);
                    for (int i = 0; i < 3; ++i)
                        m[k][i] = w * (un * kv.u[k][i] + kv.p[k] * n[i]);
                }
                return m;
            });
        return parts;
    });
}

// Flux of (u^S_ki n_0 + p^S_k n_i - nu u^S_{ki,j} n_j) ds = -d_ki. The Stokeslet is
// smooth for tau > 0, so the caps are genuine ball integrals of the velocity;
// the only atom is the pressure slice. The smooth pressure vanishes.
inline FluxReport stokeslet_total_flux(const SpherinderSurface& s, const QuadratureOrders& orders,
                                       double nu) {
    detail::require_origin_surface(s);
    if (!(nu > 0.0)) throw validation_error("stokeslet_total_flux: nu must be positive");
    return detail::assemble_report(orders, [&](const QuadratureOrders& o) {
        detail::FluxParts parts;
        if (detail::pressure_atom_fires(s))
            parts.atom += pressure_atom_lateral_flux(s.radius, o.spatial, o.pole);
        for (const auto& [t_cap, sign] : detail::oriented_caps(s)) {
            if (!(t_cap > 0.0)) continue;
            const auto ball = ball_rule(s.center.x, s.radius, o.spatial, o.pole);
            parts.smooth += parallel_reduce(ball.size(), zero_mat3(), [&](std::size_t q) {
                return (sign * ball.weights[q]) * stokeslet(ball.nodes[q].x, t_cap, nu, false).u;
            });
        }
        parts.smooth += detail::lateral_integral(
            s, detail::lateral_time_panels(s, nu), o.spatial, o.time, o.pole,
            [&](const Vec3& x, double t, const Vec3& n, double w) {
                const auto kv = stokeslet(x, t, nu, true);
                Mat3 m;
                for (int k = 0; k < 3; ++k)
                    for (int i = 0; i < 3; ++i)
                        m[k][i] = -w * nu * dot((*kv.grad_u)[k][i], n);
                return m;
            });
        return parts;
    });
}

// Near-point Green identity over a small backward spherinder around `center`:
//
//   result_k = -int [ u_i u^E_ki d_{0J} + u_j p^E_k - nu u_i u^E_{ki,j}
//                    - u^E_ki tau_ij ] n_J ds'
//
// with the kernel evaluated at (center - node) and derivatives taken in the
// surface variables. Returns -u(center) + O(R) for smooth fields (T = R is
// the intended scaling). The bottom cap carries the point atom (-u at the cap
// time) and the concentrated third of the dipole; the dipole's principal
// value is integrated by symmetric subtraction; the pressure slice collapses
// onto the top of the interval.
inline Vec3 green_identity_near(const VelocityField& u, const StressField& stress,
                                const SpaceTimePoint& center, double R, double T,
                                const QuadratureOrders& orders = {}, double nu = 1.0) {
    if (!(R > 0.0) || !(T > 0.0))
        throw validation_error("green_identity_near: degenerate surface");
    const double t0 = center.t - T, t1 = center.t;
    Vec3 out{0.0, 0.0, 0.0};

    // bottom cap (n_0 = -1): atom, concentrated dipole part, subtracted PV
    const Vec3 u0 = u({t0, center.x});
    out += (-2.0 / 3.0) * u0;
    const auto ball = ball_rule({0.0, 0.0, 0.0}, R, orders.spatial, orders.pole);
    out += parallel_reduce(ball.size(), Vec3{0.0, 0.0, 0.0}, [&](std::size_t q) {
        const Vec3& y = ball.nodes[q].x; // kernel argument; surface point is center - y
        const Vec3 du = u({t0, center.x - y}) - u0;
        const double r2 = dot(y, y), r5 = r2 * r2 * std::sqrt(r2);
        Vec3 v;
        for (int k = 0; k < 3; ++k) {
            double acc = 0.0;
            for (int i = 0; i < 3; ++i) acc += (3.0 * y[k] * y[i] - (k == i ? r2 : 0.0)) * du[i];
            v[k] = -ball.weights[q] * acc / (4.0 * pi * r5);
        }
        return v;
    });

    const auto sphere = sphere_rule(center.x, R, orders.spatial, orders.pole);

    // pressure slice at t' = t1
    out += parallel_reduce(sphere.size(), Vec3{0.0, 0.0, 0.0}, [&](std::size_t q) {
        const Vec3& xp = sphere.nodes[q].x;
        const Vec3 n{sphere.normals[q][1], sphere.normals[q][2], sphere.normals[q][3]};
        const Vec3 prof = pressure_slice_profile(center.x - xp);
        return (-sphere.weights[q] * dot(u({t1, xp}), n)) * prof;
    });

    // lateral wall: viscous and stress terms
    std::vector<double> tx, tw;
    gauss_legendre(orders.time, t0, t1, tx, tw);
    const std::size_t nq = sphere.size();
    out += parallel_reduce(
        static_cast<std::size_t>(orders.time) * nq, Vec3{0.0, 0.0, 0.0}, [&](std::size_t idx) {
            const std::size_t it = idx / nq, iq = idx % nq;
            const Vec3& xp = sphere.nodes[iq].x;
            const Vec3 n{sphere.normals[iq][1], sphere.normals[iq][2], sphere.normals[iq][3]};
            const double tp = tx[it];
            const auto kv = eulerlet(center.x - xp, t1 - tp, true);
            const Vec3 uv = u({tp, xp});
            const Mat3 tau = stress({tp, xp});
            Vec3 v{0.0, 0.0, 0.0};
            for (int k = 0; k < 3; ++k) {
                double acc = 0.0;
                for (int i = 0; i < 3; ++i) {
                    // u^E_{ki,j} in surface variables flips the argument gradient
                    acc -= nu * uv[i] * dot((*kv.grad_u)[k][i], n);
                    acc += kv.u[k][i] * dot(tau[i], n);
                }
                v[k] = (tw[it] * sphere.weights[iq]) * acc;
            }
            return v;
        });
    return out;
}

} // namespace nslet

#endif
