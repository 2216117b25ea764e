#ifndef NSLET_GEOMETRY_HPP
#define NSLET_GEOMETRY_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "core.hpp"

// Quadrature over the space-time surfaces the library integrates on: balls
// and spheres in space, and the "spherinder" boundary (sphere x time interval
// plus two ball caps). Product Gauss rules throughout: Gauss-Legendre in the
// radius / cos(polar) / time directions and a uniform trapezoid in azimuth,
// so a rule of order q integrates polynomials of total degree <= q exactly.

namespace nslet {

struct QuadratureRule {
    std::vector<SpaceTimePoint> nodes;
    std::vector<double> weights;
    std::vector<Vec4> normals; // empty for volume rules; unit space-time normals for surface rules
    int order = 0;

    std::size_t size() const { return nodes.size(); }
};

struct SpherinderSurface {
    SpaceTimePoint center; // spatial center; .t is informational (interval midpoint)
    double radius = 1.0;
    double t_start = 0.0;
    double t_end = 1.0;
    std::pair<bool, bool> caps_included{true, true}; // {start cap, end cap}
};

inline SpherinderSurface make_spherinder(const Vec3& center, double radius, double t_start, double t_end,
                                         bool cap_start = true, bool cap_end = true) {
    if (!(radius > 0.0)) throw validation_error("spherinder: radius must be positive");
    if (!(t_start < t_end)) throw validation_error("spherinder: t_start must be < t_end");
    SpherinderSurface s;
    s.center = {0.5 * (t_start + t_end), center};
    s.radius = radius;
    s.t_start = t_start;
    s.t_end = t_end;
    s.caps_included = {cap_start, cap_end};
    return s;
}

// Gauss-Legendre nodes/weights on [a, b]; Newton iteration on the Legendre
// recurrence, accurate to machine precision for any practical n.
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw validation_error("gauss_legendre: need at least one node");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        w[i] = w[n - 1 - i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
    }
}

namespace detail {

// Right-handed frame whose third axis is the given pole. pole in {0,1,2}.
inline void pole_frame(int pole, Vec3& ea, Vec3& eb, Vec3& ep) {
    ea = eb = ep = {0, 0, 0};
    ep[pole] = 1.0;
    ea[(pole + 1) % 3] = 1.0;
    eb[(pole + 2) % 3] = 1.0;
}

} // namespace detail

// Surface rule on the sphere |x - center| = radius. Exact for spherical
// harmonics of degree <= order. pole selects the polar axis used by the
// product construction; the weight multiset does not depend on it.
inline QuadratureRule sphere_rule(const Vec3& center, double radius, int order, int pole = 2) {
    if (!(radius > 0.0)) throw validation_error("sphere_rule: radius must be positive");
    if (order < 0) throw validation_error("sphere_rule: order must be >= 0");
    const int ntheta = std::max(1, (order + 2) / 2);
    const int nphi = 2 * ntheta;
    std::vector<double> cu, wu;
    gauss_legendre(ntheta, -1.0, 1.0, cu, wu);
    Vec3 ea, eb, ep;
    detail::pole_frame(pole, ea, eb, ep);

    QuadratureRule rule;
    rule.order = order;
    rule.nodes.reserve(static_cast<std::size_t>(ntheta) * nphi);
    rule.weights.reserve(rule.nodes.capacity());
    rule.normals.reserve(rule.nodes.capacity());
    const double wphi = 2.0 * pi / nphi;
    for (int iu = 0; iu < ntheta; ++iu) {
        const double c = cu[iu];
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (int ip = 0; ip < nphi; ++ip) {
            const double phi = (ip + 0.5) * 2.0 * pi / nphi;
            const Vec3 n = std::cos(phi) * (s * ea) + std::sin(phi) * (s * eb) + c * ep;
            rule.nodes.push_back({0.0, center + radius * n});
            rule.weights.push_back(wu[iu] * wphi * radius * radius);
            rule.normals.push_back({0.0, n[0], n[1], n[2]});
        }
    }
    return rule;
}

// Volume rule on the ball |x - center| <= radius; exact for polynomials of
// total degree <= order.
inline QuadratureRule ball_rule(const Vec3& center, double radius, int order, int pole = 2) {
    if (!(radius > 0.0)) throw validation_error("ball_rule: radius must be positive");
    if (order < 0) throw validation_error("ball_rule: order must be >= 0");
    const int nr = std::max(1, (order + 4) / 2); // integrates r^(order+2) exactly
    std::vector<double> r, wr;
    gauss_legendre(nr, 0.0, radius, r, wr);
    const QuadratureRule dirs = sphere_rule({0, 0, 0}, 1.0, order, pole);

    QuadratureRule rule;
    rule.order = order;
    rule.nodes.reserve(dirs.size() * nr);
    rule.weights.reserve(dirs.size() * nr);
    for (int ir = 0; ir < nr; ++ir) {
        for (std::size_t id = 0; id < dirs.size(); ++id) {
            rule.nodes.push_back({0.0, center + r[ir] * dirs.nodes[id].x});
            rule.weights.push_back(wr[ir] * r[ir] * r[ir] * dirs.weights[id]);
        }
    }
    return rule;
}

// Boundary rule for a spherinder: lateral wall (sphere x Gauss rule in time,
// purely spatial normals) plus the included ball caps (normals -/+ time axis
// at t_start / t_end). Weights carry the full surface measure.
inline QuadratureRule spherinder_rule(const SpherinderSurface& s, int spatial_order, int time_order, int pole = 2) {
    if (!(s.radius > 0.0)) throw validation_error("spherinder_rule: radius must be positive");
    if (!(s.t_start < s.t_end)) throw validation_error("spherinder_rule: t_start must be < t_end");
    if (time_order < 1) throw validation_error("spherinder_rule: time_order must be >= 1");

    QuadratureRule rule;
    rule.order = spatial_order;

    const QuadratureRule wall = sphere_rule(s.center.x, s.radius, spatial_order, pole);
    std::vector<double> tq, wt;
    gauss_legendre(time_order, s.t_start, s.t_end, tq, wt);
    for (int it = 0; it < time_order; ++it) {
        for (std::size_t i = 0; i < wall.size(); ++i) {
            rule.nodes.push_back({tq[it], wall.nodes[i].x});
            rule.weights.push_back(wt[it] * wall.weights[i]);
            rule.normals.push_back(wall.normals[i]);
        }
    }
    const auto add_cap = [&](double t, double nt) {
        const QuadratureRule cap = ball_rule(s.center.x, s.radius, spatial_order, pole);
        for (std::size_t i = 0; i < cap.size(); ++i) {
            rule.nodes.push_back({t, cap.nodes[i].x});
            rule.weights.push_back(cap.weights[i]);
            rule.normals.push_back({nt, 0.0, 0.0, 0.0});
        }
    };
    if (s.caps_included.first) add_cap(s.t_start, -1.0);
    if (s.caps_included.second) add_cap(s.t_end, +1.0);
    return rule;
}

} // namespace nslet

#endif
