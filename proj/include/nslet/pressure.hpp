#ifndef NSLET_PRESSURE_HPP
#define NSLET_PRESSURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

// Pressure recovery through the Helmholtz decomposition:
//   phi = (1/4pi) int_S u_i n_i / |R-R'| ds'
//   h   = -(1/4pi) int_V u_{j;i} u_{i;j} / |R-R'| dV'
//         + (1/4pi) int_S u_j u_{i;j} n_i / |R-R'| ds'
//   p   = -phi_,0 - h
// on a box domain whose faces sit far enough out that the truncated exterior
// stays below quadrature error. For fields with an interior singularity the
// domain may exclude a ball around it; the ball's sphere then joins S with
// inward-pointing normals. Because the two integrals cancel almost completely
// (h is orders of magnitude smaller than either piece near a singularity),
// the shell between the sphere and the surrounding grid cells is integrated
// with a dedicated smooth rule rather than left to the midpoint grid.

namespace nslet {

struct Box {
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{1.0, 1.0, 1.0};
};

struct HelmholtzOrders {
    int volume_cells = 24;    // midpoint cells per axis
    int surface_order = 12;   // tensor Gauss-Legendre nodes per face axis
    int correction_order = 8; // per-face nodes for exact near-probe cell masses
    int near_probe_cells = 2; // half-width, in cells, of the exact-mass block
    double fd_step = 1e-3;    // centered step for provider gradients
};

// Ball removed from the integration domain (radius 0 keeps the plain box).
// The grid drops every cell inside the axis-aligned cube of half-width
// cube_halfwidth around the center; the cube-minus-ball shell is covered by
// six projected panels with a radial Gauss-Legendre rule each, which keeps
// the steep integrand away from the midpoint cells entirely. The cube must
// align with cell boundaries, so the center sits on the cell lattice and the
// half-width is a multiple of the spacing (0 picks the smallest that fits
// the ball).
struct ExcludedBall {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 0.0;
    double cube_halfwidth = 0.0;
    int shell_angular = 0; // per panel axis; 0 derives from volume_cells
    int shell_radial = 0;  // per ray; 0 derives from volume_cells
    int sphere_order = 0;  // sphere surface rule; 0 derives from surface_order
    int ring_cells = 2;    // cell layers around the cube upgraded from midpoint
    int ring_rule = 3;     // Gauss-Legendre nodes per axis in those cells
};

using VelocityProvider = std::function<Vec3(const SpaceTimePoint&)>;

// phi and h over one probe set at one time stamp; recover_pressure pairs two
// stamps dt apart for the centered phi_,0. The h split is kept because the
// relative size of its volume and surface parts is worth reporting.
struct PotentialPair {
    std::vector<Vec3> probes;
    double time = 0.0;
    std::vector<double> phi;
    std::vector<double> h;
    std::vector<double> h_volume;
    std::vector<double> h_surface;
};

namespace detail {

// int_cell 1/|y - p| dV over an axis-aligned cell via the divergence theorem:
// div (y-p)/|y-p| = 2/|y-p|, so the mass equals (1/2) oint (y-p).n / |y-p| dS,
// a bounded integrand on the faces. Valid for p inside or outside the cell,
// as long as it is not on a face.
inline double inv_r_cell_mass(const Vec3& p, const Vec3& clo, const Vec3& chi, int order) {
    double mass = 0.0;
    for (int d = 0; d < 3; ++d) {
        const int a = (d + 1) % 3, b = (d + 2) % 3;
        std::vector<double> xa, wa, xb, wb;
        gauss_legendre(order, clo[a], chi[a], xa, wa);
        gauss_legendre(order, clo[b], chi[b], xb, wb);
        for (int side = 0; side < 2; ++side) {
            const double yd = side ? chi[d] : clo[d];
            const double nd = side ? 1.0 : -1.0;
            for (std::size_t qa = 0; qa < xa.size(); ++qa)
                for (std::size_t qb = 0; qb < xb.size(); ++qb) {
                    Vec3 y;
                    y[d] = yd;
                    y[a] = xa[qa];
                    y[b] = xb[qb];
                    const Vec3 r = y - p;
                    mass += 0.5 * wa[qa] * wb[qb] * nd * r[d] / norm(r);
                }
        }
    }
    return mass;
}

inline Mat3 fd_gradient(const VelocityProvider& u, const Vec3& x, double t, double step) {
    Mat3 g; // g[i][j] = du_i/dx_j
    for (int j = 0; j < 3; ++j) {
        Vec3 xp = x, xm = x;
        xp[j] += step;
        xm[j] -= step;
        const Vec3 up = u({t, xp}), um = u({t, xm});
        for (int i = 0; i < 3; ++i) g[i][j] = (up[i] - um[i]) / (2.0 * step);
    }
    return g;
}

inline double grad_trace(const VelocityProvider& u, const Vec3& x, double t, double step) {
    const Mat3 g = fd_gradient(u, x, t, step);
    double tr = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) tr += g[a][b] * g[b][a];
    return tr;
}

} // namespace detail

inline PotentialPair helmholtz_potentials(const VelocityProvider& u, const Box& box,
                                          const std::vector<Vec3>& probes, const HelmholtzOrders& orders,
                                          double time, const ExcludedBall& hole = {}) {
    if (!u) throw validation_error("helmholtz_potentials: no velocity provider");
    for (int d = 0; d < 3; ++d)
        if (!(box.hi[d] > box.lo[d])) throw validation_error("helmholtz_potentials: degenerate box");
    if (orders.volume_cells < 2 || orders.surface_order < 1 || orders.correction_order < 1 ||
        orders.near_probe_cells < 1 || !(orders.fd_step > 0.0))
        throw validation_error("helmholtz_potentials: invalid orders");

    const int n = orders.volume_cells;
    Vec3 s; // cell spacing per axis
    for (int d = 0; d < 3; ++d) s[d] = (box.hi[d] - box.lo[d]) / n;
    const double smax = std::max(s[0], std::max(s[1], s[2]));
    const double vcell = s[0] * s[1] * s[2];

    const bool holed = hole.radius > 0.0;
    double halfwidth = 0.0;
    if (holed) {
        for (int d = 0; d < 3; ++d)
            if (std::abs(s[d] - s[0]) > 1e-12 * s[0])
                throw validation_error("helmholtz_potentials: excluded ball needs cubic cells");
        for (int d = 0; d < 3; ++d) {
            const double idx = (hole.center[d] - box.lo[d]) / s[0];
            if (std::abs(idx - std::round(idx)) > 1e-9)
                throw validation_error("helmholtz_potentials: ball center off the cell lattice");
        }
        halfwidth = hole.cube_halfwidth > 0.0 ? hole.cube_halfwidth
                                              : s[0] * std::ceil(hole.radius / s[0] - 1e-12);
        const double m = halfwidth / s[0];
        if (std::abs(m - std::round(m)) > 1e-9 || std::round(m) < 1.0)
            throw validation_error("helmholtz_potentials: cube half-width must be a positive cell multiple");
        if (halfwidth < hole.radius * (1.0 - 1e-12))
            throw validation_error("helmholtz_potentials: cube half-width smaller than the ball");
        for (int d = 0; d < 3; ++d)
            if (hole.center[d] - halfwidth < box.lo[d] + 2.0 * smax ||
                hole.center[d] + halfwidth > box.hi[d] - 2.0 * smax)
                throw validation_error("helmholtz_potentials: excluded region too close to the surface");
    }

    for (const auto& p : probes) {
        for (int d = 0; d < 3; ++d)
            if (p[d] - box.lo[d] < 2.0 * smax || box.hi[d] - p[d] < 2.0 * smax)
                throw validation_error("helmholtz_potentials: probe too close to the surface");
        if (holed) {
            const Vec3 r = p - hole.center;
            const double cheb = std::max(std::abs(r[0]), std::max(std::abs(r[1]), std::abs(r[2])));
            if (cheb < halfwidth + smax - 1e-12)
                throw validation_error("helmholtz_potentials: probe too close to the excluded region");
        }
    }

    const auto inside_cube = [&](const Vec3& x) {
        if (!holed) return false;
        for (int d = 0; d < 3; ++d)
            if (std::abs(x[d] - hole.center[d]) > halfwidth) return false;
        return true;
    };

    // Probe-independent field data: W = u_{j;i} u_{i;j} at the volume nodes
    // (cells under the excluded cube are dropped), the shell nodes between the
    // ball and the cube, and (u.n, u_j u_{i;j} n_i) at the surface nodes.
    // Cells in a thin ring around the cube see the steep side of W, so they
    // carry a tensor sub-rule instead of the midpoint value.
    std::vector<double> wvol(static_cast<std::size_t>(n) * n * n, 0.0);
    std::vector<Vec3> vnode(wvol.size());
    std::vector<char> dropped(wvol.size(), 0);
    std::vector<std::ptrdiff_t> ring_of(wvol.size(), -1);
    std::vector<Vec3> ringx;
    std::vector<double> ringw; // sub-node weight with W folded in
    std::size_t ring_nodes = 0;
    if (holed) {
        if (hole.ring_cells < 0 || hole.ring_rule < 1)
            throw validation_error("helmholtz_potentials: invalid ring orders");
        const int rr = hole.ring_rule;
        ring_nodes = static_cast<std::size_t>(rr) * rr * rr;
    }
    {
        std::size_t m = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k, ++m) {
                    const Vec3 x{box.lo[0] + (i + 0.5) * s[0], box.lo[1] + (j + 0.5) * s[1],
                                 box.lo[2] + (k + 0.5) * s[2]};
                    vnode[m] = x;
                    if (inside_cube(x)) {
                        dropped[m] = 1;
                        continue;
                    }
                    wvol[m] = detail::grad_trace(u, x, time, orders.fd_step);
                    if (!holed) continue;
                    const Vec3 r = x - hole.center;
                    const double cheb = std::max(std::abs(r[0]), std::max(std::abs(r[1]), std::abs(r[2])));
                    if (cheb > halfwidth + hole.ring_cells * smax) continue;
                    ring_of[m] = static_cast<std::ptrdiff_t>(ringx.size());
                    std::vector<double> xs[3], ws[3];
                    for (int d = 0; d < 3; ++d)
                        gauss_legendre(hole.ring_rule, x[d] - 0.5 * s[d], x[d] + 0.5 * s[d], xs[d], ws[d]);
                    for (int qi = 0; qi < hole.ring_rule; ++qi)
                        for (int qj = 0; qj < hole.ring_rule; ++qj)
                            for (int qk = 0; qk < hole.ring_rule; ++qk) {
                                const Vec3 xq{xs[0][qi], xs[1][qj], xs[2][qk]};
                                ringx.push_back(xq);
                                ringw.push_back(ws[0][qi] * ws[1][qj] * ws[2][qk] *
                                                detail::grad_trace(u, xq, time, orders.fd_step));
                            }
                }
    }

    // Shell between the ball and the cube: project each cube face onto
    // directions (solid angle b/|y|^3 dA) and run Gauss-Legendre radially from
    // the sphere to the face point, which is exactly where the ray exits.
    std::vector<Vec3> shellx;
    std::vector<double> shellw; // weight with W already folded in
    if (holed) {
        // the shell rule is spectral, so the derived orders saturate early
        const int na = hole.shell_angular > 0 ? hole.shell_angular : std::clamp(n / 2, 8, 32);
        const int nr = hole.shell_radial > 0 ? hole.shell_radial : std::clamp(n / 4, 6, 16);
        std::vector<double> ya, wa, tr, wr;
        gauss_legendre(na, -halfwidth, halfwidth, ya, wa);
        shellx.reserve(static_cast<std::size_t>(6) * na * na * nr);
        shellw.reserve(shellx.capacity());
        for (int d = 0; d < 3; ++d) {
            const int a = (d + 1) % 3, e = (d + 2) % 3;
            for (int side = 0; side < 2; ++side)
                for (int qa = 0; qa < na; ++qa)
                    for (int qb = 0; qb < na; ++qb) {
                        Vec3 y;
                        y[d] = side ? halfwidth : -halfwidth;
                        y[a] = ya[qa];
                        y[e] = ya[qb];
                        const double ylen = norm(y);
                        const Vec3 omega = (1.0 / ylen) * y;
                        const double dsolid = wa[qa] * wa[qb] * halfwidth / (ylen * ylen * ylen);
                        gauss_legendre(nr, hole.radius, ylen, tr, wr);
                        for (int q = 0; q < nr; ++q) {
                            const Vec3 x = hole.center + tr[q] * omega;
                            shellx.push_back(x);
                            shellw.push_back(dsolid * wr[q] * tr[q] * tr[q] *
                                             detail::grad_trace(u, x, time, orders.fd_step));
                        }
                    }
        }
    }

    struct FaceNode {
        Vec3 x;
        double w = 0.0;
        double un = 0.0;     // u . n
        double conv_n = 0.0; // u_j u_{i;j} n_i
    };
    std::vector<FaceNode> fnodes;
    fnodes.reserve(static_cast<std::size_t>(6) * orders.surface_order * orders.surface_order);
    const auto push_surface = [&](const Vec3& x, double w, const Vec3& normal) {
        FaceNode fn;
        fn.x = x;
        fn.w = w;
        const Vec3 uv = u({time, x});
        const Mat3 g = detail::fd_gradient(u, x, time, orders.fd_step);
        fn.un = dot(uv, normal);
        fn.conv_n = dot(apply(g, uv), normal); // (u.grad)u . n
        fnodes.push_back(fn);
    };
    for (int d = 0; d < 3; ++d) {
        const int a = (d + 1) % 3, b = (d + 2) % 3;
        std::vector<double> xa, wa, xb, wb;
        gauss_legendre(orders.surface_order, box.lo[a], box.hi[a], xa, wa);
        gauss_legendre(orders.surface_order, box.lo[b], box.hi[b], xb, wb);
        for (int side = 0; side < 2; ++side) {
            Vec3 normal{0.0, 0.0, 0.0};
            normal[d] = side ? 1.0 : -1.0;
            for (std::size_t qa = 0; qa < xa.size(); ++qa)
                for (std::size_t qb = 0; qb < xb.size(); ++qb) {
                    Vec3 x;
                    x[d] = side ? box.hi[d] : box.lo[d];
                    x[a] = xa[qa];
                    x[b] = xb[qb];
                    push_surface(x, wa[qa] * wb[qb], normal);
                }
        }
    }
    if (holed) {
        const int so = hole.sphere_order > 0 ? hole.sphere_order
                                             : std::clamp(2 * orders.surface_order, 12, 40);
        const auto srule = sphere_rule(hole.center, hole.radius, so);
        for (std::size_t q = 0; q < srule.nodes.size(); ++q) {
            const Vec4& nq = srule.normals[q]; // (t, x1, x2, x3); flip toward the ball
            push_surface(srule.nodes[q].x, srule.weights[q], {-nq[1], -nq[2], -nq[3]});
        }
    }

    PotentialPair out;
    out.probes = probes;
    out.time = time;
    out.phi.reserve(probes.size());
    out.h.reserve(probes.size());
    out.h_volume.reserve(probes.size());
    out.h_surface.reserve(probes.size());

    const double inv4pi = 1.0 / (4.0 * pi);
    for (const auto& p : probes) {
        double phi = 0.0, hs = 0.0;
        for (const auto& fn : fnodes) {
            const double kern = 1.0 / norm(p - fn.x);
            phi += fn.w * fn.un * kern;
            hs += fn.w * fn.conv_n * kern;
        }
        phi *= inv4pi;
        hs *= inv4pi;

        // Cells around the probe get the exact 1/|p-x| mass so the kernel's
        // own curvature never touches the midpoint rule; W still enters at
        // the cell center.
        int own[3];
        for (int d = 0; d < 3; ++d)
            own[d] = std::clamp(static_cast<int>(std::floor((p[d] - box.lo[d]) / s[d])), 0, n - 1);
        const int near = orders.near_probe_cells;

        double hv = 0.0;
        std::size_t m = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k, ++m) {
                    if (dropped[m]) continue;
                    if (std::abs(i - own[0]) <= near && std::abs(j - own[1]) <= near &&
                        std::abs(k - own[2]) <= near) {
                        const Vec3 clo{box.lo[0] + i * s[0], box.lo[1] + j * s[1],
                                       box.lo[2] + k * s[2]};
                        hv += wvol[m] * detail::inv_r_cell_mass(p, clo, clo + s, orders.correction_order);
                    } else if (ring_of[m] >= 0) {
                        const std::size_t q0 = static_cast<std::size_t>(ring_of[m]);
                        for (std::size_t q = q0; q < q0 + ring_nodes; ++q)
                            hv += ringw[q] / norm(p - ringx[q]);
                    } else {
                        hv += vcell * wvol[m] / norm(p - vnode[m]);
                    }
                }
        for (std::size_t q = 0; q < shellx.size(); ++q) hv += shellw[q] / norm(p - shellx[q]);
        hv *= -inv4pi;

        out.phi.push_back(phi);
        out.h_volume.push_back(hv);
        out.h_surface.push_back(hs);
        out.h.push_back(hv + hs);
    }
    return out;
}

// p = -(phi(t+dt/2) - phi(t-dt/2))/dt - h(t), with h at the midpoint taken as
// the average of the two stamps (second-order in dt, like the difference).
inline std::vector<double> recover_pressure(const PotentialPair& minus, const PotentialPair& plus,
                                            double dt) {
    if (!(dt > 0.0)) throw validation_error("recover_pressure: dt must be positive");
    if (minus.probes.size() != plus.probes.size() || minus.phi.size() != plus.phi.size() ||
        minus.h.size() != plus.h.size() || minus.phi.size() != minus.probes.size())
        throw validation_error("recover_pressure: stamp sizes do not match");
    for (std::size_t i = 0; i < minus.probes.size(); ++i)
        if (norm(minus.probes[i] - plus.probes[i]) > 1e-12 * std::max(1.0, norm(minus.probes[i])))
            throw validation_error("recover_pressure: probe sets do not match");
    if (std::abs((plus.time - minus.time) - dt) > 1e-9 * std::max(1.0, dt))
        throw validation_error("recover_pressure: stamps are not dt apart");

    std::vector<double> p(minus.probes.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = -(plus.phi[i] - minus.phi[i]) / dt - 0.5 * (plus.h[i] + minus.h[i]);
    return p;
}

} // namespace nslet

#endif
