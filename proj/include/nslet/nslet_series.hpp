#ifndef NSLET_NSLET_SERIES_HPP
#define NSLET_NSLET_SERIES_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "field.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "parallel.hpp"

// Truncated series for the Navier-Stokes fundamental solution. Order 0 is the
// unsteady Stokeslet; order 1 adds the first correction u^I, the response of
// the unsteady Stokes operator to the quadratic self-interaction forcing
//
//   f_ki(y, s) = -u^S_kj(y, s) d_j u^S_ki(y, s),
//
// evaluated by the Duhamel space-time convolution
//
//   u^I_ki(x, t) = int_0^t int G_im(x - y, eps) f_km(y, t - eps) dV(y) deps,
//
// where G = -u^S is the forward Stokes propagator (u^S responds to a negative
// unit impulse). The forcing decays like R^-7 and is not integrable across
// the origin, so the spatial domain is |y| >= r_cut, truncated at r_outer
// where the forcing is dead.
//
// The quadrature has to deal with G concentrating into a delta at y = x as
// eps -> 0. Three devices handle this:
//
//   * eps in [0, delta], delta = t 2^-levels: integrated analytically with
//     the time-integrated propagators W0 = int_0^delta G deps and
//     W1 = int_0^delta eps G deps (closed erf/Gaussian forms; W0 carries the
//     steady Oseen-tensor 1/R core). The forcing is frozen by its time
//     Taylor polynomial f(y, t - eps) ~ f(y, t) - eps d_t f(y, t), so this
//     block is exact up to O(delta^3). The 1/R singularity of W0 is removed
//     by subtracting f(x, t); the subtracted mass is restored through
//     int_R3 W0 = (2/3) delta I minus a small quadrature term over the cut
//     ball (the exterior tail vanishes: the dipole's principal value over
//     any region enclosing its center equals the same -I/3).
//   * eps in [delta, t]: dyadic panels toward eps = delta with a Gauss rule
//     per panel. At each eps the propagator spike at y = x is integrated on
//     an x-centered patch rule (the kernel is angularly a polynomial of
//     degree 2 around x, and a radial panel split at 4x the spike width
//     tracks the concentration at any eps), blended with the origin-centered
//     shell rule by a smooth partition of unity.
//   * the shell rule is log-radial on [r_cut, r_outer], matched to the R^-7
//     forcing concentration just outside the cut ball.
//
// Evaluation points must keep a margin of 0.2 r_cut from the cut ball so the
// patch has room; grid values closer in than ~2 r_cut lean on the partition
// blend and are less accurate than probe-distance values.

namespace nslet {

struct DuhamelOrders {
    int radial = 12; // radial nodes per segment (shell and patch rules)
    int sphere = 12; // sphere-rule order of the shell rule (patch uses half)
    int time = 4;    // Gauss-Legendre nodes per dyadic eps panel
    int levels = 6;  // dyadic panels on [delta, t], delta = t 2^-levels
    double r_outer = 12.0;
};

inline DuhamelOrders doubled(const DuhamelOrders& o) {
    return {2 * o.radial, 2 * o.sphere, 2 * o.time, o.levels + 2, o.r_outer};
}

inline DuhamelOrders halved(const DuhamelOrders& o) {
    return {std::max(2, o.radial / 2), std::max(2, o.sphere / 2), std::max(1, o.time / 2),
            std::max(1, o.levels - 2), o.r_outer};
}

// f[k][m](y, s); injectable so the convolution can be exercised alone.
using ForcingFn = std::function<Mat3(const Vec3&, double)>;

inline Mat3 stokes_interaction_forcing(const Vec3& y, double s, double nu) {
    const KernelValue kv = stokeslet(y, s, nu, true);
    Mat3 f = zero_mat3();
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < 3; ++m) {
            double acc = 0.0;
            for (int j = 0; j < 3; ++j) acc += kv.u[k][j] * (*kv.grad_u)[k][m][j];
            f[k][m] = -acc;
        }
    return f;
}

inline ForcingFn make_stokes_forcing(double nu) {
    return [nu](const Vec3& y, double s) { return stokes_interaction_forcing(y, s, nu); };
}

namespace detail {

// Time-integrated propagators W0(z) = int_0^delta G(z, eps) deps and
// W1(z) = int_0^delta eps G(z, eps) deps for the Stokes propagator
// G_im = heat(R, eps) d_im + (1/4pi) Hess_im[erf(R / sqrt(4 nu eps)) / R].
// With a = R / sqrt(4 nu delta), k = 4 nu, the scalar profiles are
//   W0 = erfc(a)/(pi k R) d_im + (1/4pi)[phi'' zz + (phi'/R)(d - zz)]
//   W1 = 2R/(k^2 pi^1.5) C2(a) d_im + (1/4pi)[psi'' zz + (psi'/R)(d - zz)]
// with phi' = (2/k) C0, phi'' = (2 gamma/k) C1, psi' = (2R^2/k^2) C3,
// psi'' = (2R/k^2) C4; C0..C4 are erf/exp combinations whose closed forms
// cancel catastrophically for small a, where a Laurent series takes over.
// (Sanity anchor: as R -> 0 the 1/R parts of W0 assemble exactly the steady
// Oseen tensor (d + zz) / (8 pi nu R).)

// Dense Laurent coefficients: value(a) = sum_j c[j] a^(j-1), j = 0..24.
inline const long double* wseries(int which) {
    static const long double c0[25] = {
        0.0L, -1.00000000000000000000000000000L, 0.752252778063675049264105935414L,
        0.0L, -0.150450555612735009852821187083L, 0.0L,
        0.0322394047741575021113188258035L, 0.0L, -0.00597026014336250039098496774138L,
        0.0L, 0.000949814113716761425838517595220L, 0.0L,
        -0.000131512723437705428193025513184L, 0.0L, 0.0000160737773090528856680364516114L,
        0.0L, -0.00000175595886569485305617204933570L, 0.0L,
        1.73285414377781551595925921286e-7L, 0.0L, -1.55865187535570707784695273115e-8L,
        0.0L, 1.28758198398949715126487399529e-9L, 0.0L,
        -9.83244424137434188238631050952e-11L};
    static const long double c1[25] = {
        0.0L, 0.752252778063675049264105935414L, 0.0L,
        -0.451351666838205029558463561249L, 0.0L, 0.161197023870787510556594129017L,
        0.0L, -0.0417918210035375027368947741897L, 0.0L,
        0.00854832702345085283254665835698L, 0.0L, -0.00144663995781475971012328064503L,
        0.0L, 0.000208959105017687513684473870948L, 0.0L,
        -0.0000263393829854227958425807400355L, 0.0L, 0.00000294585204442228637713074066187L,
        0.0L, -2.96143856317584344790921018918e-7L, 0.0L,
        2.70392216637794401765623539012e-8L, 0.0L, -2.26146217551609863294885141719e-9L,
        0.0L};
    static const long double c2[25] = {
        1.00000000000000000000000000000L, -1.77245385090551602729816748334L, 1.00000000000000000000000000000L,
        0.0L, -0.166666666666666666666666666667L, 0.0L,
        0.0333333333333333333333333333333L, 0.0L, -0.00595238095238095238095238095238L,
        0.0L, 0.000925925925925925925925925925926L, 0.0L,
        -0.000126262626262626262626262626263L, 0.0L, 0.0000152625152625152625152625152625L,
        0.0L, -0.00000165343915343915343915343915344L, 0.0L,
        1.62101877788152297956219524847e-7L, 0.0L, -1.45038522231504687645038522232e-8L,
        0.0L, 1.19295754216389137024057658978e-9L, 0.0L,
        -9.07685086429047781704786535704e-11L};
    static const long double c3[25] = {
        -0.752252778063675049264105935414L, 1.00000000000000000000000000000L, -0.451351666838205029558463561249L,
        0.0L, 0.0537323412902625035188647096725L, 0.0L,
        -0.00835836420070750054737895483794L, 0.0L, 0.00122118957477869326179237976528L,
        0.0L, -0.000160737773090528856680364516114L, 0.0L,
        0.0000189962822743352285167703519044L, 0.0L, -0.00000202610638349406121866005692581L,
        0.0L, 1.96390136294819091808716044124e-7L, 0.0L,
        -1.74202268422108438112306481716e-8L, 0.0L, 1.42311692967260211455591336322e-9L,
        0.0L, -1.07688675024576125378516734152e-10L, 0.0L,
        7.58676253192464651418696798574e-12L};
    static const long double c4[25] = {
        -0.752252778063675049264105935414L, 2.00000000000000000000000000000L, -1.35405500051461508867539068375L,
        0.0L, 0.268661706451312517594323548362L, 0.0L,
        -0.0585085494049525038316526838656L, 0.0L, 0.0109907061730082393561314178875L,
        0.0L, -0.00176811550399581742348400967726L, 0.0L,
        0.000246951669566357970718014574757L, 0.0L, -0.0000303915957524109182799008538871L,
        0.0L, 0.00000333863231701192456074817275012L, 0.0L,
        -3.30984310002006032413382315261e-7L, 0.0L, 2.98854555231246444056741806276e-8L,
        0.0L, -2.47683952556525088370588488549e-9L, 0.0L,
        1.89669063298116162854674199644e-10L};
    switch (which) {
        case 0: return c0;
        case 1: return c1;
        case 2: return c2;
        case 3: return c3;
        default: return c4;
    }
}

inline double wseries_eval(int which, double a) {
    const long double* c = wseries(which);
    const long double la = a;
    long double acc = 0.0L;
    for (int j = 24; j >= 0; --j) acc = acc * la + c[j];
    return static_cast<double>(acc / la);
}

struct WPair {
    Mat3 w0 = zero_mat3();
    Mat3 w1 = zero_mat3();
};

inline WPair time_integrated_propagator(const Vec3& z, double delta, double nu) {
    const double R2 = dot(z, z);
    const double R = std::sqrt(R2);
    const double k = 4.0 * nu;
    const double gamma = 1.0 / std::sqrt(k * delta);
    const double a = gamma * R;

    double C0, C1, C2, C3, C4, erfc_a;
    if (a < 0.7) {
        C0 = wseries_eval(0, a);
        C1 = wseries_eval(1, a);
        C2 = wseries_eval(2, a);
        C3 = wseries_eval(3, a);
        C4 = wseries_eval(4, a);
        erfc_a = std::erfc(a);
    } else {
        erfc_a = std::erfc(a);
        const double er = 1.0 - erfc_a;
        const double ex = exp_clamped(-a * a);
        const double spi = std::sqrt(pi);
        const double a2 = a * a, a3 = a2 * a, a4 = a2 * a2;
        const double J = er / (2.0 * a2) + ex / (spi * a) - erfc_a;
        const double K = er / (4.0 * a4) + ex / (6.0 * spi * a3) - ex / (3.0 * spi * a) + erfc_a / 3.0;
        C0 = J - er / a2;
        C1 = er / a3 - 2.0 * ex / (spi * a2);
        C2 = ex / a - spi * erfc_a;
        C3 = 3.0 * K - er / a4;
        C4 = 6.0 * K - er / a4 - 2.0 * ex / (spi * a3);
    }

    const double heat0 = erfc_a / (pi * k * R);
    const double phi_p_over_R = (2.0 / k) * C0 / R;
    const double phi_pp = (2.0 * gamma / k) * C1;
    const double heat1 = (2.0 * R / (k * k * pi * std::sqrt(pi))) * C2;
    const double psi_p_over_R = (2.0 * R / (k * k)) * C3;
    const double psi_pp = (2.0 * R / (k * k)) * C4;

    WPair wp;
    const double inv4pi = 1.0 / (4.0 * pi);
    for (int i = 0; i < 3; ++i)
        for (int m = 0; m < 3; ++m) {
            const double zz = (z[i] * z[m]) / R2;
            const double dd = i == m ? 1.0 : 0.0;
            wp.w0[i][m] = heat0 * dd + inv4pi * (phi_pp * zz + phi_p_over_R * (dd - zz));
            wp.w1[i][m] = heat1 * dd + inv4pi * (psi_pp * zz + psi_p_over_R * (dd - zz));
        }
    return wp;
}

// C-infinity partition of unity: 1 for R <= rho1, 0 for R >= rho2.
inline double patch_weight(double R, double rho1, double rho2) {
    const double s = (R - rho1) / (rho2 - rho1);
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    const double e0 = std::exp(-1.0 / (1.0 - s)), e1 = std::exp(-1.0 / s);
    return e0 / (e0 + e1);
}

// Radial rule for the x-centered patch: a linear segment [0, 4 width]
// capturing the spike plus a log segment out to rho2 (single linear segment
// when the spike is wide). Weights carry dr only.
inline void patch_radial(double width, double rho2, int n, std::vector<double>& r,
                         std::vector<double>& w) {
    // The split must move continuously with the kernel width: a branch in the
    // rule would put a jump into the eps-integrand seen by the panel rule.
    const double split = std::min(4.0 * width, 0.5 * rho2);
    gauss_legendre(n, 0.0, split, r, w);
    std::vector<double> rho, wrho;
    gauss_legendre(n, std::log(split), std::log(rho2), rho, wrho);
    for (int i = 0; i < n; ++i) {
        const double rr = std::exp(rho[i]);
        r.push_back(rr);
        w.push_back(wrho[i] * rr);
    }
}

} // namespace detail

// Quadrature skeleton with the forcing tabulated on the shell rule; reusable
// for any number of evaluation points at the fixed time t.
struct DuhamelTable {
    double t = 0.0;
    double nu = 0.0;
    double r_cut = 0.5;
    double delta = 0.0; // analytic near-diagonal window [0, delta]
    DuhamelOrders orders;
    ForcingFn forcing;

    std::vector<Vec3> y;    // shell nodes (log-radial x sphere, volume weights in wy)
    std::vector<double> wy;
    std::vector<double> eps, weps;        // panel nodes on [delta, t]
    std::vector<std::vector<Mat3>> fq;    // fq[q][p] = f(y_p, t - eps_q)
    std::vector<Mat3> fnow, fdot;         // f(y_p, t), d_t f(y_p, t)
    QuadratureRule patch_dirs;            // unit directions for the patch rule
    QuadratureRule ball;                  // cut-ball rule for the W0 mass term

    bool empty() const { return !(t > 0.0); }
};

inline DuhamelTable make_duhamel_table(double t, double nu, double r_cut, const DuhamelOrders& orders,
                                       const ForcingFn& forcing) {
    if (!(nu > 0.0)) throw validation_error("duhamel: viscosity must be positive");
    if (!(r_cut > 0.0) || !(orders.r_outer > r_cut))
        throw validation_error("duhamel: need 0 < r_cut < r_outer");
    if (orders.radial < 1 || orders.sphere < 0 || orders.time < 1 || orders.levels < 1)
        throw validation_error("duhamel: quadrature orders out of range");

    DuhamelTable tab;
    tab.t = t;
    tab.nu = nu;
    tab.r_cut = r_cut;
    tab.orders = orders;
    tab.forcing = forcing;
    if (!(t > 0.0)) return tab; // causal: zero field

    tab.delta = t * std::ldexp(1.0, -orders.levels);

    std::vector<double> rho, wrho;
    gauss_legendre(orders.radial, std::log(r_cut), std::log(orders.r_outer), rho, wrho);
    const QuadratureRule dirs = sphere_rule({0.0, 0.0, 0.0}, 1.0, orders.sphere);
    tab.y.reserve(rho.size() * dirs.size());
    tab.wy.reserve(tab.y.capacity());
    for (std::size_t ir = 0; ir < rho.size(); ++ir) {
        const double r = std::exp(rho[ir]);
        for (std::size_t id = 0; id < dirs.size(); ++id) {
            tab.y.push_back(r * dirs.nodes[id].x);
            tab.wy.push_back(wrho[ir] * r * r * r * dirs.weights[id]);
        }
    }

    // The eps-integrand is stiff at both ends: the propagator sharpens as
    // eps -> 0 and the forcing's diffusive transient sharpens as t - eps -> 0.
    // Panels are therefore dyadic toward both endpoints, and each octave is
    // split into sub-panels of bounded Gauss order so that node-doubling
    // doubles the panel count (composite error ~ S^-8) instead of leaning on
    // single-panel order growth, which the transients reduce to geometric
    // gains.
    const int sub = std::max(1, (orders.time + 2) / 4);
    const int gl = std::min(4, orders.time);
    const auto add_panel = [&](double lo, double hi) {
        for (int s = 0; s < sub; ++s) {
            std::vector<double> ep, wp;
            gauss_legendre(gl, lo + (hi - lo) * s / sub, lo + (hi - lo) * (s + 1) / sub, ep, wp);
            tab.eps.insert(tab.eps.end(), ep.begin(), ep.end());
            tab.weps.insert(tab.weps.end(), wp.begin(), wp.end());
        }
    };
    for (int j = orders.levels - 1; j >= 1; --j)
        add_panel(t * std::ldexp(1.0, -(j + 1)), t * std::ldexp(1.0, -j));
    for (int j = 1; j <= orders.levels - 1; ++j)
        add_panel(t - t * std::ldexp(1.0, -j), t - t * std::ldexp(1.0, -(j + 1)));
    add_panel(t - tab.delta, t);

    const double a = 1e-3 * tab.delta; // time step for d_t f; error O(a^2) is far below the O(delta^3) block error
    tab.fq.assign(tab.eps.size(), {});
    for (auto& fv : tab.fq) fv.resize(tab.y.size());
    tab.fnow.resize(tab.y.size());
    tab.fdot.resize(tab.y.size());
    const std::size_t nshell = tab.y.size();
    parallel_for(nshell * (tab.eps.size() + 1), [&](std::size_t n) {
        const std::size_t q = n / nshell;
        const std::size_t p = n % nshell;
        if (q < tab.eps.size()) {
            tab.fq[q][p] = forcing(tab.y[p], tab.t - tab.eps[q]);
        } else {
            const Mat3 fp = forcing(tab.y[p], tab.t + a);
            const Mat3 fm = forcing(tab.y[p], tab.t - a);
            tab.fnow[p] = forcing(tab.y[p], tab.t);
            tab.fdot[p] = (0.5 / a) * (fp - fm);
        }
    });

    tab.patch_dirs = sphere_rule({0.0, 0.0, 0.0}, 1.0, std::max(4, orders.sphere / 2));
    tab.ball = ball_rule({0.0, 0.0, 0.0}, r_cut, std::max(6, orders.sphere / 2));
    return tab;
}

// u^I_ki(x, t) for the table's time t. The patch/blend geometry is anchored
// at `center` rather than at x, so a cluster of evaluations sharing one
// center sees a single fixed quadrature node set; the integrand is then
// analytic in x across the cluster and finite differences of u^I carry no
// node-sweep noise. x must stay well inside the patch core for the rules to
// keep resolving the kernel peak.
inline Mat3 duhamel_eval(const DuhamelTable& tab, const Vec3& x, const Vec3& center) {
    if (tab.empty()) return zero_mat3();
    const double d = norm(center) - tab.r_cut;
    if (d < 0.2 * tab.r_cut)
        throw validation_error("duhamel_eval: point too close to the cut ball, forcing is singular there");
    const double rho2 = std::min(1.2, 0.8 * d);
    const double rho1 = 0.5 * rho2;
    if (norm(x - center) > 0.25 * rho2)
        throw validation_error("duhamel_eval: evaluation point too far from its patch center");

    Mat3 out = zero_mat3();
    const auto add_contracted = [&out](double w, const Mat3& f, const Mat3& g) {
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i) {
                double acc = 0.0;
                for (int m = 0; m < 3; ++m) acc += f[k][m] * g[m][i];
                out[k][i] += w * acc;
            }
    };

    // --- eps in [0, delta]: time-integrated propagators ------------------
    const double fd_a = 1e-3 * tab.delta;
    const Vec3 xc = x - center;
    const Mat3 fx = tab.forcing(x, tab.t);
    const double w_width = std::sqrt(4.0 * tab.nu * tab.delta);

    // patch side of the subtracted W0 / direct W1 convolutions
    {
        std::vector<double> rr, wr;
        detail::patch_radial(w_width, rho2, tab.orders.radial, rr, wr);
        for (std::size_t ir = 0; ir < rr.size(); ++ir)
            for (std::size_t id = 0; id < tab.patch_dirs.size(); ++id) {
                const Vec3 z = rr[ir] * tab.patch_dirs.nodes[id].x;
                const double w =
                    wr[ir] * rr[ir] * rr[ir] * tab.patch_dirs.weights[id] *
                    detail::patch_weight(rr[ir], rho1, rho2);
                if (w == 0.0) continue;
                const Vec3 yv = center - z;
                const detail::WPair wp =
                    detail::time_integrated_propagator(xc + z, tab.delta, tab.nu);
                const Mat3 df = tab.forcing(yv, tab.t) - fx;
                const Mat3 fd =
                    (0.5 / fd_a) * (tab.forcing(yv, tab.t + fd_a) - tab.forcing(yv, tab.t - fd_a));
                add_contracted(w, df, wp.w0);
                add_contracted(-w, fd, wp.w1);
            }
    }
    // shell side
    for (std::size_t p = 0; p < tab.y.size(); ++p) {
        const Vec3 z = x - tab.y[p];
        const double R = norm(z);
        if (R < 1e-12) continue; // subtracted integrand is bounded; isolated node
        const double w =
            tab.wy[p] * (1.0 - detail::patch_weight(norm(center - tab.y[p]), rho1, rho2));
        if (w == 0.0) continue;
        const detail::WPair wp = detail::time_integrated_propagator(z, tab.delta, tab.nu);
        add_contracted(w, tab.fnow[p] - fx, wp.w0);
        add_contracted(-w, tab.fdot[p], wp.w1);
    }
    // restored mass of the W0 subtraction: int_R3 W0 minus the cut ball
    {
        Mat3 coef = zero_mat3();
        for (int i = 0; i < 3; ++i) coef[i][i] = 2.0 * tab.delta / 3.0;
        for (std::size_t b = 0; b < tab.ball.size(); ++b) {
            const Vec3 z = x - tab.ball.nodes[b].x;
            const detail::WPair wp = detail::time_integrated_propagator(z, tab.delta, tab.nu);
            coef += (-tab.ball.weights[b]) * wp.w0;
        }
        add_contracted(1.0, fx, coef);
    }

    // --- eps in [delta, t]: panel rule with the patched spatial quadrature
    for (std::size_t q = 0; q < tab.eps.size(); ++q) {
        const double ep = tab.eps[q];
        const double width = std::sqrt(4.0 * tab.nu * ep);
        std::vector<double> rr, wr;
        detail::patch_radial(width, rho2, tab.orders.radial, rr, wr);
        for (std::size_t ir = 0; ir < rr.size(); ++ir)
            for (std::size_t id = 0; id < tab.patch_dirs.size(); ++id) {
                const double w = tab.weps[q] * wr[ir] * rr[ir] * rr[ir] *
                                 tab.patch_dirs.weights[id] *
                                 detail::patch_weight(rr[ir], rho1, rho2);
                if (w == 0.0) continue;
                const Vec3 z = rr[ir] * tab.patch_dirs.nodes[id].x;
                const Mat3 g = (-1.0) * stokeslet(xc + z, ep, tab.nu, false).u;
                add_contracted(w, tab.forcing(center - z, tab.t - ep), g);
            }
        for (std::size_t p = 0; p < tab.y.size(); ++p) {
            const Vec3 z = x - tab.y[p];
            const double w =
                tab.weps[q] * tab.wy[p] *
                (1.0 - detail::patch_weight(norm(center - tab.y[p]), rho1, rho2));
            if (w == 0.0) continue;
            const Mat3 g = (-1.0) * stokeslet(z, ep, tab.nu, false).u;
            add_contracted(w, tab.fq[q][p], g);
        }
    }
    return out;
}

inline Mat3 duhamel_eval(const DuhamelTable& tab, const Vec3& x) {
    return duhamel_eval(tab, x, x);
}

// Curl of (d_t u^I - nu lap u^I - f) per force direction k, the monitored
// consistency defect of the computed correction. Fourth order in space and
// time, so the monitor's own discretization sits well below the quadrature
// error it is meant to expose. The five Duhamel tables are shared across
// probes.
inline std::vector<Mat3> series_curl_residuals(const std::vector<Vec3>& probes, double t, double nu,
                                               double r_cut, const DuhamelOrders& orders,
                                               const ForcingFn& forcing, double h_in = 0.05,
                                               double ht = 0.02) {
    if (!(t > 2.0 * ht)) throw validation_error("series_curl_residuals: need t > 2 ht");
    std::array<DuhamelTable, 5> tabs; // t + (q - 2) ht
    for (int q = 0; q < 5; ++q) tabs[q] = make_duhamel_table(t + (q - 2) * ht, nu, r_cut, orders, forcing);

    std::vector<Mat3> out;
    out.reserve(probes.size());
    for (const Vec3& x : probes) {
        // keep the stencil reach 2h inside the frozen-center patch core
        const double rho2 = std::min(1.2, 0.8 * (norm(x) - r_cut));
        const double h = std::min(h_in, 0.12 * rho2);
        std::map<std::array<int, 3>, Mat3> cache;
        const auto at = [&](int a, int b, int c) -> const Mat3& {
            const std::array<int, 3> key{a, b, c};
            auto it = cache.find(key);
            if (it == cache.end())
                it = cache.emplace(key, duhamel_eval(tabs[2], x + Vec3{h * a, h * b, h * c}, x))
                         .first;
            return it->second;
        };
        // w_kb(y) = d_t u^I_kb - nu lap u^I_kb - f_kb at the twelve curl points.
        std::array<Mat3, 12> w; // index 4*axis + (offset +2,+1,-1,-2)
        for (int axis = 0; axis < 3; ++axis)
            for (int so = 0; so < 4; ++so) {
                const int shift[4] = {2, 1, -1, -2};
                int off[3] = {0, 0, 0};
                off[axis] = shift[so];
                const Vec3 yv = x + Vec3{h * off[0], h * off[1], h * off[2]};
                Mat3 acc =
                    (1.0 / (12.0 * ht)) *
                    ((-1.0) * duhamel_eval(tabs[4], yv, x) + 8.0 * duhamel_eval(tabs[3], yv, x) +
                     (-8.0) * duhamel_eval(tabs[1], yv, x) + duhamel_eval(tabs[0], yv, x));
                Mat3 lap = (-15.0 / 2.0) * at(off[0], off[1], off[2]);
                for (int a = 0; a < 3; ++a) {
                    int p[3] = {off[0], off[1], off[2]};
                    p[a] += 1;
                    const Mat3& u1 = at(p[0], p[1], p[2]);
                    p[a] += 1;
                    const Mat3& u2 = at(p[0], p[1], p[2]);
                    p[a] -= 3;
                    const Mat3& m1 = at(p[0], p[1], p[2]);
                    p[a] -= 1;
                    const Mat3& m2 = at(p[0], p[1], p[2]);
                    lap += (4.0 / 3.0) * (u1 + m1) + (-1.0 / 12.0) * (u2 + m2);
                }
                acc += (-nu / (h * h)) * lap;
                acc += -1.0 * forcing(yv, t);
                w[4 * axis + so] = acc;
            }
        // d_a g ~ (-g(+2a) + 8 g(+a) - 8 g(-a) + g(-2a)) / 12h
        const auto d4 = [&w, h](int axis, int k, int comp) {
            return (-w[4 * axis][k][comp] + 8.0 * w[4 * axis + 1][k][comp] -
                    8.0 * w[4 * axis + 2][k][comp] + w[4 * axis + 3][k][comp]) /
                   (12.0 * h);
        };
        Mat3 curl = zero_mat3();
        for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c) {
                const int a = (c + 1) % 3, b = (c + 2) % 3;
                curl[k][c] = d4(a, k, b) - d4(b, k, a);
            }
        out.push_back(curl);
    }
    return out;
}

// First-order correction sampled on a grid, one vector field per force
// direction. Zero for evaluation times <= 0.
struct CorrectionField {
    std::array<SampledField, 3> grids;
    double nu = 0.0;
    double r_cut = 0.5;
    DuhamelOrders orders;
    double residual_norm = 0.0;   // worst |curl defect| over the diagnostic probes
    double estimated_error = 0.0; // residual shift against halved orders
    bool converged = true;

    double time() const { return grids[0].time; }
};

inline bool covers(const CorrectionField& c, const Vec3& dx) {
    return norm(dx) >= c.r_cut && covers(c.grids[0], dx);
}

inline CorrectionField nslet_correction(const Vec3& origin, double spacing, const std::array<int, 3>& dims,
                                        double nu, double t_max, const DuhamelOrders& orders = {},
                                        double r_cut = 0.5) {
    if (!(nu > 0.0)) throw validation_error("nslet_correction: viscosity must be positive");
    if (t_max < 0.0) throw validation_error("nslet_correction: t_max must be >= 0");

    CorrectionField c;
    c.nu = nu;
    c.r_cut = r_cut;
    c.orders = orders;
    for (auto& g : c.grids) {
        g = make_grid(origin, spacing, dims);
        g.time = t_max;
        g.nu = nu;
        g.kernel_order = 1;
    }
    std::vector<Vec3> nodes(c.grids[0].size());
    for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j)
            for (int k = 0; k < dims[2]; ++k) nodes[c.grids[0].index(i, j, k)] = c.grids[0].node(i, j, k);
    for (const Vec3& p : nodes)
        if (norm(p) < r_cut)
            throw validation_error("nslet_correction: grid intersects the cut ball around the origin");
    if (t_max == 0.0) return c; // causal zero field

    const ForcingFn forcing = make_stokes_forcing(nu);
    const DuhamelTable tab = make_duhamel_table(t_max, nu, r_cut, orders, forcing);
    parallel_for(nodes.size(), [&](std::size_t n) {
        const Mat3 ui = duhamel_eval(tab, nodes[n]);
        for (int k = 0; k < 3; ++k) c.grids[k].values[n] = ui[k];
    });

    // Consistency diagnostics at three interior nodes: the curl defect should
    // sit at quadrature level, estimated by re-running with halved orders.
    std::vector<Vec3> probes;
    {
        std::vector<std::size_t> idx(nodes.size());
        for (std::size_t n = 0; n < idx.size(); ++n) idx[n] = n;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return norm(nodes[a]) < norm(nodes[b]); });
        for (double q : {0.5, 0.7, 0.9}) {
            const Vec3 p = nodes[idx[static_cast<std::size_t>(q * (idx.size() - 1))]];
            if (norm(p) >= 1.2 * r_cut + 0.3) probes.push_back(p);
        }
        if (probes.empty()) probes.push_back(nodes[idx.back()]);
    }
    const auto rfull = series_curl_residuals(probes, t_max, nu, r_cut, orders, forcing);
    const auto rhalf = series_curl_residuals(probes, t_max, nu, r_cut, halved(orders), forcing);
    double scale = 0.0;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        c.residual_norm = std::max(c.residual_norm, max_abs(rfull[p]));
        c.estimated_error = std::max(c.estimated_error, max_abs(rhalf[p] - rfull[p]));
        scale = std::max(scale, max_abs(rhalf[p]));
    }
    c.converged = c.residual_norm <= 10.0 * c.estimated_error + 1e-6 * scale;
    return c;
}

// Truncated series evaluation. Order 0 is the Stokeslet; order 1 adds the
// trilinearly interpolated correction, which is only available on the
// correction grid's time slice and spatial coverage. The interpolant is not
// differentiable, so order-1 values carry no gradient.
inline KernelValue nslet_eval(const Vec3& dx, double tau, double nu, int order,
                              const CorrectionField* correction = nullptr) {
    if (order != 0 && order != 1) throw validation_error("nslet_eval: order must be 0 or 1");
    if (order == 0) return stokeslet(dx, tau, nu, true);

    if (correction == nullptr) throw validation_error("nslet_eval: order 1 needs a correction field");
    if (std::abs(correction->nu - nu) > 1e-12 * std::max(1.0, std::abs(nu)))
        throw validation_error("nslet_eval: correction field was built for a different viscosity");
    KernelValue kv = stokeslet(dx, tau, nu, false);
    if (tau <= 0.0) return kv; // correction is causal too
    if (std::abs(correction->time() - tau) > 1e-9 * std::max(1.0, std::abs(tau)))
        throw validation_error("nslet_eval: correction field sampled at a different time");
    if (!covers(*correction, dx))
        throw validation_error("nslet_eval: query outside the correction field coverage");
    for (int k = 0; k < 3; ++k) kv.u[k] += trilinear(correction->grids[k], dx);
    return kv;
}

} // namespace nslet

#endif
