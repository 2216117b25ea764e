#ifndef NSLET_KERNELS_HPP
#define NSLET_KERNELS_HPP

#include <optional>
#include <vector>

#include "core.hpp"
#include "specialfn.hpp"

// Space-time fundamental solutions. Each kernel value separates into a smooth
// part, evaluated pointwise here, and a list of distributional atoms that the
// surface-integral code consumes through closed-form flux rules; atoms are
// never mollified into the smooth part.
//
//   eulerlet:   u_ki = -H(tau) d3(dx) d_ki - (1/4pi) H(tau) (3 x_k x_i - R^2 d_ki)/R^5
//               pressure atom: delta(tau) with spatial profile (1/4pi) grad_k(1/R)
//               smooth pressure: Bernoulli head -(1/2) u_kj u_kj
//   stokeslet:  u_ki = -H(tau) heat(R,tau) d_ki - (1/4pi) H(tau) Hess_ki[erf(eta)/R]
//               with eta = R / sqrt(4 nu tau); same pressure atom, no smooth
//               pressure. Splits as uA d_ki + Hess uB with uA = -H heat and
//               uB = -(1/4pi) H erf(eta)/R, satisfying lap uB = -uA and
//               d_tau uB = -nu uA.
//   oseenlet:   stokeslet at the Galilean-shifted separation dx - U tau.

namespace nslet {

using Tensor3 = std::array<Mat3, 3>; // [k][i][j] = d u_ki / d x_j

enum class AtomKind {
    space_point_velocity, // H(tau) delta^3(dx) times a constant 3x3 weight
    time_slice_pressure,  // delta(tau) times the profile (1/4pi) grad_k (1/R)
};

struct DistributionalAtom {
    AtomKind kind;
    Mat3 tensor_weight = zero_mat3(); // used by velocity atoms only
};

struct KernelValue {
    Mat3 u = zero_mat3();             // smooth velocity
    Vec3 p{0, 0, 0};                  // smooth pressure (Bernoulli head for the eulerlet)
    std::optional<Tensor3> grad_u;    // smooth velocity gradient, on request
    std::vector<DistributionalAtom> atoms;
};

// Spatial profile of the time-slice pressure atom: (1/4pi) grad_k (1/R).
inline Vec3 pressure_slice_profile(const Vec3& dx) {
    const double R2 = dot(dx, dx);
    if (R2 == 0.0) throw validation_error("pressure_slice_profile: undefined at R = 0");
    const double R = std::sqrt(R2);
    return (-1.0 / (4.0 * pi * R2 * R)) * dx;
}

namespace detail {

inline constexpr double two_over_sqrt_pi = 1.1283791670955125738961589031215452;

// Radial factors of the erf(eta)/R Hessian and its radial derivative:
//   Hess_ki[erf(eta)/R] = P x_k x_i + Q d_ki,
//   P  = A(eta)/R^5,          Q  = B(eta)/R^3,
//   P'/R = (4 eta^5 E - 5A)/R^7, Q'/R = (-2 eta^3 E - 3B)/R^5,
// with A = 3 erf - E (2 eta^3 + 3 eta), B = eta E - erf, E = (2/sqrt(pi)) e^{-eta^2}.
// A, B and both primed numerators vanish to high order at eta = 0, so below
// eta = 0.9 they are summed as even power series in eta (coefficients from
// the Maclaurin expansions of erf and exp), which removes the cancellation
// that makes the closed forms lose
// precision as R -> 0 at fixed tau.
struct StokesHessSeries {
    static constexpr int terms = 24;
    // coefficients of eta^{2m} for A/eta^5, B/eta^3, (4 eta^5 E - 5A)/eta^7,
    // (-2 eta^3 E - 3B)/eta^5; all include the common 2/sqrt(pi) factor
    std::array<double, terms> hA{}, hB{}, hP{}, hQ{};

    StokesHessSeries() {
        auto inv_fact = [](int n) {
            if (n < 0) return 0.0;
            double f = 1.0;
            for (int i = 2; i <= n; ++i) f *= i;
            return 1.0 / f;
        };
        for (int m = 0; m < terms; ++m) {
            {
                const int n = m + 2; // A starts at eta^5
                const double an =
                    3.0 * inv_fact(n) / (2 * n + 1) - 3.0 * inv_fact(n) + 2.0 * inv_fact(n - 1);
                hA[m] = ((n % 2) ? -1.0 : 1.0) * two_over_sqrt_pi * an;
            }
            {
                const int n = m + 1; // B starts at eta^3
                const double bn = 2.0 * n * inv_fact(n) / (2 * n + 1);
                hB[m] = ((n % 2) ? -1.0 : 1.0) * two_over_sqrt_pi * bn;
            }
            {
                const int n = m + 3; // 4 eta^5 E - 5A starts at eta^7
                const double cn = 4.0 * inv_fact(n - 2) -
                                  5.0 * (3.0 * inv_fact(n) / (2 * n + 1) - 3.0 * inv_fact(n) +
                                         2.0 * inv_fact(n - 1));
                hP[m] = ((n % 2) ? -1.0 : 1.0) * two_over_sqrt_pi * cn;
            }
            {
                const int n = m + 2; // -2 eta^3 E - 3B starts at eta^5
                const double dn = 2.0 * inv_fact(n - 1) - 6.0 * n * inv_fact(n) / (2 * n + 1);
                hQ[m] = ((n % 2) ? -1.0 : 1.0) * two_over_sqrt_pi * dn;
            }
        }
    }

    static double horner(const std::array<double, terms>& c, double eta2) {
        double s = c[terms - 1];
        for (int m = terms - 2; m >= 0; --m) s = s * eta2 + c[m];
        return s;
    }
};

inline const StokesHessSeries& stokes_hess_series() {
    static const StokesHessSeries s;
    return s;
}

struct HessCoeffs {
    double P = 0.0, Q = 0.0;          // Hess = P x x + Q delta
    double Pp_over_R = 0.0, Qp_over_R = 0.0; // radial derivatives / R
};

// c = 1/sqrt(4 nu tau); valid for tau > 0, any R >= 0.
inline HessCoeffs erf_over_r_hessian(double R, double c, bool with_gradient) {
    const double eta = c * R;
    HessCoeffs h;
    if (eta < 0.9) {
        const auto& s = stokes_hess_series();
        const double eta2 = eta * eta;
        const double c3 = c * c * c, c5 = c3 * c * c, c7 = c5 * c * c;
        h.P = StokesHessSeries::horner(s.hA, eta2) * c5;
        h.Q = StokesHessSeries::horner(s.hB, eta2) * c3;
        if (with_gradient) {
            h.Pp_over_R = StokesHessSeries::horner(s.hP, eta2) * c7;
            h.Qp_over_R = StokesHessSeries::horner(s.hQ, eta2) * c5;
        }
    } else {
        const double E = two_over_sqrt_pi * exp_clamped(-eta * eta);
        const double erf_eta = nslet::erf(eta);
        const double eta3 = eta * eta * eta, eta5 = eta3 * eta * eta;
        const double A = 3.0 * erf_eta - E * (2.0 * eta3 + 3.0 * eta);
        const double B = eta * E - erf_eta;
        const double R2 = R * R, R3 = R2 * R, R5 = R3 * R2, R7 = R5 * R2;
        h.P = A / R5;
        h.Q = B / R3;
        if (with_gradient) {
            h.Pp_over_R = (4.0 * eta5 * E - 5.0 * A) / R7;
            h.Qp_over_R = (-2.0 * eta3 * E - 3.0 * B) / R5;
        }
    }
    return h;
}

inline void add_dipole(KernelValue& kv, const Vec3& dx, const HessCoeffs& h, bool with_gradient) {
    const double scale = -1.0 / (4.0 * pi);
    // dx[k]*dx[i] is grouped first so the tensor comes out bitwise symmetric
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            kv.u[k][i] += scale * (h.P * (dx[k] * dx[i]) + (k == i ? h.Q : 0.0));
    if (!with_gradient) return;
    auto& g = *kv.grad_u;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double t = h.Pp_over_R * dx[j] * (dx[k] * dx[i]);
                if (k == j) t += h.P * dx[i];
                if (i == j) t += h.P * dx[k];
                if (k == i) t += h.Qp_over_R * dx[j];
                g[k][i][j] += scale * t;
            }
}

} // namespace detail

// Scalar pieces of the stokeslet split u_ki = uA d_ki + Hess_ki uB.
inline double stokes_heat_scalar(double R, double tau, double nu) {
    if (!(nu > 0.0)) throw validation_error("stokes_heat_scalar: nu must be positive");
    return tau > 0.0 ? -heat_kernel(R, tau, nu) : 0.0;
}

inline double stokes_potential_scalar(double R, double tau, double nu) {
    if (!(nu > 0.0)) throw validation_error("stokes_potential_scalar: nu must be positive");
    if (tau <= 0.0) return 0.0;
    const double c = 1.0 / std::sqrt(4.0 * nu * tau);
    const double eta = c * R;
    // erf(eta)/R = c * erf(eta)/eta; series below eta ~ 1e-4 avoids 0/0
    double erf_over_r;
    if (eta < 1e-4)
        erf_over_r = c * detail::two_over_sqrt_pi * (1.0 - eta * eta / 3.0);
    else
        erf_over_r = nslet::erf(eta) / R;
    return -erf_over_r / (4.0 * pi);
}

inline KernelValue eulerlet(const Vec3& dx, double tau, bool with_gradient = true) {
    const double R2 = dot(dx, dx);
    if (R2 == 0.0) throw validation_error("eulerlet: smooth part undefined at R = 0");
    KernelValue kv;
    kv.atoms.push_back({AtomKind::space_point_velocity, -1.0 * identity_mat3()});
    kv.atoms.push_back({AtomKind::time_slice_pressure});
    if (with_gradient) kv.grad_u = Tensor3{zero_mat3(), zero_mat3(), zero_mat3()};
    if (tau <= 0.0) return kv; // H(0) = 0

    const double R = std::sqrt(R2);
    const double R3 = R2 * R, R5 = R3 * R2;
    detail::HessCoeffs h;
    h.P = 3.0 / R5;
    h.Q = -1.0 / R3;
    h.Pp_over_R = -15.0 / (R5 * R2);
    h.Qp_over_R = 3.0 / R5;
    detail::add_dipole(kv, dx, h, with_gradient);
    for (int k = 0; k < 3; ++k) {
        double q = 0.0;
        for (int j = 0; j < 3; ++j) q += kv.u[k][j] * kv.u[k][j];
        kv.p[k] = -0.5 * q; // Bernoulli head, smooth region only
    }
    return kv;
}

inline KernelValue stokeslet(const Vec3& dx, double tau, double nu, bool with_gradient = true) {
    if (!(nu > 0.0)) throw validation_error("stokeslet: nu must be positive");
    const double R2 = dot(dx, dx);
    if (R2 == 0.0 && tau <= 0.0)
        throw validation_error("stokeslet: undefined at the space-time origin");
    KernelValue kv;
    kv.atoms.push_back({AtomKind::time_slice_pressure});
    if (with_gradient) kv.grad_u = Tensor3{zero_mat3(), zero_mat3(), zero_mat3()};
    if (tau <= 0.0) return kv; // H(0) = 0

    const double R = std::sqrt(R2);
    const double heat = heat_kernel(R, tau, nu);
    for (int k = 0; k < 3; ++k) kv.u[k][k] = -heat;
    if (with_gradient) {
        const double gh = heat / (2.0 * nu * tau);
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) (*kv.grad_u)[k][k][j] = gh * dx[j];
    }
    const double c = 1.0 / std::sqrt(4.0 * nu * tau);
    detail::add_dipole(kv, dx, detail::erf_over_r_hessian(R, c, with_gradient), with_gradient);
    return kv;
}

inline KernelValue oseenlet(const Vec3& dx, double tau, double nu, const Vec3& stream_velocity,
                            bool with_gradient = true) {
    return stokeslet(dx - tau * stream_velocity, tau, nu, with_gradient);
}

} // namespace nslet

#endif
