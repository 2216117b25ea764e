#ifndef NSLET_CORE_HPP
#define NSLET_CORE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

// Small dense types shared by every module. Velocities and kernel tensors are
// 3x3 at most, so everything is a fixed-size aggregate; no heap, no aliasing.

namespace nslet {

inline constexpr double pi = 3.14159265358979323846264338327950288;

using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>; // space-time: [0] = time component, [1..3] = space
using Mat3 = std::array<std::array<double, 3>, 3>;

struct SpaceTimePoint {
    double t = 0.0;
    Vec3 x{0.0, 0.0, 0.0};
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
    return a;
}

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Mat3 zero_mat3() { return {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}}; }

inline Mat3 identity_mat3() {
    Mat3 m = zero_mat3();
    m[0][0] = m[1][1] = m[2][2] = 1.0;
    return m;
}

inline Mat3& operator+=(Mat3& a, const Mat3& b) {
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) a[k][i] += b[k][i];
    return a;
}

inline Mat3 operator+(Mat3 a, const Mat3& b) {
    a += b;
    return a;
}

inline Mat3 operator-(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) r[k][i] = a[k][i] - b[k][i];
    return r;
}

inline Mat3 operator*(double s, const Mat3& a) {
    Mat3 r;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) r[k][i] = s * a[k][i];
    return r;
}

// Matrix acting on a vector from the right: (m v)_k = m[k][i] v[i].
inline Vec3 apply(const Mat3& m, const Vec3& v) {
    return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}

inline double max_abs(const Mat3& m) {
    double r = 0.0;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) r = std::max(r, std::abs(m[k][i]));
    return r;
}

inline double max_abs(const Vec3& v) {
    return std::max(std::abs(v[0]), std::max(std::abs(v[1]), std::abs(v[2])));
}

inline double frobenius(const Mat3& m) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) s += m[k][i] * m[k][i];
    return std::sqrt(s);
}

// Unit step with H(0) = 0; every kernel uses this exact convention so that
// evaluations on the start cap of a causal interval vanish identically.
inline double heaviside(double tau) { return tau > 0.0 ? 1.0 : 0.0; }

// exp with hard underflow: arguments below -745 round to exactly 0 instead of
// producing denormals, keeping flux sums reproducible across platforms.
inline double exp_clamped(double arg) { return arg < -745.0 ? 0.0 : std::exp(arg); }

struct validation_error : std::invalid_argument {
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace nslet

#endif
