#ifndef NSLET_FIELD_HPP
#define NSLET_FIELD_HPP

#include <array>
#include <vector>

#include "core.hpp"

namespace nslet {

// Regular isotropic grid of 3-vectors, stored row-major with x3 fastest.
// Immutable by convention once filled: every consumer treats it as read-only.
struct SampledField {
    Vec3 origin{0.0, 0.0, 0.0};
    double spacing = 1.0;
    std::array<int, 3> dims{0, 0, 0};
    std::vector<Vec3> values;
    double time = 0.0;
    double nu = 0.0;
    int kernel_order = 0;
    bool divergence_free = false; // label; see divergence_label_ok

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
    }
    Vec3 node(int i, int j, int k) const {
        return {origin[0] + spacing * i, origin[1] + spacing * j, origin[2] + spacing * k};
    }
    std::size_t size() const { return values.size(); }
};

inline SampledField make_grid(const Vec3& origin, double spacing, const std::array<int, 3>& dims) {
    if (!(spacing > 0.0) || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        throw validation_error("make_grid: need positive spacing and dims");
    SampledField f;
    f.origin = origin;
    f.spacing = spacing;
    f.dims = dims;
    f.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], Vec3{0.0, 0.0, 0.0});
    return f;
}

inline double max_abs(const SampledField& f) {
    double m = 0.0;
    for (const auto& v : f.values) m = std::max(m, max_abs(v));
    return m;
}

// Central-difference divergence over interior nodes.
inline double max_discrete_divergence(const SampledField& f) {
    double worst = 0.0;
    const double inv2h = 1.0 / (2.0 * f.spacing);
    for (int i = 1; i + 1 < f.dims[0]; ++i)
        for (int j = 1; j + 1 < f.dims[1]; ++j)
            for (int k = 1; k + 1 < f.dims[2]; ++k) {
                const double div =
                    (f.values[f.index(i + 1, j, k)][0] - f.values[f.index(i - 1, j, k)][0] +
                     f.values[f.index(i, j + 1, k)][1] - f.values[f.index(i, j - 1, k)][1] +
                     f.values[f.index(i, j, k + 1)][2] - f.values[f.index(i, j, k - 1)][2]) *
                    inv2h;
                worst = std::max(worst, std::abs(div));
            }
    return worst;
}

// A field labeled divergence-free must keep its discrete divergence at the
// rounding floor relative to the field scale over one spacing.
inline bool divergence_label_ok(const SampledField& f) {
    if (!f.divergence_free) return true;
    return max_discrete_divergence(f) <= 1e-6 * max_abs(f) / f.spacing;
}

inline bool covers(const SampledField& f, const Vec3& x) {
    for (int d = 0; d < 3; ++d) {
        const double s = (x[d] - f.origin[d]) / f.spacing;
        if (!(s >= 0.0 && s <= f.dims[d] - 1)) return false;
    }
    return true;
}

inline Vec3 trilinear(const SampledField& f, const Vec3& x) {
    if (!covers(f, x)) throw validation_error("trilinear: point outside the sampled grid");
    int base[3];
    double frac[3];
    for (int d = 0; d < 3; ++d) {
        const double s = (x[d] - f.origin[d]) / f.spacing;
        int b = static_cast<int>(s);
        if (b > f.dims[d] - 2) b = f.dims[d] - 2; // x exactly on the far face
        if (f.dims[d] == 1) b = 0;
        base[d] = b;
        frac[d] = s - b;
    }
    Vec3 out{0.0, 0.0, 0.0};
    for (int ci = 0; ci < 2; ++ci)
        for (int cj = 0; cj < 2; ++cj)
            for (int ck = 0; ck < 2; ++ck) {
                const double w = (ci ? frac[0] : 1.0 - frac[0]) * (cj ? frac[1] : 1.0 - frac[1]) *
                                 (ck ? frac[2] : 1.0 - frac[2]);
                if (w == 0.0) continue;
                out += w * f.values[f.index(std::min(base[0] + ci, f.dims[0] - 1),
                                            std::min(base[1] + cj, f.dims[1] - 1),
                                            std::min(base[2] + ck, f.dims[2] - 1))];
            }
    return out;
}

} // namespace nslet

#endif
