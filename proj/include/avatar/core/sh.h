#pragma once

#include "avatar/types.h"

namespace avatar::core {

// 2nd-order real spherical harmonics lighting, 9 coefficients.
using SHCoefficients = Eigen::Matrix<double, 9, 1>;

namespace sh_constants {
inline constexpr double c0 = 0.282095;
inline constexpr double c1 = 0.488603;
inline constexpr double c2 = 1.092548;
inline constexpr double c3 = 0.315392;
inline constexpr double c4 = 0.546274;
}  // namespace sh_constants

// Basis evaluated at unit normal n, so that shade = L . basis(n).
inline SHCoefficients shBasis(const Vec3& n) {
    using namespace sh_constants;
    const double x = n.x(), y = n.y(), z = n.z();
    SHCoefficients b;
    b[0] = c0;
    b[1] = c1 * y;
    b[2] = c1 * z;
    b[3] = c1 * x;
    b[4] = c2 * x * y;
    b[5] = c2 * y * z;
    b[6] = c3 * (3.0 * z * z - 1.0);
    b[7] = c2 * x * z;
    b[8] = c4 * (x * x - y * y);
    return b;
}

inline double shShade(const Vec3& n, const SHCoefficients& L) {
    return L.dot(shBasis(n));
}

// d shade / d n (treating n as a free 3-vector).
inline Vec3 shShadeGradient(const Vec3& n, const SHCoefficients& L) {
    using namespace sh_constants;
    const double x = n.x(), y = n.y(), z = n.z();
    Vec3 g;
    g.x() = c1 * L[3] + c2 * (L[4] * y + L[7] * z) + 2.0 * c4 * L[8] * x;
    g.y() = c1 * L[1] + c2 * (L[4] * x + L[5] * z) - 2.0 * c4 * L[8] * y;
    g.z() = c1 * L[2] + c2 * (L[5] * y + L[7] * x) + 6.0 * c3 * L[6] * z;
    return g;
}

}  // namespace avatar::core
