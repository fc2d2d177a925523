#pragma once

#include "avatar/types.h"

namespace avatar::core {

// Geman-McClure robust cost: rho(e) = |e|^2 / (sigma^2 + |e|^2).
// Bounded by 1, even in e, strictly increasing in |e|.
inline double gemanMcClure(double squaredNorm, double sigma) {
    if (sigma <= 0.0)
        throw Error("gemanMcClure: sigma must be positive");
    return squaredNorm / (sigma * sigma + squaredNorm);
}

inline double gemanMcClure(const Eigen::Ref<const VecX>& e, double sigma) {
    return gemanMcClure(e.squaredNorm(), sigma);
}

// d rho / d(squaredNorm); used as IRLS weight on the residual.
inline double gemanMcClureWeight(double squaredNorm, double sigma) {
    const double s2 = sigma * sigma;
    const double denom = s2 + squaredNorm;
    return s2 / (denom * denom);
}

}  // namespace avatar::core
