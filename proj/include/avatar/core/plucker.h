#pragma once

#include "avatar/types.h"

namespace avatar::core {

// A 3D line in Plucker coordinates: unit direction n and moment m = p x n
// for any point p on the line. Valid pairs satisfy m . n = 0.
struct PluckerRay {
    Vec3 moment;
    Vec3 direction;

    static PluckerRay fromPointDirection(const Vec3& point, const Vec3& dir) {
        const double len = dir.norm();
        if (len < 1e-12)
            throw Error("PluckerRay: zero-length direction");
        PluckerRay r;
        r.direction = dir / len;
        r.moment = point.cross(r.direction);
        return r;
    }

    static PluckerRay fromTwoPoints(const Vec3& a, const Vec3& b) {
        return fromPointDirection(a, b - a);
    }

    // Point on the ray closest to the origin.
    Vec3 anchorPoint() const { return direction.cross(moment); }

    bool isValid(double tol = 1e-9) const {
        return std::abs(direction.norm() - 1.0) <= tol &&
               std::abs(moment.dot(direction)) <= tol;
    }
};

// Residual whose norm is the Euclidean point-to-line distance.
inline Vec3 pointToRayResidual(const Vec3& point, const PluckerRay& ray) {
    return point.cross(ray.direction) - ray.moment;
}

inline double pointToRayDistance(const Vec3& point, const PluckerRay& ray) {
    return pointToRayResidual(point, ray).norm();
}

// Jacobian of pointToRayResidual w.r.t. the point: d(p x n)/dp = -[n]x.
inline Mat3 pointToRayJacobian(const PluckerRay& ray) {
    const Vec3& n = ray.direction;
    Mat3 J;
    J <<     0,  n.z(), -n.y(),
        -n.z(),      0,  n.x(),
         n.y(), -n.x(),      0;
    return J;
}

// Transform a ray by a rigid transform (posed = T * rest applied to points).
PluckerRay transformRay(const PluckerRay& ray, const Mat4& transform);

// Transform a ray by the inverse of the given rigid blend transform, i.e.
// map it from posed space back into unposed space. Throws
// DegeneratePoseError when the transform is singular.
PluckerRay unposeRay(const PluckerRay& ray, const Mat4& blendTransform);

}  // namespace avatar::core
