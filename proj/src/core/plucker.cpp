#include "avatar/core/plucker.h"

namespace avatar::core {

PluckerRay transformRay(const PluckerRay& ray, const Mat4& transform) {
    const Mat3 R = transform.topLeftCorner<3, 3>();
    const Vec3 t = transform.topRightCorner<3, 1>();
    const Vec3 p = ray.anchorPoint();
    PluckerRay out;
    out.direction = (R * ray.direction).normalized();
    out.moment = (R * p + t).cross(out.direction);
    return out;
}

PluckerRay unposeRay(const PluckerRay& ray, const Mat4& blendTransform) {
    const Mat3 R = blendTransform.topLeftCorner<3, 3>();
    if (std::abs(R.determinant()) < 1e-9)
        throw DegeneratePoseError("unposeRay: singular blend transform");
    Mat4 inv = Mat4::Identity();
    const Mat3 Rinv = R.inverse();
    inv.topLeftCorner<3, 3>() = Rinv;
    inv.topRightCorner<3, 1>() = -Rinv * blendTransform.topRightCorner<3, 1>();
    return transformRay(ray, inv);
}

}  // namespace avatar::core
