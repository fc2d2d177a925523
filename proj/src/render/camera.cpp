#include "avatar/render/camera.h"

#include <cmath>

namespace avatar::render {

void PinholeCamera::validate() const {
    if (fx <= 0 || fy <= 0)
        throw InputFormatError("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw InputFormatError("camera: resolution must be positive");
    const Mat3 R = worldToCamera.topLeftCorner<3, 3>();
    if ((R * R.transpose() - Mat3::Identity()).norm() > 1e-6)
        throw InputFormatError("camera: extrinsic rotation is not orthonormal");
}

Mat4 PinholeCamera::cameraToWorld() const {
    Mat4 inv = Mat4::Identity();
    const Mat3 R = worldToCamera.topLeftCorner<3, 3>();
    inv.topLeftCorner<3, 3>() = R.transpose();
    inv.topRightCorner<3, 1>() = -R.transpose() * worldToCamera.topRightCorner<3, 1>();
    return inv;
}

Vec3 PinholeCamera::center() const {
    return cameraToWorld().topRightCorner<3, 1>();
}

Vec3 PinholeCamera::toCamera(const Vec3& world) const {
    return worldToCamera.topLeftCorner<3, 3>() * world +
           worldToCamera.topRightCorner<3, 1>();
}

Vec2 PinholeCamera::project(const Vec3& world, double* depth) const {
    const Vec3 c = toCamera(world);
    if (depth)
        *depth = c.z();
    return Vec2(fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy);
}

core::PluckerRay PinholeCamera::pixelRay(const Vec2& pixel) const {
    const Vec3 dirCam((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0);
    const Mat3 Rinv = worldToCamera.topLeftCorner<3, 3>().transpose();
    return core::PluckerRay::fromPointDirection(center(), Rinv * dirCam);
}

Vec3 PinholeCamera::viewDirection(const Vec3& world) const {
    return (world - center()).normalized();
}

Vec3 PinholeCamera::unproject(const Vec2& pixel, double depth) const {
    if (depth <= 0)
        throw Error("camera: unproject needs a positive depth");
    const Vec3 cam((pixel.x() - cx) / fx * depth, (pixel.y() - cy) / fy * depth,
                   depth);
    const Mat3 Rinv = worldToCamera.topLeftCorner<3, 3>().transpose();
    return Rinv * (cam - worldToCamera.topRightCorner<3, 1>());
}

PinholeCamera makeOrbitCamera(const Vec3& target, double distance, double height,
                              double azimuth, double focal, int width,
                              int height_) {
    const Vec3 offset(distance * std::sin(azimuth), height,
                      -distance * std::cos(azimuth));
    const Vec3 eye = target + offset;

    // Look-at frame: z toward the target, y roughly down (image origin
    // top-left means +y points down in the image).
    const Vec3 z = (target - eye).normalized();
    Vec3 x = Vec3(0, -1, 0).cross(z).normalized();
    const Vec3 y = z.cross(x);

    PinholeCamera cam;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height_ - 1);
    cam.width = width;
    cam.height = height_;
    Mat3 R;
    R.row(0) = x.transpose();
    R.row(1) = y.transpose();
    R.row(2) = z.transpose();
    cam.worldToCamera.topLeftCorner<3, 3>() = R;
    cam.worldToCamera.topRightCorner<3, 1>() = -R * eye;
    cam.validate();
    return cam;
}

}  // namespace avatar::render
