#pragma once

#include "avatar/core/plucker.h"
#include "avatar/types.h"

namespace avatar::render {

// Pinhole camera. Camera frame looks down +z; pixel origin top-left,
// pixel coordinates are continuous with integer values at pixel centers.
struct PinholeCamera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat4 worldToCamera = Mat4::Identity();

    void validate() const;

    Mat4 cameraToWorld() const;
    Vec3 center() const;  // camera center in world coordinates

    Vec3 toCamera(const Vec3& world) const;
    // Projects a world point; returns (px, py) and writes positive depth.
    Vec2 project(const Vec3& world, double* depth = nullptr) const;
    // World-space viewing ray through a pixel, directed away from the camera.
    core::PluckerRay pixelRay(const Vec2& pixel) const;
    // World-space unit direction from the camera center toward a point.
    Vec3 viewDirection(const Vec3& world) const;
    // World point seen at a pixel at the given positive camera-space depth.
    Vec3 unproject(const Vec2& pixel, double depth) const;
};

// Turntable view: camera at the given distance and height, looking at the
// target point, rotated by azimuth (radians) around the world y axis.
PinholeCamera makeOrbitCamera(const Vec3& target, double distance, double height,
                              double azimuth, double focal, int width, int height_);

}  // namespace avatar::render
