#pragma once

#include "avatar/body/rig.h"

namespace avatar::body {

// Semantic part palette used by the synthetic person fixtures.
enum class BodyPart : int {
    Hair = 0,
    Face = 1,
    UpperClothes = 2,
    LeftArm = 3,
    RightArm = 4,
    Pants = 5,
    LeftLeg = 6,
    RightLeg = 7,
    LeftShoe = 8,
    RightShoe = 9,
};
inline constexpr int kBodyPartCount = 10;

struct CapsuleRigOptions {
    int segments = 24;   // vertices per ring
    int rings = 24;      // rings between the two poles
    double height = 1.8; // meters
};

// Self-contained synthetic "capsule person": a closed capsule-like surface
// with a person-ish radius profile, 16 joints, smooth vertical skinning
// bands, a 2-mode shape basis (radial girth, height) and a cylindrical UV
// chart with one vertical seam.
struct CapsuleRig {
    RiggedTemplate rig;
    std::vector<int> faceLabels;               // BodyPart per face
    std::vector<core::SurfaceAnchor> faceLandmarks;  // static landmark anchors
    std::vector<int> mirrorVertex;             // left-right symmetric partner
};

CapsuleRig makeCapsuleRig(const CapsuleRigOptions& opts = {});

}  // namespace avatar::body
