#pragma once

#include "avatar/core/mesh.h"
#include "avatar/core/sh.h"
#include "avatar/image/image.h"
#include "avatar/render/camera.h"

#include <vector>

namespace avatar::shading {

// One observation for illumination fitting: a surface normal and the
// shading value seen at its projection.
struct ShadingSample {
    Vec3 normal;
    double intensity;
};

struct SHFitResult {
    core::SHCoefficients coefficients;
    double l1Residual = 0;    // mean |H_L(n) - I| at the optimum
    bool rankDeficient = false;
};

// Minimizes sum |H_L(n_i) - I_i| over the 9 SH coefficients by iteratively
// reweighted least squares. Needs at least 200 samples; a rank-deficient
// system (e.g. all normals equal) is solved with damping and flagged.
SHFitResult fitSH(const std::vector<ShadingSample>& samples, int irlsRounds = 10,
                  double smoothing = 1e-4);

// Per-vertex auxiliary normals for one frame.
struct AuxiliaryNormalField {
    std::vector<Vec3> normals;  // unit length on mask
    std::vector<char> mask;
};

struct NormalEstimationOptions {
    double smoothnessWeight = 0.5;  // weight of the normal Laplacian term
    int maxIterations = 30;
};

// Estimates normals that explain the shading image: per-edge simulated
// shading gradients H_L(n_i) - H_L(n_j) are matched to image gradients
// I_s(P v_i) - I_s(P v_j), regularized by a Laplacian on the normal field.
// Normals are parameterized as unit-normalized tangent-plane offsets from
// the geometric prior, which keeps them unit length and within 90 degrees
// of the prior by construction.
AuxiliaryNormalField estimateNormals(const core::TriMesh& posed,
                                     const render::PinholeCamera& cam,
                                     const image::Image& shadingImage,
                                     const core::SHCoefficients& light,
                                     const std::vector<char>& visible,
                                     const NormalEstimationOptions& opts = {});

}  // namespace avatar::shading
