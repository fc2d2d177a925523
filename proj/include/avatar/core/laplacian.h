#pragma once

#include "avatar/core/mesh.h"

namespace avatar::core {

// Cotangent-weighted Laplace matrix. Sign convention:
// (L x)_i = sum_j w_ij (x_i - x_j), so L is symmetric PSD with clamped
// non-negative weights and annihilates constant fields.
struct CotanLaplacian {
    SparseMat matrix;
    int clampedCotangents = 0;  // how many cot values hit the clamp

    VecX apply(const VecX& x) const { return matrix * x; }
};

// w_ij = (cot(alpha) + cot(beta)) / 2 over the (up to two) triangles
// incident to edge ij; single-cotangent on boundary edges. Cot values are
// clamped to [-cotClamp, cotClamp] to survive near-degenerate triangles.
CotanLaplacian cotanLaplacian(const TriMesh& mesh, double cotClamp = 10.0);

// Same weights over explicit positions (for re-weighting posed meshes).
CotanLaplacian cotanLaplacian(const std::vector<Vec3>& vertices,
                              const std::vector<std::array<int, 3>>& faces,
                              double cotClamp = 10.0);

}  // namespace avatar::core
