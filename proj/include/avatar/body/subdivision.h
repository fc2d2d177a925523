#pragma once

#include "avatar/body/rig.h"

namespace avatar::body {

// Plain 1-to-4 midpoint subdivision of a mesh (V' = V + E, F' = 4F).
core::TriMesh subdivideMesh(const core::TriMesh& mesh, int steps);

// Provenance of one inserted edge-midpoint vertex.
struct InsertedVertex {
    int parentA = -1;  // vertex indices of the split edge (previous level)
    int parentB = -1;
    Vec3 edgeNormal = Vec3::Zero();  // frozen unposed-space normal n_e
    int level = 0;
};

// Subdivided rigged model. The fine template carries averaged skinning
// weights / UVs / basis rows for the inserted vertices; unposed positions
// are affine in (beta, D, S): inserted v = 0.5(va + vb) + s_e * n_e.
struct SubdividedModel {
    RiggedTemplate fine;
    int coarseVertexCount = 0;
    std::vector<InsertedVertex> inserted;  // vertices [coarseN, fineN)

    // Affine expansion of every fine vertex over coarse vertices and S
    // entries, for Jacobians and fast evaluation.
    std::vector<std::vector<std::pair<int, double>>> coarseSupport;
    std::vector<std::vector<std::pair<int, Vec3>>> offsetSupport;

    int fineVertexCount() const { return fine.vertexCount(); }
    int offsetCount() const { return static_cast<int>(inserted.size()); }

    // Unposed fine positions for given coarse unposed positions and S.
    std::vector<Vec3> liftUnposed(const std::vector<Vec3>& coarseUnposed,
                                  const VecX& normalOffsets) const;

    std::vector<Vec3> unposedVertices(const ShapeParams& shape,
                                      const PoseParams& pose,
                                      const DisplacementField& displacements,
                                      const VecX& normalOffsets) const;
};

// Subdivide the rigged template `steps` times. Throws on non-manifold
// edges. Inserted-vertex attributes are endpoint averages; edge normals are
// frozen from the rest-pose (unposed) surface of the previous level.
SubdividedModel subdivide(const RiggedTemplate& rig, int steps);

struct OffsetFitResult {
    VecX offsets;              // S0, one scalar per inserted vertex
    double smoothnessBefore;   // |L M'(0)|
    double smoothnessAfter;    // |L M'(S0)|
    bool rankDeficient = false;
};

// Initial normal offsets S0 minimizing |L M'(S)|^2 over the rest shape
// (linear least squares; positions are affine in S).
OffsetFitResult fitInitialOffsets(const SubdividedModel& model);

}  // namespace avatar::body
