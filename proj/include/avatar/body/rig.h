#pragma once

#include "avatar/core/mesh.h"
#include "avatar/core/plucker.h"

namespace avatar::body {

// Rest-pose rigged template: mesh, skinning weights, joint regressor,
// kinematic tree and optional shape / pose-corrective bases.
struct RiggedTemplate {
    std::vector<Vec3> restVertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<Vec2, 3>> cornerUVs;

    SparseMat skinWeights;     // N x J, rows sum to 1
    SparseMat jointRegressor;  // J x N, joints = regressor * shaped rest
    std::vector<int> parents;  // parent joint per joint, root = -1

    // Columns are shape modes; rows are the vertex coordinates flattened as
    // (3*i + c). Zero columns allowed (no shape space).
    MatX shapeBasis;
    // Pose correctives, linear in vec(R(theta_j) - I) over non-root joints;
    // 3N x 9*(J-1), may be empty.
    MatX poseBasis;

    int vertexCount() const { return static_cast<int>(restVertices.size()); }
    int jointCount() const { return static_cast<int>(parents.size()); }
    int shapeDim() const { return static_cast<int>(shapeBasis.cols()); }

    core::TriMesh restMesh() const;
    void validate() const;
};

struct PoseParams {
    MatX jointRotations;  // J x 3 axis-angle
    Vec3 translation = Vec3::Zero();

    static PoseParams rest(int jointCount) {
        PoseParams p;
        p.jointRotations = MatX::Zero(jointCount, 3);
        return p;
    }
};

struct ShapeParams {
    VecX beta;
    static ShapeParams zero(int dim) { return {VecX::Zero(dim)}; }
};

// Per-vertex 3D offsets applied in the unposed frame.
using DisplacementField = std::vector<Vec3>;

// Result of posing: the mesh plus the per-vertex rigid blend transforms
// (including global translation), needed to unpose rays and normals.
struct PosedModel {
    core::TriMesh mesh;
    std::vector<Mat4> blendTransforms;  // per vertex
    std::vector<Mat4> jointTransforms;  // per joint (skinning transforms)
    std::vector<Vec3> unposedVertices;
};

// Unposed vertex positions T(beta, theta, D) = rest + Bs*beta + Bp(theta) + D.
std::vector<Vec3> unposedRestVertices(const RiggedTemplate& rig,
                                      const ShapeParams& shape,
                                      const PoseParams& pose,
                                      const DisplacementField& displacements);

// Linear blend skinning of the unposed vertices.
PosedModel pose(const RiggedTemplate& rig, const ShapeParams& shape,
                const PoseParams& pose, const DisplacementField& displacements);

// Same with externally supplied unposed positions (subdivided model path).
PosedModel poseVertices(const RiggedTemplate& rig, const ShapeParams& shape,
                        const PoseParams& pose,
                        const std::vector<Vec3>& unposed);

// Map a posed point back to the unposed frame via its blend transform.
Vec3 unposePoint(const Vec3& posed, const Mat4& blendTransform);

// Rotate a posed normal back to the unposed frame (rotation-only part).
Vec3 unposeNormal(const Vec3& posedNormal, const Mat4& blendTransform);

// Pose-corrective feature: vec(R(theta_j) - I) stacked over non-root joints.
VecX poseFeature(const RiggedTemplate& rig, const PoseParams& pose);

}  // namespace avatar::body
