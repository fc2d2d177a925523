#include "avatar/body/rig.h"

#include <Eigen/Geometry>

namespace avatar::body {

core::TriMesh RiggedTemplate::restMesh() const {
    core::TriMesh mesh;
    mesh.vertices = restVertices;
    mesh.faces = faces;
    mesh.cornerUVs = cornerUVs;
    return mesh;
}

void RiggedTemplate::validate() const {
    const int n = vertexCount();
    const int j = jointCount();
    if (skinWeights.rows() != n || skinWeights.cols() != j)
        throw Error("RiggedTemplate: skin weight dimensions inconsistent");
    if (jointRegressor.rows() != j || jointRegressor.cols() != n)
        throw Error("RiggedTemplate: joint regressor dimensions inconsistent");

    VecX rowSums = skinWeights * VecX::Ones(j);
    for (int i = 0; i < n; ++i) {
        if (std::abs(rowSums[i] - 1.0) > 1e-6)
            throw Error("RiggedTemplate: weight row " + std::to_string(i) +
                        " sums to " + std::to_string(rowSums[i]));
    }
    for (int k = 0; k < skinWeights.outerSize(); ++k)
        for (SparseMat::InnerIterator it(skinWeights, k); it; ++it)
            if (it.value() < -1e-12)
                throw Error("RiggedTemplate: negative skin weight");

    int roots = 0;
    for (int q = 0; q < j; ++q) {
        if (parents[q] == -1)
            ++roots;
        else if (parents[q] < 0 || parents[q] >= j || parents[q] >= q)
            throw Error("RiggedTemplate: parents must precede children");
    }
    if (roots != 1)
        throw Error("RiggedTemplate: kinematic tree must have one root");

    if (shapeBasis.size() > 0 && shapeBasis.rows() != 3 * n)
        throw Error("RiggedTemplate: shape basis rows != 3N");
    if (poseBasis.size() > 0 &&
        (poseBasis.rows() != 3 * n || poseBasis.cols() != 9 * (j - 1)))
        throw Error("RiggedTemplate: pose basis dimensions inconsistent");

    core::TriMesh mesh = restMesh();
    mesh.validate();
}

VecX poseFeature(const RiggedTemplate& rig, const PoseParams& pose) {
    const int j = rig.jointCount();
    VecX f(9 * (j - 1));
    for (int q = 1; q < j; ++q) {
        const Vec3 aa = pose.jointRotations.row(q);
        const Mat3 R = aa.norm() < 1e-12
                           ? Mat3::Identity()
                           : Eigen::AngleAxisd(aa.norm(), aa.normalized())
                                 .toRotationMatrix();
        const Mat3 dev = R - Mat3::Identity();
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 3; ++r)
                f[9 * (q - 1) + 3 * c + r] = dev(r, c);
    }
    return f;
}

std::vector<Vec3> unposedRestVertices(const RiggedTemplate& rig,
                                      const ShapeParams& shape,
                                      const PoseParams& pose,
                                      const DisplacementField& displacements) {
    const int n = rig.vertexCount();
    if (!displacements.empty() && static_cast<int>(displacements.size()) != n)
        throw Error("unposedRestVertices: displacement field size mismatch");
    if (shape.beta.size() != rig.shapeDim())
        throw Error("unposedRestVertices: beta dimension mismatch");

    VecX offset = VecX::Zero(3 * n);
    if (rig.shapeDim() > 0)
        offset += rig.shapeBasis * shape.beta;
    if (rig.poseBasis.size() > 0)
        offset += rig.poseBasis * poseFeature(rig, pose);

    std::vector<Vec3> out(n);
    for (int i = 0; i < n; ++i) {
        out[i] = rig.restVertices[i] + offset.segment<3>(3 * i);
        if (!displacements.empty())
            out[i] += displacements[i];
    }
    return out;
}

namespace {

// Global skinning transforms A_j = G_j(theta) * G_j(0)^-1 given regressed
// joint locations.
std::vector<Mat4> skinningTransforms(const RiggedTemplate& rig,
                                     const ShapeParams& shape,
                                     const PoseParams& pose) {
    const int j = rig.jointCount();
    const int n = rig.vertexCount();

    // Joints are regressed from the shaped rest (no pose correctives, no D).
    VecX shaped(3 * n);
    for (int i = 0; i < n; ++i)
        shaped.segment<3>(3 * i) = rig.restVertices[i];
    if (rig.shapeDim() > 0)
        shaped += rig.shapeBasis * shape.beta;
    std::vector<Vec3> joints(j, Vec3::Zero());
    for (int k = 0; k < rig.jointRegressor.outerSize(); ++k)
        for (SparseMat::InnerIterator it(rig.jointRegressor, k); it; ++it)
            joints[it.row()] += it.value() * shaped.segment<3>(3 * it.col());

    std::vector<Mat4> global(j);
    for (int q = 0; q < j; ++q) {
        const Vec3 aa = pose.jointRotations.row(q);
        Mat4 local = Mat4::Identity();
        if (aa.norm() > 1e-12)
            local.topLeftCorner<3, 3>() =
                Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
        const Vec3 offset =
            rig.parents[q] == -1 ? joints[q] : Vec3(joints[q] - joints[rig.parents[q]]);
        local.topRightCorner<3, 1>() = offset;
        global[q] = rig.parents[q] == -1 ? local : Mat4(global[rig.parents[q]] * local);
    }

    std::vector<Mat4> skin(j);
    for (int q = 0; q < j; ++q) {
        Mat4 restInv = Mat4::Identity();
        restInv.topRightCorner<3, 1>() = -joints[q];
        skin[q] = global[q] * restInv;
        skin[q].topRightCorner<3, 1>() += pose.translation;
    }
    return skin;
}

}  // namespace

PosedModel poseVertices(const RiggedTemplate& rig, const ShapeParams& shape,
                        const PoseParams& pose,
                        const std::vector<Vec3>& unposed) {
    if (unposed.size() != rig.restVertices.size())
        throw Error("poseVertices: vertex count mismatch");
    if (pose.jointRotations.rows() != rig.jointCount())
        throw Error("poseVertices: pose dimension mismatch");
    for (int q = 0; q < rig.jointCount(); ++q)
        if (pose.jointRotations.row(q).norm() >= 2.0 * M_PI)
            throw Error("poseVertices: axis-angle magnitude out of range");

    const std::vector<Mat4> skin = skinningTransforms(rig, shape, pose);

    PosedModel out;
    out.jointTransforms = skin;
    out.unposedVertices = unposed;
    out.mesh.faces = rig.faces;
    out.mesh.cornerUVs = rig.cornerUVs;
    out.mesh.vertices.resize(unposed.size());
    out.blendTransforms.resize(unposed.size());

    for (int i = 0; i < rig.vertexCount(); ++i)
        out.blendTransforms[i].setZero();
    for (int k = 0; k < rig.skinWeights.outerSize(); ++k)
        for (SparseMat::InnerIterator it(rig.skinWeights, k); it; ++it)
            out.blendTransforms[it.row()] += it.value() * skin[it.col()];

    for (size_t i = 0; i < unposed.size(); ++i) {
        const Mat4& M = out.blendTransforms[i];
        out.mesh.vertices[i] =
            M.topLeftCorner<3, 3>() * unposed[i] + M.topRightCorner<3, 1>();
    }
    return out;
}

PosedModel pose(const RiggedTemplate& rig, const ShapeParams& shape,
                const PoseParams& posePar, const DisplacementField& displacements) {
    return poseVertices(rig, shape, posePar,
                        unposedRestVertices(rig, shape, posePar, displacements));
}

Vec3 unposePoint(const Vec3& posed, const Mat4& blendTransform) {
    const Mat3 R = blendTransform.topLeftCorner<3, 3>();
    if (std::abs(R.determinant()) < 1e-9)
        throw DegeneratePoseError("unposePoint: singular blend transform");
    return R.inverse() * (posed - blendTransform.topRightCorner<3, 1>());
}

Vec3 unposeNormal(const Vec3& posedNormal, const Mat4& blendTransform) {
    const Mat3 R = blendTransform.topLeftCorner<3, 3>();
    if (std::abs(R.determinant()) < 1e-9)
        throw DegeneratePoseError("unposeNormal: singular blend transform");
    return (R.inverse() * posedNormal).normalized();
}

}  // namespace avatar::body
