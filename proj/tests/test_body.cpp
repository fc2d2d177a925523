#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avatar/body/capsule_rig.h"
#include "avatar/body/rig.h"
#include "avatar/body/rig_io.h"
#include "avatar/body/subdivision.h"
#include "avatar/core/plucker.h"

#include "test_helpers.h"

#include <Eigen/Geometry>
#include <filesystem>

using namespace avatar;
using namespace avatar::body;
using avatar::core::PluckerRay;
using avatar::core::TriMesh;

namespace {

RiggedTemplate singleJointRig() {
    RiggedTemplate rig;
    rig.restVertices = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0)};
    rig.faces = {{0, 1, 2}};
    rig.parents = {-1};
    rig.skinWeights.resize(3, 1);
    rig.skinWeights.insert(0, 0) = 1.0;
    rig.skinWeights.insert(1, 0) = 1.0;
    rig.skinWeights.insert(2, 0) = 1.0;
    // Joint regressed to the origin.
    rig.jointRegressor.resize(1, 3);
    rig.jointRegressor.insert(0, 0) = 0.5;
    rig.jointRegressor.insert(0, 1) = 0.5;
    return rig;
}

RiggedTemplate meshOnlyRig(const TriMesh& mesh) {
    RiggedTemplate rig;
    rig.restVertices = mesh.vertices;
    rig.faces = mesh.faces;
    rig.cornerUVs = mesh.cornerUVs;
    rig.parents = {-1};
    rig.skinWeights.resize(rig.vertexCount(), 1);
    for (int i = 0; i < rig.vertexCount(); ++i)
        rig.skinWeights.insert(i, 0) = 1.0;
    rig.jointRegressor.resize(1, rig.vertexCount());
    rig.jointRegressor.insert(0, 0) = 1.0;
    return rig;
}

PoseParams randomPose(const RiggedTemplate& rig, std::mt19937& rng, double scale) {
    std::uniform_real_distribution<double> uni(-scale, scale);
    PoseParams p = PoseParams::rest(rig.jointCount());
    for (int q = 0; q < rig.jointCount(); ++q)
        for (int c = 0; c < 3; ++c)
            p.jointRotations(q, c) = uni(rng);
    p.translation = Vec3(uni(rng), uni(rng), uni(rng));
    return p;
}

}  // namespace

TEST_CASE("pose at rest parameters is the identity") {
    CapsuleRig capsule = makeCapsuleRig();
    const RiggedTemplate& rig = capsule.rig;
    PosedModel posed = pose(rig, ShapeParams::zero(rig.shapeDim()),
                            PoseParams::rest(rig.jointCount()), {});
    for (int i = 0; i < rig.vertexCount(); ++i)
        CHECK((posed.mesh.vertices[i] - rig.restVertices[i]).norm() < 1e-14);
}

TEST_CASE("single joint 90 degree rotation") {
    RiggedTemplate rig = singleJointRig();
    PoseParams p = PoseParams::rest(1);
    p.jointRotations(0, 2) = M_PI / 2.0;  // about z
    PosedModel posed = pose(rig, ShapeParams::zero(0), p, {});
    CHECK(posed.mesh.vertices[0].isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST_CASE("LBS matches an explicit per-vertex blend oracle") {
    CapsuleRig capsule = makeCapsuleRig({12, 12, 1.8});
    const RiggedTemplate& rig = capsule.rig;
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> uni(-0.3, 0.3);

    ShapeParams shape{VecX::Zero(2)};
    shape.beta << 0.03, 0.05;
    PoseParams p = randomPose(rig, rng, 0.4);
    DisplacementField D(rig.vertexCount());
    for (auto& d : D)
        d = Vec3(uni(rng), uni(rng), uni(rng)) * 0.02;

    PosedModel posed = pose(rig, shape, p, D);

    // Independent oracle: regress joints, walk the chain, blend per vertex.
    const int J = rig.jointCount();
    const int n = rig.vertexCount();
    VecX shaped(3 * n);
    for (int i = 0; i < n; ++i)
        shaped.segment<3>(3 * i) = rig.restVertices[i];
    shaped += rig.shapeBasis * shape.beta;
    MatX joints = MatX::Zero(J, 3);
    for (int k = 0; k < rig.jointRegressor.outerSize(); ++k)
        for (SparseMat::InnerIterator it(rig.jointRegressor, k); it; ++it)
            joints.row(it.row()) +=
                it.value() * shaped.segment<3>(3 * it.col()).transpose();

    std::vector<Mat4> global(J);
    for (int q = 0; q < J; ++q) {
        const Vec3 aa = p.jointRotations.row(q);
        Mat4 local = Mat4::Identity();
        if (aa.norm() > 0)
            local.topLeftCorner<3, 3>() =
                Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
        const Vec3 jpos = joints.row(q);
        local.topRightCorner<3, 1>() =
            rig.parents[q] == -1 ? jpos
                                 : Vec3(jpos - Vec3(joints.row(rig.parents[q])));
        global[q] = rig.parents[q] == -1 ? local : Mat4(global[rig.parents[q]] * local);
    }

    MatX W = MatX(rig.skinWeights);
    for (int i = 0; i < n; ++i) {
        const Vec3 vbar = shaped.segment<3>(3 * i) + D[i];
        Vec3 blended = Vec3::Zero();
        for (int q = 0; q < J; ++q) {
            if (W(i, q) == 0.0)
                continue;
            const Vec3 local = vbar - Vec3(joints.row(q));
            blended += W(i, q) * (global[q].topLeftCorner<3, 3>() * local +
                                  global[q].topRightCorner<3, 1>());
        }
        blended += p.translation;
        CHECK((posed.mesh.vertices[i] - blended).norm() < 1e-10);
    }
}

TEST_CASE("unpose round trip on 1000 random vertices") {
    CapsuleRig capsule = makeCapsuleRig();
    const RiggedTemplate& rig = capsule.rig;
    std::mt19937 rng(17);
    PoseParams p = randomPose(rig, rng, 0.5);
    ShapeParams shape{VecX::Zero(2)};
    shape.beta << 0.01, -0.02;

    const auto unposed = unposedRestVertices(rig, shape, p, {});
    PosedModel posed = poseVertices(rig, shape, p, unposed);
    int checked = 0;
    for (int i = 0; i < rig.vertexCount() && checked < 1000; ++i, ++checked) {
        const Vec3 back = unposePoint(posed.mesh.vertices[i], posed.blendTransforms[i]);
        CHECK((back - unposed[i]).norm() < 1e-9);
    }
}

TEST_CASE("unposed normal of a rigidly rotated patch equals rest normal") {
    CapsuleRig capsule = makeCapsuleRig();
    const RiggedTemplate& rig = capsule.rig;
    PoseParams p = PoseParams::rest(rig.jointCount());
    p.jointRotations(0, 1) = 1.2;  // root-only: a rigid rotation
    p.translation = Vec3(0.2, 0.1, -0.4);

    PosedModel posed = pose(rig, ShapeParams::zero(2), p, {});
    const auto restNormals = core::vertexNormals(rig.restMesh());
    const auto posedNormals = core::vertexNormals(posed.mesh);
    for (int i = 0; i < rig.vertexCount(); i += 37) {
        const Vec3 back = unposeNormal(posedNormals[i], posed.blendTransforms[i]);
        CHECK((back - restNormals[i]).norm() < 1e-9);
    }
}

TEST_CASE("unposed ray distance equals posed distance") {
    CapsuleRig capsule = makeCapsuleRig();
    const RiggedTemplate& rig = capsule.rig;
    std::mt19937 rng(29);
    PoseParams p = randomPose(rig, rng, 0.5);
    PosedModel posed = pose(rig, ShapeParams::zero(2), p, {});

    // Distance is preserved exactly where the blended transform is rigid,
    // i.e. at vertices dominated by a single joint.
    std::vector<int> rigidVerts;
    for (int i = 0; i < rig.vertexCount(); ++i) {
        const Mat3 R = posed.blendTransforms[i].topLeftCorner<3, 3>();
        if ((R * R.transpose() - Mat3::Identity()).norm() < 1e-10)
            rigidVerts.push_back(i);
    }
    REQUIRE(rigidVerts.size() >= 50);

    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int i = rigidVerts[std::uniform_int_distribution<size_t>(
            0, rigidVerts.size() - 1)(rng)];
        PluckerRay posedRay = PluckerRay::fromPointDirection(
            posed.mesh.vertices[i] + Vec3(uni(rng), uni(rng), uni(rng)),
            testutil::randomUnit(rng));
        PluckerRay unposedRay = core::unposeRay(posedRay, posed.blendTransforms[i]);
        const double dPosed = core::pointToRayDistance(posed.mesh.vertices[i], posedRay);
        const double dUnposed =
            core::pointToRayDistance(posed.unposedVertices[i], unposedRay);
        CHECK(std::abs(dPosed - dUnposed) < 1e-9);
    }
}

TEST_CASE("subdivide: single triangle 1-to-4") {
    TriMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tri.faces = {{0, 1, 2}};
    TriMesh sub = subdivideMesh(tri, 1);
    CHECK(sub.vertexCount() == 6);
    CHECK(sub.faceCount() == 4);
}

TEST_CASE("subdivision counts and Euler characteristic on a closed mesh") {
    TriMesh sphere = testutil::makeIcosphere(1);
    auto euler = [](const TriMesh& m) {
        return m.vertexCount() -
               static_cast<int>(core::collectEdges(m).size()) + m.faceCount();
    };
    const int chi = euler(sphere);
    TriMesh cur = sphere;
    for (int s = 0; s < 2; ++s) {
        const int V = cur.vertexCount();
        const int E = static_cast<int>(core::collectEdges(cur).size());
        const int F = cur.faceCount();
        cur = subdivideMesh(cur, 1);
        CHECK(cur.vertexCount() == V + E);
        CHECK(cur.faceCount() == 4 * F);
        CHECK(euler(cur) == chi);
    }
}

TEST_CASE("non-manifold edge is rejected") {
    TriMesh bad;
    bad.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1),
                    Vec3(1, 1, 1)};
    bad.faces = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}};
    CHECK_THROWS_AS(subdivideMesh(bad, 1), Error);
}

TEST_CASE("subdivided model: weights still sum to 1, provenance valid") {
    CapsuleRig capsule = makeCapsuleRig({12, 12, 1.8});
    SubdividedModel model = subdivide(capsule.rig, 2);
    const int n = model.fineVertexCount();
    VecX rowSums = model.fine.skinWeights * VecX::Ones(model.fine.jointCount());
    for (int i = 0; i < n; ++i)
        CHECK(rowSums[i] == doctest::Approx(1.0).epsilon(1e-6));

    // Every inserted vertex's parents precede it.
    for (int k = 0; k < model.offsetCount(); ++k) {
        const int v = model.coarseVertexCount + k;
        CHECK(model.inserted[k].parentA < v);
        CHECK(model.inserted[k].parentB < v);
    }
}

TEST_CASE("fine positions are affine in S with Jacobian n_e") {
    CapsuleRig capsule = makeCapsuleRig({12, 12, 1.8});
    SubdividedModel model = subdivide(capsule.rig, 1);
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> uni(-0.01, 0.01);
    VecX S(model.offsetCount());
    for (int e = 0; e < S.size(); ++e)
        S[e] = uni(rng);

    const auto shape = ShapeParams::zero(2);
    const auto rest = PoseParams::rest(16);
    const auto base = model.unposedVertices(shape, rest, {}, S);

    // Finite differences against the offsetSupport expansion.
    const double h = 1e-6;
    for (int e = 0; e < std::min<int>(10, S.size()); ++e) {
        VecX Sp = S, Sm = S;
        Sp[e] += h;
        Sm[e] -= h;
        const auto plus = model.unposedVertices(shape, rest, {}, Sp);
        const auto minus = model.unposedVertices(shape, rest, {}, Sm);
        for (int v = 0; v < model.fineVertexCount(); ++v) {
            const Vec3 fd = (plus[v] - minus[v]) / (2 * h);
            Vec3 expected = Vec3::Zero();
            for (const auto& [ei, coef] : model.offsetSupport[v])
                if (ei == e)
                    expected = coef;
            CHECK((fd - expected).norm() < 1e-6 * std::max(1.0, expected.norm()));
        }
    }
    // Direct support for a first-level inserted vertex is exactly n_e.
    const int v0 = model.coarseVertexCount;
    bool found = false;
    for (const auto& [ei, coef] : model.offsetSupport[v0])
        if (ei == 0) {
            CHECK((coef - model.inserted[0].edgeNormal).norm() < 1e-12);
            found = true;
        }
    CHECK(found);
    (void)base;
}

TEST_CASE("fit_initial_offsets: flat grid stays flat") {
    RiggedTemplate rig = meshOnlyRig(testutil::makeGrid(6, 6, 0.2));
    SubdividedModel model = subdivide(rig, 1);
    OffsetFitResult fit = fitInitialOffsets(model);
    CHECK(fit.offsets.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit_initial_offsets: icosahedron midpoints move outward") {
    RiggedTemplate rig = meshOnlyRig(testutil::makeIcosahedron());
    SubdividedModel model = subdivide(rig, 1);
    OffsetFitResult fit = fitInitialOffsets(model);

    CHECK(fit.smoothnessAfter <= fit.smoothnessBefore + 1e-12);
    int outward = 0;
    for (int e = 0; e < fit.offsets.size(); ++e)
        if (fit.offsets[e] > 0)
            ++outward;
    CHECK(outward == fit.offsets.size());

    // Sphere RMS error decreases vs midpoint subdivision.
    auto radialRMS = [&](const VecX& S) {
        const auto verts = model.liftUnposed(rig.restVertices, S);
        double sum = 0;
        for (const Vec3& v : verts) {
            const double d = v.norm() - 1.0;
            sum += d * d;
        }
        return std::sqrt(sum / verts.size());
    };
    CHECK(radialRMS(fit.offsets) < radialRMS(VecX::Zero(fit.offsets.size())));
}

TEST_CASE("fit_initial_offsets smoothness never worse than midpoint on random meshes") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> uni(-0.08, 0.08);
    for (int trial = 0; trial < 10; ++trial) {
        TriMesh mesh = testutil::makeIcosphere(1);
        for (auto& v : mesh.vertices)
            v += Vec3(uni(rng), uni(rng), uni(rng));
        SubdividedModel model = subdivide(meshOnlyRig(mesh), 1);
        OffsetFitResult fit = fitInitialOffsets(model);
        CHECK(fit.smoothnessAfter <= fit.smoothnessBefore + 1e-12);
    }
}

TEST_CASE("rig file round trip preserves values") {
    CapsuleRig capsule = makeCapsuleRig({12, 12, 1.8});
    const auto path = std::filesystem::temp_directory_path() / "capsule_test_rig.json";
    saveRig(capsule.rig, path);
    RiggedTemplate loaded = loadRig(path);

    REQUIRE(loaded.vertexCount() == capsule.rig.vertexCount());
    for (int i = 0; i < loaded.vertexCount(); ++i)
        CHECK((loaded.restVertices[i] - capsule.rig.restVertices[i]).norm() < 1e-9);
    CHECK(loaded.faces == capsule.rig.faces);
    CHECK(loaded.parents == capsule.rig.parents);
    CHECK((MatX(loaded.skinWeights) - MatX(capsule.rig.skinWeights))
              .cwiseAbs().maxCoeff() < 1e-9);
    CHECK((loaded.shapeBasis - capsule.rig.shapeBasis).cwiseAbs().maxCoeff() < 1e-9);
    std::filesystem::remove(path);
}

TEST_CASE("pose rejects out-of-range axis-angle") {
    RiggedTemplate rig = singleJointRig();
    PoseParams p = PoseParams::rest(1);
    p.jointRotations(0, 0) = 7.0;  // > 2*pi
    CHECK_THROWS_AS(pose(rig, ShapeParams::zero(0), p, {}), Error);
}
