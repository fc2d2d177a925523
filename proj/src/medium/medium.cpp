#include "avatar/medium/medium.h"

#include "avatar/core/laplacian.h"
#include "avatar/render/raster.h"
#include "avatar/core/mesh.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace avatar::medium {

void Keyframe::validate() const {
    camera.validate();
    for (const auto& lm : landmarks)
        if (lm.confidence < 0.0 || lm.confidence > 1.0)
            throw Error("Keyframe " + std::to_string(frameId) +
                        ": landmark confidence out of [0,1]");
    for (const auto& poly : silhouette)
        if (poly.size() < 3)
            throw Error("Keyframe " + std::to_string(frameId) +
                        ": silhouette polygon with fewer than 3 points");
}

std::vector<int> contourVertices(const core::TriMesh& posed,
                                 const render::PinholeCamera& cam) {
    const int nf = posed.faceCount();
    std::vector<signed char> faceSign(nf);
    for (int f = 0; f < nf; ++f) {
        const auto& tri = posed.faces[f];
        const Vec3 centroid = (posed.vertices[tri[0]] + posed.vertices[tri[1]] +
                               posed.vertices[tri[2]]) /
                              3.0;
        const double s =
            core::faceNormalScaled(posed, f).dot(cam.viewDirection(centroid));
        faceSign[f] = s >= 0 ? 1 : -1;
    }

    std::vector<int> out;
    const auto incident = core::vertexFaces(posed);
    for (int i = 0; i < posed.vertexCount(); ++i) {
        bool pos = false, neg = false;
        for (int f : incident[i])
            (faceSign[f] > 0 ? pos : neg) = true;
        if (pos && neg)
            out.push_back(i);
    }
    return out;
}

std::vector<int> visibleContourVertices(const core::TriMesh& posed,
                                        const render::PinholeCamera& cam) {
    // Clearance below the z-buffer that counts as occluded; generous so
    // grazing contour vertices survive rasterization noise.
    constexpr double kOcclusionTol = 0.015;
    const render::DepthMap depthMap = render::renderDepth(posed, cam);
    std::vector<int> out;
    for (int v : contourVertices(posed, cam)) {
        double z = 0.0;
        const Vec2 px = cam.project(posed.vertices[v], &z);
        if (z <= 0.0)
            continue;
        const int x = static_cast<int>(std::lround(px.x()));
        const int y = static_cast<int>(std::lround(px.y()));
        if (depthMap.depth.inside(x, y) &&
            depthMap.depth.at(x, y) < static_cast<float>(z - kOcclusionTol))
            continue;
        out.push_back(v);
    }
    return out;
}

Mat4 anchorBlendTransform(const body::PosedModel& posed,
                          const core::SurfaceAnchor& anchor) {
    const auto& tri = posed.mesh.faces[anchor.face];
    Mat4 T = Mat4::Zero();
    for (int c = 0; c < 3; ++c)
        T += anchor.barycentric[c] * posed.blendTransforms[tri[c]];
    return T;
}

Vec3 posedAnchorPoint(const body::PosedModel& posed,
                      const core::SurfaceAnchor& anchor) {
    const auto& tri = posed.mesh.faces[anchor.face];
    Vec3 unposed = Vec3::Zero();
    for (int c = 0; c < 3; ++c)
        unposed += anchor.barycentric[c] * posed.unposedVertices[tri[c]];
    const Mat4 T = anchorBlendTransform(posed, anchor);
    return T.topLeftCorner<3, 3>() * unposed + T.topRightCorner<3, 1>();
}

double rotationCoverageDegrees(const body::RiggedTemplate& rig,
                               const std::vector<Keyframe>& keyframes) {
    if (keyframes.empty())
        return 0.0;
    std::vector<double> azimuths;
    const body::ShapeParams shape = body::ShapeParams::zero(rig.shapeDim());
    for (const Keyframe& kf : keyframes) {
        const body::PosedModel posed = body::pose(rig, shape, kf.pose, {});
        Vec3 centroid = Vec3::Zero();
        for (const Vec3& v : posed.mesh.vertices)
            centroid += v;
        centroid /= posed.mesh.vertexCount();
        const Vec3 rel = kf.camera.center() - centroid;
        azimuths.push_back(std::atan2(rel.x(), rel.z()));
    }
    std::sort(azimuths.begin(), azimuths.end());
    double maxGap = 2.0 * M_PI - (azimuths.back() - azimuths.front());
    for (size_t i = 1; i < azimuths.size(); ++i)
        maxGap = std::max(maxGap, azimuths[i] - azimuths[i - 1]);
    return (2.0 * M_PI - maxGap) * 180.0 / M_PI;
}

namespace {

// Point-to-ray residual for a surface anchor whose unposed position is
// affine in (beta, corner displacements); the ray is frozen in unposed
// space at association time.
class RayFitResidual : public solve::ResidualBlockBase {
public:
    RayFitResidual(std::vector<int> blocks, bool hasBeta, Vec3 base,
                   std::vector<double> cornerWeights, MatX betaJacobian,
                   core::PluckerRay ray)
        : ResidualBlockBase(std::move(blocks)), hasBeta_(hasBeta),
          base_(std::move(base)), cornerWeights_(std::move(cornerWeights)),
          betaJacobian_(std::move(betaJacobian)), ray_(ray) {}

    int residualSize() const override { return 3; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        Vec3 u = base_;
        size_t p = 0;
        if (hasBeta_)
            u += betaJacobian_ * (*params[p++]);
        for (size_t k = 0; k < cornerWeights_.size(); ++k, ++p)
            u += cornerWeights_[k] * Vec3((*params[p]));
        residual = core::pointToRayResidual(u, ray_);
        if (jacobians) {
            const Mat3 J = core::pointToRayJacobian(ray_);
            size_t q = 0;
            if (hasBeta_)
                (*jacobians)[q++] = J * betaJacobian_;
            for (size_t k = 0; k < cornerWeights_.size(); ++k, ++q)
                (*jacobians)[q] = cornerWeights_[k] * J;
        }
    }

private:
    bool hasBeta_;
    Vec3 base_;
    std::vector<double> cornerWeights_;
    MatX betaJacobian_;  // 3 x shapeDim, empty when hasBeta_ is false
    core::PluckerRay ray_;
};

// r = sum_k A_k * d_k over displacement blocks (Laplacian rows, ridge,
// symmetry).
class LinearCombinationResidual : public solve::ResidualBlockBase {
public:
    LinearCombinationResidual(std::vector<int> blocks, std::vector<Mat3> coeffs)
        : ResidualBlockBase(std::move(blocks)), coeffs_(std::move(coeffs)) {}

    int residualSize() const override { return 3; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        Vec3 r = Vec3::Zero();
        for (size_t k = 0; k < coeffs_.size(); ++k)
            r += coeffs_[k] * Vec3((*params[k]));
        residual = r;
        if (jacobians)
            for (size_t k = 0; k < coeffs_.size(); ++k)
                (*jacobians)[k] = coeffs_[k];
    }

private:
    std::vector<Mat3> coeffs_;
};

// Mirror partner of every vertex across the symmetry plane of the rest
// shape, or -1 when no vertex lies close enough to the reflection.
std::vector<int> mirrorMap(const std::vector<Vec3>& rest, int axis) {
    Vec3 lo = rest.front(), hi = rest.front();
    for (const Vec3& v : rest) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const double tol = 1e-8 + 1e-6 * (hi - lo).norm();

    std::vector<int> out(rest.size(), -1);
    for (size_t i = 0; i < rest.size(); ++i) {
        Vec3 m = rest[i];
        m[axis] = -m[axis];
        double best = tol;
        for (size_t j = 0; j < rest.size(); ++j) {
            const double d = (rest[j] - m).norm();
            if (d < best) {
                best = d;
                out[i] = static_cast<int>(j);
            }
        }
    }
    return out;
}

}  // namespace

MediumProblem::MediumProblem(const body::RiggedTemplate& rig,
                             const LandmarkMapping& mapping,
                             const MediumConfig& config)
    : rig_(rig), mapping_(mapping), config_(config) {
    const int n = rig.vertexCount();
    if (rig.shapeDim() > 0)
        betaBlock_ =
            problem_.addParameterBlock("beta", VecX::Zero(rig.shapeDim()));
    dBlocks_.resize(n);
    for (int i = 0; i < n; ++i)
        dBlocks_[i] =
            problem_.addParameterBlock("d" + std::to_string(i), VecX::Zero(3));

    // |L(T + D) - L T|^2 = |L D|^2, one residual per Laplacian row.
    const core::CotanLaplacian lap = core::cotanLaplacian(rig.restMesh());
    for (int i = 0; i < n; ++i) {
        std::vector<int> blocks;
        std::vector<Mat3> coeffs;
        for (SparseMat::InnerIterator it(lap.matrix, i); it; ++it) {
            blocks.push_back(dBlocks_[it.row()]);
            coeffs.push_back(it.value() * Mat3::Identity());
        }
        problem_.addResidualBlock(std::make_unique<LinearCombinationResidual>(
                                      std::move(blocks), std::move(coeffs)),
                                  "lap", config.lapWeight);
    }

    for (int i = 0; i < n; ++i)
        problem_.addResidualBlock(
            std::make_unique<LinearCombinationResidual>(
                std::vector<int>{dBlocks_[i]},
                std::vector<Mat3>{Mat3::Identity()}),
            "ridge", config.ridgeWeight);

    if (config.symWeight > 0) {
        Mat3 M = Mat3::Identity();
        M(config.symmetryAxis, config.symmetryAxis) = -1.0;
        const std::vector<int> mirror =
            mirrorMap(rig.restVertices, config.symmetryAxis);
        for (int i = 0; i < n; ++i) {
            const int j = mirror[i];
            if (j < 0 || j < i)
                continue;
            if (j == i)
                problem_.addResidualBlock(
                    std::make_unique<LinearCombinationResidual>(
                        std::vector<int>{dBlocks_[i]},
                        std::vector<Mat3>{Mat3::Identity() - M}),
                    "sym", config.symWeight);
            else
                problem_.addResidualBlock(
                    std::make_unique<LinearCombinationResidual>(
                        std::vector<int>{dBlocks_[i], dBlocks_[j]},
                        std::vector<Mat3>{Mat3::Identity(), Mat3(-M)}),
                    "sym", config.symWeight);
        }
    }
}

body::ShapeParams MediumProblem::currentShape() const {
    if (betaBlock_ < 0)
        return body::ShapeParams::zero(0);
    return {problem_.parameterBlock(betaBlock_).values};
}

body::DisplacementField MediumProblem::currentDisplacements() const {
    body::DisplacementField d(dBlocks_.size());
    for (size_t i = 0; i < dBlocks_.size(); ++i)
        d[i] = Vec3(problem_.parameterBlock(dBlocks_[i]).values);
    return d;
}

void MediumProblem::associate(const std::vector<Keyframe>& keyframes) {
    problem_.clearTerm("silh");
    problem_.clearTerm("face");
    silhouetteResiduals_ = 0;
    faceResiduals_ = 0;
    skippedFrames_ = 0;

    const body::ShapeParams shape = currentShape();
    const body::DisplacementField displacements = currentDisplacements();
    const int shapeDim = rig_.shapeDim();

    for (const Keyframe& kf : keyframes) {
        const body::PosedModel posed =
            body::pose(rig_, shape, kf.pose, displacements);

        // Unposed positions without the variable parts: affine base so the
        // frozen residual is exact in (beta, D).
        std::vector<Vec3> base(rig_.vertexCount());
        {
            VecX corrective = VecX::Zero(3 * rig_.vertexCount());
            if (rig_.poseBasis.size() > 0)
                corrective = rig_.poseBasis * body::poseFeature(rig_, kf.pose);
            for (int i = 0; i < rig_.vertexCount(); ++i)
                base[i] = rig_.restVertices[i] + corrective.segment<3>(3 * i);
        }
        const auto betaSlice = [&](int v) -> MatX {
            return shapeDim > 0 ? MatX(rig_.shapeBasis.middleRows(3 * v, 3))
                                : MatX();
        };

        std::vector<Vec2> boundary;
        for (const auto& poly : kf.silhouette)
            boundary.insert(boundary.end(), poly.begin(), poly.end());
        if (boundary.empty()) {
            std::cerr << "medium: keyframe " << kf.frameId
                      << " has an empty silhouette, skipping its rays\n";
            ++skippedFrames_;
        } else {
            for (int v : visibleContourVertices(posed.mesh, kf.camera)) {
                double depth = 0;
                const Vec2 px = kf.camera.project(posed.mesh.vertices[v], &depth);
                if (depth <= 0)
                    continue;
                double best = config_.matchThresholdPx;
                const Vec2* hit = nullptr;
                for (const Vec2& b : boundary) {
                    const double d = (b - px).norm();
                    if (d < best) {
                        best = d;
                        hit = &b;
                    }
                }
                if (!hit)
                    continue;
                const core::PluckerRay ray = core::unposeRay(
                    kf.camera.pixelRay(*hit), posed.blendTransforms[v]);
                std::vector<int> blocks;
                if (betaBlock_ >= 0)
                    blocks.push_back(betaBlock_);
                blocks.push_back(dBlocks_[v]);
                problem_.addResidualBlock(
                    std::make_unique<RayFitResidual>(
                        std::move(blocks), betaBlock_ >= 0, base[v],
                        std::vector<double>{1.0}, betaSlice(v), ray),
                    "silh", config_.silhouetteWeight, config_.robustSigma);
                ++silhouetteResiduals_;
            }
        }

        for (const Landmark& lm : kf.landmarks) {
            if (lm.confidence <= 0.0)
                continue;
            const auto it = mapping_.anchors.find(lm.id);
            if (it == mapping_.anchors.end())
                continue;
            const core::SurfaceAnchor& anchor = it->second;
            const Mat4 T = anchorBlendTransform(posed, anchor);
            const core::PluckerRay ray =
                core::unposeRay(kf.camera.pixelRay(lm.point), T);

            const auto& tri = rig_.faces[anchor.face];
            Vec3 anchorBase = Vec3::Zero();
            MatX anchorBeta =
                shapeDim > 0 ? MatX(MatX::Zero(3, shapeDim)) : MatX();
            std::vector<int> blocks;
            if (betaBlock_ >= 0)
                blocks.push_back(betaBlock_);
            std::vector<double> weights;
            for (int c = 0; c < 3; ++c) {
                anchorBase += anchor.barycentric[c] * base[tri[c]];
                if (shapeDim > 0)
                    anchorBeta += anchor.barycentric[c] * betaSlice(tri[c]);
                blocks.push_back(dBlocks_[tri[c]]);
                weights.push_back(anchor.barycentric[c]);
            }
            problem_.addResidualBlock(
                std::make_unique<RayFitResidual>(
                    std::move(blocks), betaBlock_ >= 0, anchorBase,
                    std::move(weights), std::move(anchorBeta), ray),
                "face", config_.faceWeight * lm.confidence,
                config_.robustSigma);
            ++faceResiduals_;
        }
    }
}

MediumResult solveMedium(const body::RiggedTemplate& rig,
                         const std::vector<Keyframe>& keyframes,
                         const LandmarkMapping& mapping,
                         const MediumConfig& config) {
    if (static_cast<int>(keyframes.size()) < config.minKeyframes)
        throw Error("solveMedium: need at least " +
                    std::to_string(config.minKeyframes) + " keyframes, got " +
                    std::to_string(keyframes.size()));
    for (const Keyframe& kf : keyframes)
        kf.validate();
    if (config.enforceCoverage) {
        const double cov = rotationCoverageDegrees(rig, keyframes);
        if (cov < config.minCoverageDeg)
            throw Error("solveMedium: keyframes cover only " +
                        std::to_string(cov) + " degrees of rotation, need " +
                        std::to_string(config.minCoverageDeg));
    }

    MediumProblem mp(rig, mapping, config);
    solve::AlternationOptions opts;
    opts.solver = config.solver;

    if (config.warmupRounds > 0) {
        constexpr double kPinScale = 1e8;
        opts.rounds = config.warmupRounds;
        mp.problem().scaleTermWeight("ridge", kPinScale);
        solve::alternate(mp.problem(),
                         [&](solve::Problem&, int) { mp.associate(keyframes); },
                         opts);
        mp.problem().scaleTermWeight("ridge", 1.0 / kPinScale);
    }

    opts.rounds = config.rounds;
    MediumResult result;
    result.report = solve::alternate(
        mp.problem(),
        [&](solve::Problem&, int) { mp.associate(keyframes); }, opts);
    result.shape = mp.currentShape();
    result.displacements = mp.currentDisplacements();
    result.silhouetteResiduals = mp.silhouetteResiduals();
    result.faceResiduals = mp.faceResiduals();
    result.skippedFrames = mp.skippedFrames();
    return result;
}

}  // namespace avatar::medium
