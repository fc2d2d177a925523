#include "avatar/fine/fine.h"

#include "avatar/core/laplacian.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

namespace avatar::fine {

bool insideSilhouette(const Vec2& p,
                      const std::vector<std::vector<Vec2>>& polygons) {
    // Even-odd crossing count over all polygon edges.
    bool inside = false;
    for (const auto& poly : polygons) {
        const size_t n = poly.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = poly[j];
            const Vec2& b = poly[i];
            if ((b.y() > p.y()) == (a.y() > p.y()))
                continue;
            const double x =
                b.x() + (p.y() - b.y()) / (a.y() - b.y()) * (a.x() - b.x());
            if (p.x() < x)
                inside = !inside;
        }
    }
    return inside;
}

double matchScore(const Vec3& posedK, const Vec3& posedJ, double cosK,
                  double cosJ, const core::PluckerRay& rayK,
                  const core::PluckerRay& rayJ) {
    cosK = std::max(cosK, 1e-9);
    cosJ = std::max(cosJ, 1e-9);
    return (cosK * core::pointToRayDistance(posedK, rayK) +
            cosJ * core::pointToRayDistance(posedJ, rayJ)) /
           (cosK + cosJ);
}

CorrespondenceSet buildMatches(const body::SubdividedModel& model,
                               const body::ShapeParams& shape,
                               const body::DisplacementField& displacements,
                               const VecX& normalOffsets,
                               const medium::Keyframe& frameK,
                               const medium::Keyframe& frameJ,
                               const image::Image& flow,
                               const FineConfig& config) {
    if (flow.channels != 2 || flow.width != frameK.camera.width ||
        flow.height != frameK.camera.height)
        throw InputFormatError("buildMatches: flow field does not match frame");

    const double alphaMax = config.alphaMaxDeg * M_PI / 180.0;
    const auto poseFrame = [&](const medium::Keyframe& kf) {
        return body::poseVertices(
            model.fine, shape, kf.pose,
            model.unposedVertices(shape, kf.pose, displacements, normalOffsets));
    };
    const body::PosedModel posedK = poseFrame(frameK);
    const body::PosedModel posedJ = poseFrame(frameJ);

    const render::DepthMap depthK = render::renderDepth(posedK.mesh, frameK.camera);
    const render::DepthMap depthJ = render::renderDepth(posedJ.mesh, frameJ.camera);
    const render::VertexVisibility visK = render::vertexVisibility(
        posedK.mesh, frameK.camera, depthK, alphaMax, config.depthTolerance);
    const render::VertexVisibility visJ = render::vertexVisibility(
        posedJ.mesh, frameJ.camera, depthJ, alphaMax, config.depthTolerance);

    std::vector<int> candidates;
    for (int v = 0; v < model.fineVertexCount(); ++v)
        if (visK.visible[v] && visJ.visible[v])
            candidates.push_back(v);

    CorrespondenceSet out;
    const double spacing = config.matchGridSpacingPx;
    for (double y = 0.5 * spacing; y < frameK.camera.height; y += spacing)
        for (double x = 0.5 * spacing; x < frameK.camera.width; x += spacing) {
            const Vec2 p(x, y);
            if (!insideSilhouette(p, frameK.silhouette))
                continue;
            const Vec2 q =
                p + Vec2(flow.bilinear(x, y, 0), flow.bilinear(x, y, 1));
            if (q.x() < 0 || q.x() > frameJ.camera.width - 1.0 || q.y() < 0 ||
                q.y() > frameJ.camera.height - 1.0)
                continue;

            const core::PluckerRay rayK = frameK.camera.pixelRay(p);
            const core::PluckerRay rayJ = frameJ.camera.pixelRay(q);
            int best = -1;
            double bestScore = config.matchScoreThreshold;
            for (int v : candidates) {
                const double s = matchScore(
                    posedK.mesh.vertices[v], posedJ.mesh.vertices[v],
                    std::cos(visK.angle[v]), std::cos(visJ.angle[v]), rayK, rayJ);
                if (s < bestScore) {
                    bestScore = s;
                    best = v;
                }
            }
            if (best < 0)
                continue;
            Correspondence c;
            c.vertex = best;
            c.rayK = core::unposeRay(rayK, posedK.blendTransforms[best]);
            c.rayJ = core::unposeRay(rayJ, posedJ.blendTransforms[best]);
            c.cell = p;
            c.score = bestScore;
            out.matches.push_back(c);
        }
    return out;
}

namespace {

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m <<      0, -v.z(),  v.y(),
          v.z(),      0, -v.x(),
         -v.y(),  v.x(),      0;
    return m;
}

// A 3-vector affine in a set of parameter blocks.
struct AffineExpr {
    Vec3 base = Vec3::Zero();
    std::vector<int> blocks;
    std::vector<MatX> coefs;  // 3 x blockDim each

    void add(int block, const MatX& coef) {
        for (size_t i = 0; i < blocks.size(); ++i)
            if (blocks[i] == block) {
                coefs[i] += coef;
                return;
            }
        blocks.push_back(block);
        coefs.push_back(coef);
    }

    void subtract(const AffineExpr& other) {
        base -= other.base;
        for (size_t i = 0; i < other.blocks.size(); ++i)
            add(other.blocks[i], -other.coefs[i]);
    }

    void accumulate(const AffineExpr& other, double w) {
        base += w * other.base;
        for (size_t i = 0; i < other.blocks.size(); ++i)
            add(other.blocks[i], w * other.coefs[i]);
    }

    Vec3 eval(const std::vector<const VecX*>& params, int offset = 0) const {
        Vec3 u = base;
        for (size_t i = 0; i < blocks.size(); ++i)
            u += coefs[i] * (*params[offset + i]);
        return u;
    }
};

// r = u x n - m for an affine surface point and a frozen ray.
class AffineRayResidual : public solve::ResidualBlockBase {
public:
    AffineRayResidual(AffineExpr expr, core::PluckerRay ray)
        : ResidualBlockBase(expr.blocks), expr_(std::move(expr)), ray_(ray) {}

    int residualSize() const override { return 3; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        residual = core::pointToRayResidual(expr_.eval(params), ray_);
        if (jacobians) {
            const Mat3 J = core::pointToRayJacobian(ray_);
            for (size_t i = 0; i < expr_.coefs.size(); ++i)
                (*jacobians)[i] = J * expr_.coefs[i];
        }
    }

private:
    AffineExpr expr_;
    core::PluckerRay ray_;
};

// r = u - target; covers Laplacian-coordinate and consensus terms.
class AffineDiffResidual : public solve::ResidualBlockBase {
public:
    AffineDiffResidual(AffineExpr expr, Vec3 target)
        : ResidualBlockBase(expr.blocks), expr_(std::move(expr)),
          target_(std::move(target)) {}

    int residualSize() const override { return 3; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        residual = expr_.eval(params) - target_;
        if (jacobians)
            for (size_t i = 0; i < expr_.coefs.size(); ++i)
                (*jacobians)[i] = expr_.coefs[i];
    }

private:
    AffineExpr expr_;
    Vec3 target_;
};

// r = |edge| - restLength for an affine edge vector.
class EdgeLengthResidual : public solve::ResidualBlockBase {
public:
    EdgeLengthResidual(AffineExpr edge, double restLength)
        : ResidualBlockBase(edge.blocks), edge_(std::move(edge)),
          restLength_(restLength) {}

    int residualSize() const override { return 1; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        const Vec3 e = edge_.eval(params);
        const double len = std::max(e.norm(), 1e-12);
        residual[0] = len - restLength_;
        if (jacobians) {
            const Eigen::RowVector3d dir = (e / len).transpose();
            for (size_t i = 0; i < edge_.coefs.size(); ++i)
                (*jacobians)[i] = dir * edge_.coefs[i];
        }
    }

private:
    AffineExpr edge_;
    double restLength_;
};

// r = n(ring) - target, where n is the normalized area-weighted normal of
// the faces around one vertex and every ring vertex is affine in (D, S).
class VertexNormalResidual : public solve::ResidualBlockBase {
public:
    VertexNormalResidual(std::vector<AffineExpr> ring,
                         std::vector<std::array<int, 3>> ringFaces,
                         Vec3 target, std::vector<int> unionBlocks,
                         std::vector<std::vector<int>> slots)
        : ResidualBlockBase(std::move(unionBlocks)), ring_(std::move(ring)),
          faces_(std::move(ringFaces)), target_(std::move(target)),
          slots_(std::move(slots)) {}

    int residualSize() const override { return 3; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        std::vector<Vec3> u(ring_.size());
        for (size_t k = 0; k < ring_.size(); ++k) {
            u[k] = ring_[k].base;
            for (size_t e = 0; e < ring_[k].blocks.size(); ++e)
                u[k] += ring_[k].coefs[e] * (*params[slots_[k][e]]);
        }
        Vec3 raw = Vec3::Zero();
        for (const auto& f : faces_)
            raw += (u[f[1]] - u[f[0]]).cross(u[f[2]] - u[f[0]]);
        const double len = std::max(raw.norm(), 1e-12);
        const Vec3 n = raw / len;
        residual = n - target_;
        if (!jacobians)
            return;

        for (auto& J : *jacobians)
            J.setZero();
        std::vector<Mat3> dRaw(ring_.size(), Mat3::Zero());
        for (const auto& f : faces_) {
            dRaw[f[0]] += skew(u[f[2]] - u[f[1]]);
            dRaw[f[1]] -= skew(u[f[2]] - u[f[0]]);
            dRaw[f[2]] += skew(u[f[1]] - u[f[0]]);
        }
        const Mat3 proj = (Mat3::Identity() - n * n.transpose()) / len;
        for (size_t k = 0; k < ring_.size(); ++k) {
            const Mat3 dn = proj * dRaw[k];
            for (size_t e = 0; e < ring_[k].blocks.size(); ++e)
                (*jacobians)[slots_[k][e]] += dn * ring_[k].coefs[e];
        }
    }

private:
    std::vector<AffineExpr> ring_;
    std::vector<std::array<int, 3>> faces_;  // local indices into ring_
    Vec3 target_;
    std::vector<std::vector<int>> slots_;  // expr entry -> union block slot
};

std::unique_ptr<VertexNormalResidual> makeNormalResidual(
    std::vector<AffineExpr> ring, std::vector<std::array<int, 3>> ringFaces,
    Vec3 target) {
    std::vector<int> unionBlocks;
    std::vector<std::vector<int>> slots(ring.size());
    for (size_t k = 0; k < ring.size(); ++k)
        for (int b : ring[k].blocks) {
            const auto it = std::find(unionBlocks.begin(), unionBlocks.end(), b);
            if (it == unionBlocks.end()) {
                slots[k].push_back(static_cast<int>(unionBlocks.size()));
                unionBlocks.push_back(b);
            } else {
                slots[k].push_back(
                    static_cast<int>(it - unionBlocks.begin()));
            }
        }
    return std::make_unique<VertexNormalResidual>(
        std::move(ring), std::move(ringFaces), std::move(target),
        std::move(unionBlocks), std::move(slots));
}

}  // namespace

FineProblem::FineProblem(const body::SubdividedModel& model,
                         const body::ShapeParams& shape,
                         const body::DisplacementField& initialDisplacements,
                         const VecX& initialNormalOffsets,
                         const FineConfig& config)
    : model_(model), shape_(shape), config_(config) {
    const int coarseN = model.coarseVertexCount;
    if (static_cast<int>(initialDisplacements.size()) != coarseN)
        throw Error("FineProblem: displacement count mismatch");
    if (initialNormalOffsets.size() != model.offsetCount())
        throw Error("FineProblem: normal offset count mismatch");

    dBlocks_.resize(coarseN);
    for (int i = 0; i < coarseN; ++i)
        dBlocks_[i] = problem_.addParameterBlock("d" + std::to_string(i),
                                                 initialDisplacements[i]);
    sBlocks_.resize(model.offsetCount());
    for (int e = 0; e < model.offsetCount(); ++e)
        sBlocks_[e] = problem_.addParameterBlock(
            "s" + std::to_string(e),
            VecX::Constant(1, initialNormalOffsets[e]));

    tposeBase_ = model.unposedVertices(
        shape, body::PoseParams::rest(model.fine.jointCount()), {},
        VecX::Zero(model.offsetCount()));
}

namespace {

AffineExpr vertexExpr(const body::SubdividedModel& model,
                      const std::vector<Vec3>& tposeBase,
                      const std::vector<int>& dBlocks,
                      const std::vector<int>& sBlocks, int v,
                      const Vec3& extraBase = Vec3::Zero()) {
    AffineExpr expr;
    expr.base = tposeBase[v] + extraBase;
    for (const auto& [i, w] : model.coarseSupport[v])
        expr.add(dBlocks[i], w * Mat3::Identity());
    for (const auto& [e, c] : model.offsetSupport[v])
        expr.add(sBlocks[e], MatX(c));
    return expr;
}

// Per-vertex pose-corrective offsets for one frame's pose.
std::vector<Vec3> poseCorrectives(const body::RiggedTemplate& fine,
                                  const body::PoseParams& pose) {
    std::vector<Vec3> out(fine.vertexCount(), Vec3::Zero());
    if (fine.poseBasis.size() == 0)
        return out;
    const VecX offsets = fine.poseBasis * body::poseFeature(fine, pose);
    for (int i = 0; i < fine.vertexCount(); ++i)
        out[i] = offsets.segment<3>(3 * i);
    return out;
}

}  // namespace

body::DisplacementField FineProblem::currentDisplacements() const {
    body::DisplacementField d(dBlocks_.size());
    for (size_t i = 0; i < dBlocks_.size(); ++i)
        d[i] = Vec3(problem_.parameterBlock(dBlocks_[i]).values);
    return d;
}

VecX FineProblem::currentNormalOffsets() const {
    VecX s(sBlocks_.size());
    for (size_t e = 0; e < sBlocks_.size(); ++e)
        s[e] = problem_.parameterBlock(sBlocks_[e]).values[0];
    return s;
}

std::vector<Vec3> FineProblem::currentSurface() const {
    return model_.unposedVertices(
        shape_, body::PoseParams::rest(model_.fine.jointCount()),
        currentDisplacements(), currentNormalOffsets());
}

void FineProblem::addRegularizers(const std::vector<Vec3>& consensus) {
    const int n = model_.fineVertexCount();
    if (static_cast<int>(consensus.size()) != n)
        throw Error("FineProblem: consensus size mismatch");

    core::TriMesh consMesh;
    consMesh.vertices = consensus;
    consMesh.faces = model_.fine.faces;

    const auto expr = [&](int v) {
        return vertexExpr(model_, tposeBase_, dBlocks_, sBlocks_, v);
    };

    // Anisotropic cotangent weights: attenuated across high-dihedral edges
    // of the consensus surface so creases are not smoothed away.
    const core::CotanLaplacian lap = core::cotanLaplacian(consMesh);
    const std::vector<Vec3> faceN = core::faceNormals(consMesh);
    std::map<std::pair<int, int>, double> attenuation;
    const double tau = config_.dihedralTauDeg * M_PI / 180.0;
    for (const core::MeshEdge& e : core::collectEdges(consMesh)) {
        double dihedral = 0.0;
        if (e.faceLeft >= 0 && e.faceRight >= 0) {
            const double c = std::clamp(
                faceN[e.faceLeft].dot(faceN[e.faceRight]), -1.0, 1.0);
            dihedral = std::acos(c);
        }
        attenuation[{e.a, e.b}] = std::exp(-dihedral / tau);
    }
    const auto atten = [&](int a, int b) {
        return attenuation.at(std::minmax(a, b));
    };

    for (int i = 0; i < n; ++i) {
        AffineExpr row;
        Vec3 target = Vec3::Zero();
        for (SparseMat::InnerIterator it(lap.matrix, i); it; ++it) {
            const int j = static_cast<int>(it.row());
            if (j == i)
                continue;
            const double w = -it.value() * atten(i, j);
            if (w == 0.0)
                continue;
            AffineExpr diff = expr(i);
            diff.subtract(expr(j));
            row.accumulate(diff, w);
            target += w * (consensus[i] - consensus[j]);
        }
        problem_.addResidualBlock(
            std::make_unique<AffineDiffResidual>(std::move(row), target), "lap",
            config_.lapWeight);
    }

    for (const core::MeshEdge& e : core::collectEdges(consMesh)) {
        AffineExpr edge = expr(e.a);
        edge.subtract(expr(e.b));
        problem_.addResidualBlock(
            std::make_unique<EdgeLengthResidual>(
                std::move(edge), (consensus[e.a] - consensus[e.b]).norm()),
            "struc", config_.strucWeight);
    }

    for (int i = 0; i < n; ++i)
        problem_.addResidualBlock(
            std::make_unique<AffineDiffResidual>(expr(i), consensus[i]), "cons",
            config_.consWeight, config_.matchRobustSigma);
}

void FineProblem::addSfsTerm(const std::vector<WindowNormals>& window) {
    const int n = model_.fineVertexCount();
    core::TriMesh fineMesh = model_.fine.restMesh();
    const auto incident = core::vertexFaces(fineMesh);

    for (const WindowNormals& frame : window) {
        if (static_cast<int>(frame.normals.size()) != n ||
            static_cast<int>(frame.mask.size()) != n)
            throw Error("FineProblem: window normal field size mismatch");
        for (int i = 0; i < n; ++i) {
            if (!frame.mask[i])
                continue;
            std::vector<int> local;  // ring vertex ids
            std::vector<std::array<int, 3>> ringFaces;
            const auto localIndex = [&](int v) {
                for (size_t k = 0; k < local.size(); ++k)
                    if (local[k] == v)
                        return static_cast<int>(k);
                local.push_back(v);
                return static_cast<int>(local.size() - 1);
            };
            for (int f : incident[i]) {
                const auto& tri = model_.fine.faces[f];
                ringFaces.push_back({localIndex(tri[0]), localIndex(tri[1]),
                                     localIndex(tri[2])});
            }
            std::vector<AffineExpr> ring;
            for (int v : local)
                ring.push_back(
                    vertexExpr(model_, tposeBase_, dBlocks_, sBlocks_, v));
            problem_.addResidualBlock(
                makeNormalResidual(std::move(ring), std::move(ringFaces),
                                   frame.normals[i]),
                "sfs", config_.sfsWeight);
        }
    }
}

void FineProblem::addMatchTerm(const CorrespondenceSet& matches,
                               const body::PoseParams& poseK,
                               const body::PoseParams& poseJ) {
    const std::vector<Vec3> corrK = poseCorrectives(model_.fine, poseK);
    const std::vector<Vec3> corrJ = poseCorrectives(model_.fine, poseJ);
    for (const Correspondence& c : matches.matches) {
        problem_.addResidualBlock(
            std::make_unique<AffineRayResidual>(
                vertexExpr(model_, tposeBase_, dBlocks_, sBlocks_, c.vertex,
                           corrK[c.vertex]),
                c.rayK),
            "match", config_.matchWeight, config_.matchRobustSigma);
        problem_.addResidualBlock(
            std::make_unique<AffineRayResidual>(
                vertexExpr(model_, tposeBase_, dBlocks_, sBlocks_, c.vertex,
                           corrJ[c.vertex]),
                c.rayJ),
            "match", config_.matchWeight, config_.matchRobustSigma);
    }
}

void FineProblem::associateData(const std::vector<FineFrameInput>& frames,
                                const medium::LandmarkMapping& mapping,
                                const std::vector<std::array<int, 3>>& coarseFaces) {
    problem_.clearTerm("silh");
    problem_.clearTerm("face");
    silhouetteResiduals_ = 0;

    const body::DisplacementField displacements = currentDisplacements();
    const VecX normalOffsets = currentNormalOffsets();

    for (const FineFrameInput& frame : frames) {
        if (frame.lambda <= 0.0)
            continue;
        const medium::Keyframe& kf = *frame.keyframe;
        const body::PosedModel posed = body::poseVertices(
            model_.fine, shape_, kf.pose,
            model_.unposedVertices(shape_, kf.pose, displacements,
                                   normalOffsets));
        const std::vector<Vec3> corr = poseCorrectives(model_.fine, kf.pose);

        std::vector<Vec2> boundary;
        for (const auto& poly : kf.silhouette)
            boundary.insert(boundary.end(), poly.begin(), poly.end());
        if (!boundary.empty()) {
            // Silhouette matches are limited to coarse-level vertices.
            for (int v : medium::visibleContourVertices(posed.mesh, kf.camera)) {
                if (v >= model_.coarseVertexCount)
                    continue;
                double depth = 0;
                const Vec2 px = kf.camera.project(posed.mesh.vertices[v], &depth);
                if (depth <= 0)
                    continue;
                double best = config_.silhMatchThresholdPx;
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
                problem_.addResidualBlock(
                    std::make_unique<AffineRayResidual>(
                        vertexExpr(model_, tposeBase_, dBlocks_, sBlocks_, v,
                                   corr[v]),
                        ray),
                    "silh", config_.silhouetteWeight * frame.lambda,
                    config_.rayRobustSigma);
                ++silhouetteResiduals_;
            }
        }

        for (const medium::Landmark& lm : kf.landmarks) {
            if (lm.confidence <= 0.0)
                continue;
            const auto it = mapping.anchors.find(lm.id);
            if (it == mapping.anchors.end())
                continue;
            const core::SurfaceAnchor& anchor = it->second;
            const auto& tri = coarseFaces[anchor.face];
            Mat4 T = Mat4::Zero();
            AffineExpr expr;
            for (int c = 0; c < 3; ++c) {
                T += anchor.barycentric[c] * posed.blendTransforms[tri[c]];
                expr.accumulate(vertexExpr(model_, tposeBase_, dBlocks_,
                                           sBlocks_, tri[c], corr[tri[c]]),
                                anchor.barycentric[c]);
            }
            const core::PluckerRay ray =
                core::unposeRay(kf.camera.pixelRay(lm.point), T);
            problem_.addResidualBlock(
                std::make_unique<AffineRayResidual>(std::move(expr), ray),
                "face", config_.faceWeight * frame.lambda * lm.confidence,
                config_.rayRobustSigma);
        }
    }
}

FineStepResult solveFineStep(const body::SubdividedModel& model,
                             const body::ShapeParams& shape,
                             const std::vector<FineFrameInput>& frames,
                             const std::vector<WindowNormals>& window,
                             const std::vector<CorrespondenceSet>& matches,
                             const std::vector<Vec3>& consensus,
                             const body::DisplacementField& initialDisplacements,
                             const VecX& initialNormalOffsets,
                             const medium::LandmarkMapping& mapping,
                             const std::vector<std::array<int, 3>>& coarseFaces,
                             const FineConfig& config) {
    if (frames.empty())
        throw Error("solveFineStep: no control frames");
    if (matches.size() + 1 > frames.size())
        throw Error("solveFineStep: more match sets than neighbor frames");

    FineStepResult result;
    result.displacements = initialDisplacements;
    result.normalOffsets = initialNormalOffsets;
    try {
        FineProblem fp(model, shape, initialDisplacements, initialNormalOffsets,
                       config);
        fp.addRegularizers(consensus);
        fp.addSfsTerm(window);
        for (size_t i = 0; i < matches.size(); ++i)
            fp.addMatchTerm(matches[i], frames[0].keyframe->pose,
                            frames[i + 1].keyframe->pose);

        solve::AlternationOptions opts;
        opts.rounds = config.rounds;
        opts.solver = config.solver;
        result.report = solve::alternate(
            fp.problem(),
            [&](solve::Problem&, int) {
                fp.associateData(frames, mapping, coarseFaces);
            },
            opts);
        if (!result.report.success) {
            result.skipped = true;
            return result;
        }
        result.displacements = fp.currentDisplacements();
        result.normalOffsets = fp.currentNormalOffsets();
    } catch (const Error& e) {
        std::cerr << "solveFineStep: keyframe skipped: " << e.what() << "\n";
        result.skipped = true;
    }
    return result;
}

void updateConsensus(std::vector<Vec3>& consensus,
                     const std::vector<Vec3>& current, double ema) {
    if (consensus.size() != current.size())
        throw Error("updateConsensus: size mismatch");
    for (size_t i = 0; i < consensus.size(); ++i)
        consensus[i] = ema * consensus[i] + (1.0 - ema) * current[i];
}

}  // namespace avatar::fine
