#pragma once

#include "avatar/body/subdivision.h"
#include "avatar/image/image.h"
#include "avatar/medium/medium.h"
#include "avatar/render/raster.h"
#include "avatar/solve/dogleg.h"

#include <vector>

namespace avatar::fine {

struct FineConfig {
    double lambdaNeighbor = 0.3;  // data-term weight on non-central frames
    double silhouetteWeight = 1.0;
    double faceWeight = 0.5;
    double sfsWeight = 1.0;
    double matchWeight = 0.5;
    double lapWeight = 2.0;
    double strucWeight = 1.0;
    double consWeight = 0.5;

    double silhMatchThresholdPx = 20.0;
    double rayRobustSigma = 0.05;    // silhouette / face, meters
    double matchRobustSigma = 0.02;  // match / consensus, meters

    double matchGridSpacingPx = 16.0;
    double matchScoreThreshold = 0.02;  // meters, correspondence score gate
    double alphaMaxDeg = 80.0;
    double depthTolerance = 0.005;  // visibility z test, meters

    double dihedralTauDeg = 30.0;  // Laplacian attenuation across creases
    double consensusEma = 0.7;
    int rounds = 2;  // silhouette re-association rounds per keyframe
    solve::SolverOptions solver;
};

// One grid correspondence between two neighboring keyframes, matched to a
// fine-model vertex. Rays are stored in each frame's unposed space.
struct Correspondence {
    int vertex = -1;
    core::PluckerRay rayK, rayJ;
    Vec2 cell = Vec2::Zero();  // source grid pixel in frame k
    double score = 0.0;        // two-ray weighted distance at selection time
};

struct CorrespondenceSet {
    std::vector<Correspondence> matches;
};

// Even-odd test against a set of closed polygons.
bool insideSilhouette(const Vec2& p,
                      const std::vector<std::vector<Vec2>>& polygons);

// Correspondence score of one vertex against the two correspondence rays, posed
// space, cos-weighted by viewing angles.
double matchScore(const Vec3& posedK, const Vec3& posedJ, double cosK,
                  double cosJ, const core::PluckerRay& rayK,
                  const core::PluckerRay& rayJ);

// Grid correspondences between keyframe k and neighbor j from a dense flow
// field k -> j; every cell inside the silhouette of k picks the visible
// vertex minimizing the two-ray score, gated by matchScoreThreshold.
CorrespondenceSet buildMatches(const body::SubdividedModel& model,
                               const body::ShapeParams& shape,
                               const body::DisplacementField& displacements,
                               const VecX& normalOffsets,
                               const medium::Keyframe& frameK,
                               const medium::Keyframe& frameJ,
                               const image::Image& flow,
                               const FineConfig& config);

// Per-frame auxiliary normals already rotated into T-pose space.
struct WindowNormals {
    std::vector<Vec3> normals;
    std::vector<char> mask;
};

struct FineFrameInput {
    const medium::Keyframe* keyframe = nullptr;
    double lambda = 1.0;
};

// Optimization state over (D, S) of the subdivided model in T-pose space.
// Regularizers reference a consensus surface: the Laplacian term penalizes
// deviation from the consensus' (anisotropically weighted) Laplacian
// coordinates, the structural term deviation from the consensus edge
// lengths and the consensus term deviation from its positions.
class FineProblem {
public:
    FineProblem(const body::SubdividedModel& model,
                const body::ShapeParams& shape,
                const body::DisplacementField& initialDisplacements,
                const VecX& initialNormalOffsets, const FineConfig& config);

    solve::Problem& problem() { return problem_; }

    body::DisplacementField currentDisplacements() const;
    VecX currentNormalOffsets() const;
    // Unposed fine surface at the current parameters (T-pose, no
    // pose-corrective offsets).
    std::vector<Vec3> currentSurface() const;

    // Fixed terms; call once each before solving.
    void addRegularizers(const std::vector<Vec3>& consensus);
    void addSfsTerm(const std::vector<WindowNormals>& window);
    void addMatchTerm(const CorrespondenceSet& matches,
                      const body::PoseParams& poseK,
                      const body::PoseParams& poseJ);

    // Re-associable data terms ("silh", "face"); coarse-vertex contours
    // only. coarseFaces are the faces of the un-subdivided template (the
    // landmark anchors reference them).
    void associateData(const std::vector<FineFrameInput>& frames,
                       const medium::LandmarkMapping& mapping,
                       const std::vector<std::array<int, 3>>& coarseFaces);

    int silhouetteResiduals() const { return silhouetteResiduals_; }

private:
    const body::SubdividedModel& model_;
    body::ShapeParams shape_;
    FineConfig config_;
    solve::Problem problem_;
    std::vector<int> dBlocks_;  // per coarse vertex
    std::vector<int> sBlocks_;  // per inserted vertex
    std::vector<Vec3> tposeBase_;  // fine unposed at beta, D=0, S=0, theta=0
    int silhouetteResiduals_ = 0;
};

struct FineStepResult {
    body::DisplacementField displacements;
    VecX normalOffsets;
    solve::SolveReport report;
    bool skipped = false;
};

// One incremental keyframe step of the fine stage, solved over the control
// frames (frames[0] is the central keyframe k).
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
                             const FineConfig& config);

// consensus <- ema * consensus + (1 - ema) * current.
void updateConsensus(std::vector<Vec3>& consensus,
                     const std::vector<Vec3>& current, double ema);

}  // namespace avatar::fine
