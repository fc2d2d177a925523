#pragma once

#include "avatar/body/rig.h"
#include "avatar/render/camera.h"
#include "avatar/solve/dogleg.h"

#include <map>
#include <vector>

namespace avatar::medium {

struct Landmark {
    int id = -1;
    Vec2 point = Vec2::Zero();
    double confidence = 0.0;  // in [0, 1]
};

// One calibrated frame selected for shape estimation. The silhouette is a
// set of closed boundary polygons in pixel coordinates (origin top-left);
// the body pose is ingested, not estimated here.
struct Keyframe {
    int frameId = -1;
    render::PinholeCamera camera;
    body::PoseParams pose;
    std::vector<std::vector<Vec2>> silhouette;
    std::vector<Landmark> landmarks;

    void validate() const;
};

// Static landmark-id -> template-surface mapping.
struct LandmarkMapping {
    std::map<int, core::SurfaceAnchor> anchors;
};

struct MediumConfig {
    double matchThresholdPx = 20.0;  // silhouette nearest-neighbor gate
    double silhouetteWeight = 1.0;
    double faceWeight = 1.0;
    double lapWeight = 1.0;    // |L(T + D) - L T|^2
    double ridgeWeight = 0.1;  // |D|^2
    double symWeight = 0.05;   // left-right symmetry of D
    double robustSigma = 0.05; // Geman-McClure scale for ray terms, meters
    int rounds = 6;
    // Shape-only association rounds before the full alternation: the ridge
    // term is scaled up so the displacements stay pinned while beta
    // registers. Guards against tangential contour drift from a cold start.
    int warmupRounds = 0;
    int minKeyframes = 8;
    double minCoverageDeg = 270.0;
    bool enforceCoverage = true;
    int symmetryAxis = 0;  // mirror plane normal (0 = x)
    solve::SolverOptions solver;
};

struct MediumResult {
    body::ShapeParams shape;
    body::DisplacementField displacements;
    solve::SolveReport report;
    int silhouetteResiduals = 0;
    int faceResiduals = 0;
    int skippedFrames = 0;
};

// Vertices on the occluding contour: incident faces disagree on the sign of
// (face normal . view direction).
std::vector<int> contourVertices(const core::TriMesh& posed,
                                 const render::PinholeCamera& cam);

// Contour vertices that also pass a z-buffer occlusion test: a vertex is
// dropped when other geometry is clearly in front of it, so far-side
// contours never match the image silhouette.
std::vector<int> visibleContourVertices(const core::TriMesh& posed,
                                        const render::PinholeCamera& cam);

// Blend transform of a surface anchor: barycentric mix of the corner
// vertices' blend transforms (equivalently, skinning with interpolated
// weights).
Mat4 anchorBlendTransform(const body::PosedModel& posed,
                          const core::SurfaceAnchor& anchor);

// Anchor position after skinning with the blended transform.
Vec3 posedAnchorPoint(const body::PosedModel& posed,
                      const core::SurfaceAnchor& anchor);

// Smallest circular arc of camera azimuths around the posed subject.
double rotationCoverageDegrees(const body::RiggedTemplate& rig,
                               const std::vector<Keyframe>& keyframes);

// Optimization state for the medium stage: beta plus one 3-vector
// displacement block per coarse vertex, with fixed regularizer terms and
// re-associable data terms ("silh", "face").
class MediumProblem {
public:
    MediumProblem(const body::RiggedTemplate& rig, const LandmarkMapping& mapping,
                  const MediumConfig& config);

    solve::Problem& problem() { return problem_; }

    body::ShapeParams currentShape() const;
    body::DisplacementField currentDisplacements() const;

    // Drops and rebuilds the silhouette and face terms: poses the model at
    // the current parameters, matches contour vertices to silhouette rays
    // (nearest neighbor, gated), and freezes each matched ray in unposed
    // space so the residuals are exactly affine in (beta, D).
    void associate(const std::vector<Keyframe>& keyframes);

    int silhouetteResiduals() const { return silhouetteResiduals_; }
    int faceResiduals() const { return faceResiduals_; }
    int skippedFrames() const { return skippedFrames_; }

private:
    const body::RiggedTemplate& rig_;
    LandmarkMapping mapping_;
    MediumConfig config_;
    solve::Problem problem_;
    int betaBlock_ = -1;
    std::vector<int> dBlocks_;
    int silhouetteResiduals_ = 0;
    int faceResiduals_ = 0;
    int skippedFrames_ = 0;
};

// Full medium-stage solve: alternates association and dogleg minimization.
MediumResult solveMedium(const body::RiggedTemplate& rig,
                         const std::vector<Keyframe>& keyframes,
                         const LandmarkMapping& mapping,
                         const MediumConfig& config = {});

}  // namespace avatar::medium
