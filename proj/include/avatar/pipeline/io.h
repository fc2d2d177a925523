#pragma once

#include "avatar/body/capsule_rig.h"
#include "avatar/core/sh.h"
#include "avatar/medium/medium.h"
#include "avatar/render/camera.h"

#include <string>
#include <utility>
#include <vector>

namespace avatar::pipeline {

// Rigged template plus the per-part annotations the pipeline needs.
struct RigBundle {
    body::RiggedTemplate rig;
    std::vector<int> faceLabels;                    // semantic part per face
    std::vector<core::SurfaceAnchor> faceLandmarks; // landmark id = index
    std::vector<int> mirrorVertex;
};

void saveRig(const std::string& path, const RigBundle& bundle);
RigBundle loadRig(const std::string& path);

// Per-frame body pose and camera extrinsics.
struct FramePose {
    body::PoseParams pose;
    Mat4 worldToCamera = Mat4::Identity();
};

void savePose(const std::string& path, const FramePose& fp);
FramePose loadPose(const std::string& path, int jointCount);

void saveLandmarks(const std::string& path,
                   const std::vector<medium::Landmark>& landmarks);
std::vector<medium::Landmark> loadLandmarks(const std::string& path);

void saveSilhouette(const std::string& path,
                    const std::vector<std::vector<Vec2>>& polygons);
std::vector<std::vector<Vec2>> loadSilhouette(const std::string& path);

void saveLight(const std::string& path, const core::SHCoefficients& light);
core::SHCoefficients loadLight(const std::string& path);

// Wavefront OBJ with per-corner UVs when present.
void saveOBJ(const std::string& path, const core::TriMesh& mesh);
core::TriMesh loadOBJ(const std::string& path);

// Line-delimited "key=value" metrics document, deterministic formatting.
void saveMetrics(const std::string& path,
                 const std::vector<std::pair<std::string, double>>& metrics);
std::vector<std::pair<std::string, double>> loadMetrics(const std::string& path);

// Optimization state passed between stages.
struct StageState {
    VecX beta;
    std::vector<Vec3> displacements;  // coarse vertices
    VecX normalOffsets;               // empty before the fine stage
    std::vector<double> keyframeSilhouetteError;  // E_silh per fine keyframe
    std::vector<int> keyframeIds;
};

void saveState(const std::string& path, const StageState& state);
StageState loadState(const std::string& path);

}  // namespace avatar::pipeline
