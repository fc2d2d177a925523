#pragma once

#include "avatar/fine/fine.h"
#include "avatar/pipeline/config.h"
#include "avatar/pipeline/manifest.h"
#include "avatar/texture/texture.h"

#include <string>
#include <vector>

namespace avatar::pipeline {

// A stage failed; the CLI maps this to exit code 3.
struct StageError : Error {
    StageError(const std::string& stage, const std::string& what)
        : Error(stage + " stage failed: " + what), stage(stage) {}
    std::string stage;
};

// Assembles one frame's calibrated keyframe record from manifest files.
medium::Keyframe loadKeyframe(const SequenceManifest& manifest, int frameIndex,
                              int jointCount);

medium::LandmarkMapping landmarkMapping(const RigBundle& bundle);

using Metrics = std::vector<std::pair<std::string, double>>;

struct MediumStageOutput {
    StageState state;
    solve::SolveReport report;
    Metrics metrics;
};

// Unposed-space shape estimation on the coarse template. Writes
// medium.obj and medium_state.json into outDir.
MediumStageOutput runMediumStage(const SequenceManifest& manifest,
                                 const RigBundle& bundle,
                                 const PipelineConfig& config,
                                 const std::string& outDir);

struct FineStageOutput {
    StageState state;  // includes per-keyframe silhouette errors
    core::SHCoefficients light;
    int skippedKeyframes = 0;
    Metrics metrics;
};

// Per-keyframe shape-from-shading refinement of the subdivided model.
// Writes fine.obj and fine_state.json into outDir.
FineStageOutput runFineStage(const SequenceManifest& manifest,
                             const RigBundle& bundle,
                             const PipelineConfig& config,
                             const StageState& medium,
                             const std::string& outDir);

struct TextureStageOutput {
    texture::MergeState merge;
    texture::SemanticPrior prior;
    Metrics metrics;
};

// Semantic fusion and graph-cut texture merging on the final geometry.
// Writes texture.png, sources.png and gmm.txt into outDir.
TextureStageOutput runTextureStage(const SequenceManifest& manifest,
                                   const RigBundle& bundle,
                                   const PipelineConfig& config,
                                   const StageState& geometry,
                                   const std::string& outDir);

// Full medium -> fine -> texture run honoring the stage toggles; writes
// metrics.txt. Partial outputs of completed stages are retained on failure.
void runPipeline(const SequenceManifest& manifest, const RigBundle& bundle,
                 const PipelineConfig& config, const std::string& outDir);

}  // namespace avatar::pipeline
