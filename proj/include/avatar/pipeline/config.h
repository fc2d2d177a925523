#pragma once

#include "avatar/fine/fine.h"
#include "avatar/medium/medium.h"
#include "avatar/shading/shading.h"
#include "avatar/texture/texture.h"

#include <string>

namespace avatar::pipeline {

// Pipeline-wide settings; unknown keys anywhere in the document are rejected.
struct PipelineConfig {
    int mediumKeyframes = 120;
    int fineKeyframes = 60;
    int atlasResolution = 1024;
    int subdivisionSteps = 1;
    std::uint64_t seed = 0;
    int threads = 1;

    bool runMedium = true;
    bool runFine = true;
    bool runTexture = true;

    PipelineConfig() {
        // Tighter silhouette matching plus a shape-only warm-up; cold
        // starts otherwise drift tangentially along the contours.
        medium.matchThresholdPx = 6.0;
        medium.robustSigma = 0.015;
        medium.warmupRounds = 10;
    }

    medium::MediumConfig medium;
    fine::FineConfig fine;
    shading::NormalEstimationOptions normals;
    texture::MergeConfig merge;
    texture::FuseOptions fuse;
};

PipelineConfig loadConfig(const std::string& path);
void saveConfig(const std::string& path, const PipelineConfig& config);

}  // namespace avatar::pipeline
