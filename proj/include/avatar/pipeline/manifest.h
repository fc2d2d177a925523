#pragma once

#include "avatar/pipeline/io.h"
#include "avatar/render/camera.h"

#include <string>
#include <vector>

namespace avatar::pipeline {

// Paths are stored relative to the manifest root; empty means absent.
struct FrameRecord {
    int id = -1;
    std::string image;
    std::string pose;
    std::string silhouette;
    std::string landmarks;
    std::string semantics;
    std::string shading;
    std::string reflectance;
    std::string flowForward;   // this frame -> next frame
    std::string flowBackward;  // this frame -> previous frame
};

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
};

struct SequenceManifest {
    std::string root;  // directory resolved against when loading files
    std::string rigPath;
    CameraIntrinsics intrinsics;
    std::vector<FrameRecord> frames;

    std::string resolve(const std::string& relative) const;
};

void saveManifest(const std::string& path, const SequenceManifest& manifest);
SequenceManifest loadManifest(const std::string& path);

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool flowMissing = false;  // any frame lacks flow; match term disabled

    bool ok() const { return errors.empty(); }
};

// Checks structural integrity and parses every referenced file.
ValidationReport validateManifest(const SequenceManifest& manifest);

// Uniform index striding over the frame list; ties take the earlier frame.
std::vector<int> selectKeyframes(int frameCount, int requested);

}  // namespace avatar::pipeline
