#pragma once

#include "avatar/body/capsule_rig.h"
#include "avatar/body/subdivision.h"
#include "avatar/core/sh.h"
#include "avatar/image/image.h"
#include "avatar/pipeline/io.h"
#include "avatar/pipeline/manifest.h"

#include <string>

namespace avatar::pipeline {

struct FixtureOptions {
    int frames = 60;
    int width = 640, height = 480;
    double distance = 2.8;
    double focal = 600.0;
    int segments = 24, rings = 24;
    double height3d = 1.8;          // subject height, meters
    int subdivisionSteps = 1;
    double labelNoise = 0.0;        // salt-and-pepper fraction on body pixels
    std::uint64_t seed = 11;
    bool writeFlow = true;
};

// Everything the generator knows exactly, for oracle comparisons.
struct FixtureTruth {
    RigBundle bundle;
    body::SubdividedModel model;
    body::ShapeParams shape;
    body::DisplacementField displacements;  // coarse vertices
    VecX normalOffsets;                     // inserted vertices
    core::SHCoefficients light;
    core::TriMesh coarseMesh;  // unposed truth at (beta*, D*)
    core::TriMesh fineMesh;    // unposed truth at (beta*, D*, S*)
    std::vector<int> fineFaceLabels;
};

// Ground-truth albedo at a surface UV for a semantic part.
Vec3 fixtureAlbedo(int label, const Vec2& uv);

// Renders the synthetic turntable sequence into outDir and writes the
// manifest plus truth files (truth/state.json, truth/light.json,
// truth/coarse.obj, truth/fine.obj).
FixtureTruth makeFixture(const std::string& outDir, const FixtureOptions& opts);

// Closed boundary polygons (pixel centers) of a binary mask.
std::vector<std::vector<Vec2>> traceMask(const image::Image& mask);

}  // namespace avatar::pipeline
