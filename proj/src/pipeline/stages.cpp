#include "avatar/pipeline/stages.h"

#include "avatar/body/subdivision.h"
#include "avatar/shading/shading.h"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace avatar::pipeline {

namespace {

namespace fs = std::filesystem;

constexpr double kPi = 3.141592653589793;

std::string joinPath(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

render::PinholeCamera makeCamera(const CameraIntrinsics& in,
                                 const Mat4& worldToCamera) {
    render::PinholeCamera cam;
    cam.fx = in.fx;
    cam.fy = in.fy;
    cam.cx = in.cx;
    cam.cy = in.cy;
    cam.width = in.width;
    cam.height = in.height;
    cam.worldToCamera = worldToCamera;
    return cam;
}

core::TriMesh meshWithTopology(const body::RiggedTemplate& rig,
                               std::vector<Vec3> vertices) {
    core::TriMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.faces = rig.faces;
    mesh.cornerUVs = rig.cornerUVs;
    return mesh;
}

VecX offsetsOrZero(const VecX& offsets, int count) {
    if (offsets.size() == static_cast<Eigen::Index>(count))
        return offsets;
    if (offsets.size() != 0)
        throw Error("normal offset count does not match the model");
    return VecX::Zero(count);
}

void appendReport(Metrics& metrics, const std::string& prefix,
                  const solve::SolveReport& report) {
    metrics.emplace_back(prefix + ".iterations", report.iterations);
    metrics.emplace_back(prefix + ".initial_cost", report.initialCost);
    metrics.emplace_back(prefix + ".final_cost", report.finalCost);
    for (const auto& [term, cost] : report.termCosts)
        metrics.emplace_back(prefix + ".cost." + term, cost);
}

}  // namespace

medium::Keyframe loadKeyframe(const SequenceManifest& manifest, int frameIndex,
                              int jointCount) {
    const FrameRecord& record = manifest.frames.at(frameIndex);
    const FramePose fp = loadPose(manifest.resolve(record.pose), jointCount);
    medium::Keyframe kf;
    kf.frameId = record.id;
    kf.camera = makeCamera(manifest.intrinsics, fp.worldToCamera);
    kf.pose = fp.pose;
    kf.silhouette = loadSilhouette(manifest.resolve(record.silhouette));
    kf.landmarks = loadLandmarks(manifest.resolve(record.landmarks));
    kf.validate();
    return kf;
}

medium::LandmarkMapping landmarkMapping(const RigBundle& bundle) {
    medium::LandmarkMapping mapping;
    for (size_t i = 0; i < bundle.faceLandmarks.size(); ++i)
        mapping.anchors[static_cast<int>(i)] = bundle.faceLandmarks[i];
    return mapping;
}

MediumStageOutput runMediumStage(const SequenceManifest& manifest,
                                 const RigBundle& bundle,
                                 const PipelineConfig& config,
                                 const std::string& outDir) {
    try {
        fs::create_directories(outDir);
        const int jointCount = bundle.rig.jointCount();
        std::vector<medium::Keyframe> keyframes;
        for (int idx : selectKeyframes(static_cast<int>(manifest.frames.size()),
                                       config.mediumKeyframes))
            keyframes.push_back(loadKeyframe(manifest, idx, jointCount));

        const medium::MediumResult result = medium::solveMedium(
            bundle.rig, keyframes, landmarkMapping(bundle), config.medium);
        if (!result.report.success)
            throw Error("optimization did not converge: " +
                        result.report.termination);

        MediumStageOutput out;
        out.state.beta = result.shape.beta;
        out.state.displacements = result.displacements;
        out.report = result.report;

        const body::PoseParams rest = body::PoseParams::rest(jointCount);
        const core::TriMesh mesh = meshWithTopology(
            bundle.rig, body::unposedRestVertices(bundle.rig, result.shape,
                                                  rest, result.displacements));
        saveOBJ(joinPath(outDir, "medium.obj"), mesh);
        saveState(joinPath(outDir, "medium_state.json"), out.state);

        out.metrics.emplace_back("medium.keyframes", keyframes.size());
        out.metrics.emplace_back("medium.silhouette_residuals",
                                 result.silhouetteResiduals);
        out.metrics.emplace_back("medium.face_residuals", result.faceResiduals);
        out.metrics.emplace_back("medium.skipped_frames", result.skippedFrames);
        appendReport(out.metrics, "medium", result.report);
        return out;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("medium", e.what());
    }
}

namespace {

// Global illumination estimate: SH fit over shading samples at visible
// vertices of a few evenly spaced keyframes.
core::SHCoefficients estimateLight(const SequenceManifest& manifest,
                                   const body::SubdividedModel& model,
                                   const body::ShapeParams& shape,
                                   const std::vector<Vec3>& unposed,
                                   const std::vector<int>& keyframeIndices,
                                   const PipelineConfig& config) {
    std::vector<shading::ShadingSample> samples;
    const int jointCount = model.fine.jointCount();
    const double alphaMax = config.fine.alphaMaxDeg * kPi / 180.0;
    for (int probe : selectKeyframes(static_cast<int>(keyframeIndices.size()),
                                     5)) {
        const int idx = keyframeIndices[probe];
        const FrameRecord& record = manifest.frames.at(idx);
        if (record.shading.empty())
            continue;
        const FramePose fp = loadPose(manifest.resolve(record.pose), jointCount);
        const render::PinholeCamera cam =
            makeCamera(manifest.intrinsics, fp.worldToCamera);
        const body::PosedModel posed =
            body::poseVertices(model.fine, shape, fp.pose, unposed);
        const render::DepthMap depth = renderDepth(posed.mesh, cam);
        const render::VertexVisibility vis = render::vertexVisibility(
            posed.mesh, cam, depth, alphaMax, config.fine.depthTolerance);
        const image::Image shadingIm =
            image::loadPFM(manifest.resolve(record.shading));
        const std::vector<Vec3> normals = core::vertexNormals(posed.mesh);
        for (int v = 0; v < posed.mesh.vertexCount(); ++v) {
            if (!vis.visible[v])
                continue;
            const Vec2 px = cam.project(posed.mesh.vertices[v]);
            samples.push_back(
                {normals[v], shadingIm.bilinear(px.x(), px.y())});
        }
    }
    return shading::fitSH(samples).coefficients;
}

fine::WindowNormals frameNormals(const SequenceManifest& manifest,
                                 const body::SubdividedModel& model,
                                 const body::ShapeParams& shape,
                                 const std::vector<Vec3>& unposed,
                                 int frameIndex,
                                 const core::SHCoefficients& light,
                                 const PipelineConfig& config) {
    const FrameRecord& record = manifest.frames.at(frameIndex);
    fine::WindowNormals out;
    out.normals.assign(unposed.size(), Vec3::Zero());
    out.mask.assign(unposed.size(), 0);
    if (record.shading.empty())
        return out;
    const FramePose fp =
        loadPose(manifest.resolve(record.pose), model.fine.jointCount());
    const render::PinholeCamera cam =
        makeCamera(manifest.intrinsics, fp.worldToCamera);
    const body::PosedModel posed =
        body::poseVertices(model.fine, shape, fp.pose, unposed);
    const render::DepthMap depth = renderDepth(posed.mesh, cam);
    const render::VertexVisibility vis = render::vertexVisibility(
        posed.mesh, cam, depth, config.fine.alphaMaxDeg * kPi / 180.0,
        config.fine.depthTolerance);
    const image::Image shadingIm =
        image::loadPFM(manifest.resolve(record.shading));
    const shading::AuxiliaryNormalField field = shading::estimateNormals(
        posed.mesh, cam, shadingIm, light, vis.visible, config.normals);
    for (size_t v = 0; v < unposed.size(); ++v) {
        if (!field.mask[v])
            continue;
        out.normals[v] =
            body::unposeNormal(field.normals[v], posed.blendTransforms[v]);
        out.mask[v] = 1;
    }
    return out;
}

}  // namespace

FineStageOutput runFineStage(const SequenceManifest& manifest,
                             const RigBundle& bundle,
                             const PipelineConfig& config,
                             const StageState& mediumState,
                             const std::string& outDir) {
    try {
        fs::create_directories(outDir);
        const body::SubdividedModel model =
            body::subdivide(bundle.rig, config.subdivisionSteps);
        const int jointCount = bundle.rig.jointCount();
        const body::PoseParams rest = body::PoseParams::rest(jointCount);

        body::ShapeParams shape;
        shape.beta = mediumState.beta.size() == bundle.rig.shapeDim()
                         ? mediumState.beta
                         : VecX::Zero(bundle.rig.shapeDim());
        body::DisplacementField displacements = mediumState.displacements;
        if (displacements.empty())
            displacements.assign(bundle.rig.vertexCount(), Vec3::Zero());

        VecX offsets = body::fitInitialOffsets(model).offsets;
        std::vector<Vec3> consensus =
            model.unposedVertices(shape, rest, displacements, offsets);

        const std::vector<int> keyframes = selectKeyframes(
            static_cast<int>(manifest.frames.size()), config.fineKeyframes);

        FineStageOutput out;
        out.light = estimateLight(manifest, model, shape, consensus, keyframes,
                                  config);

        for (int idx : keyframes) {
            // Control window: the keyframe plus its sequence neighbors.
            std::vector<int> windowIdx = {idx};
            if (idx > 0)
                windowIdx.push_back(idx - 1);
            if (idx + 1 < static_cast<int>(manifest.frames.size()))
                windowIdx.push_back(idx + 1);

            std::vector<medium::Keyframe> frames;
            for (int w : windowIdx)
                frames.push_back(loadKeyframe(manifest, w, jointCount));
            std::vector<fine::FineFrameInput> inputs;
            for (size_t i = 0; i < frames.size(); ++i)
                inputs.push_back(
                    {&frames[i], i == 0 ? 1.0 : config.fine.lambdaNeighbor});

            const std::vector<Vec3> current =
                model.unposedVertices(shape, rest, displacements, offsets);
            std::vector<fine::WindowNormals> window;
            for (int w : windowIdx)
                window.push_back(frameNormals(manifest, model, shape, current,
                                              w, out.light, config));

            // Grid matches from the keyframe's flow to each neighbor.
            std::vector<fine::CorrespondenceSet> matches;
            const FrameRecord& record = manifest.frames.at(idx);
            for (size_t i = 1; i < windowIdx.size(); ++i) {
                const std::string& flowPath = windowIdx[i] == idx - 1
                                                  ? record.flowBackward
                                                  : record.flowForward;
                fine::CorrespondenceSet set;
                if (!flowPath.empty())
                    set = fine::buildMatches(
                        model, shape, displacements, offsets, frames[0],
                        frames[i], image::loadFlow(manifest.resolve(flowPath)),
                        config.fine);
                matches.push_back(std::move(set));
            }

            const fine::FineStepResult step = fine::solveFineStep(
                model, shape, inputs, window, matches, consensus, displacements,
                offsets, landmarkMapping(bundle), bundle.rig.faces,
                config.fine);
            if (step.skipped) {
                ++out.skippedKeyframes;
                out.state.keyframeIds.push_back(record.id);
                out.state.keyframeSilhouetteError.push_back(0.0);
                continue;
            }
            displacements = step.displacements;
            offsets = step.normalOffsets;
            fine::updateConsensus(
                consensus,
                model.unposedVertices(shape, rest, displacements, offsets),
                config.fine.consensusEma);
            const auto silh = step.report.termCosts.find("silh");
            out.state.keyframeIds.push_back(record.id);
            out.state.keyframeSilhouetteError.push_back(
                silh == step.report.termCosts.end() ? 0.0 : silh->second);
        }

        out.state.beta = shape.beta;
        out.state.displacements = displacements;
        out.state.normalOffsets = offsets;

        const core::TriMesh mesh = meshWithTopology(
            model.fine,
            model.unposedVertices(shape, rest, displacements, offsets));
        saveOBJ(joinPath(outDir, "fine.obj"), mesh);
        saveState(joinPath(outDir, "fine_state.json"), out.state);
        saveLight(joinPath(outDir, "light.json"), out.light);

        out.metrics.emplace_back("fine.keyframes", keyframes.size());
        out.metrics.emplace_back("fine.skipped_keyframes", out.skippedKeyframes);
        double meanSilh = 0.0;
        for (double e : out.state.keyframeSilhouetteError)
            meanSilh += e;
        if (!out.state.keyframeSilhouetteError.empty())
            meanSilh /= static_cast<double>(
                out.state.keyframeSilhouetteError.size());
        out.metrics.emplace_back("fine.mean_silhouette_error", meanSilh);
        return out;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("fine", e.what());
    }
}

TextureStageOutput runTextureStage(const SequenceManifest& manifest,
                                   const RigBundle& bundle,
                                   const PipelineConfig& config,
                                   const StageState& geometry,
                                   const std::string& outDir) {
    try {
        fs::create_directories(outDir);
        const body::SubdividedModel model =
            body::subdivide(bundle.rig, config.subdivisionSteps);
        const int jointCount = bundle.rig.jointCount();
        const body::PoseParams rest = body::PoseParams::rest(jointCount);

        body::ShapeParams shape;
        shape.beta = geometry.beta.size() == bundle.rig.shapeDim()
                         ? geometry.beta
                         : VecX::Zero(bundle.rig.shapeDim());
        body::DisplacementField displacements = geometry.displacements;
        if (displacements.empty())
            displacements.assign(bundle.rig.vertexCount(), Vec3::Zero());
        const VecX offsets =
            offsetsOrZero(geometry.normalOffsets, model.offsetCount());

        const std::vector<Vec3> unposed =
            model.unposedVertices(shape, rest, displacements, offsets);
        const core::TriMesh atlasMesh = meshWithTopology(model.fine, unposed);
        const render::TexelAtlas atlas = render::buildAtlas(
            atlasMesh, config.atlasResolution, config.atlasResolution);

        const std::vector<int> keyframes = selectKeyframes(
            static_cast<int>(manifest.frames.size()), config.fineKeyframes);

        std::vector<render::PartialTexture> partials;
        std::vector<std::vector<render::SemanticSample>> observations;
        for (int idx : keyframes) {
            const FrameRecord& record = manifest.frames.at(idx);
            if (record.shading.empty() || record.semantics.empty())
                throw Error("frame " + std::to_string(record.id) +
                            " lacks shading or semantics");
            const FramePose fp =
                loadPose(manifest.resolve(record.pose), jointCount);
            const render::PinholeCamera cam =
                makeCamera(manifest.intrinsics, fp.worldToCamera);
            const body::PosedModel posed =
                body::poseVertices(model.fine, shape, fp.pose, unposed);
            partials.push_back(render::bakePartial(
                atlas, posed.mesh, cam,
                image::loadPNG(manifest.resolve(record.image)),
                image::loadPFM(manifest.resolve(record.shading))));
            observations.push_back(render::sampleSemantics(
                atlas, posed.mesh, cam,
                image::loadPNG(manifest.resolve(record.semantics)),
                config.fuse.labelCount));
        }

        std::vector<double> silhouetteErrors(partials.size(), 1.0);
        if (geometry.keyframeSilhouetteError.size() == partials.size())
            silhouetteErrors = geometry.keyframeSilhouetteError;

        TextureStageOutput out;
        out.prior =
            texture::fuseSemantics(atlas, observations, partials, config.fuse);
        out.merge = texture::mergeTextures(atlas, partials, out.prior,
                                           silhouetteErrors, config.merge);
        image::Image blended = texture::crossBlend(atlas, partials, out.merge,
                                                   config.merge.blendBand);
        std::vector<char> seen(atlas.texelCount(), 0);
        int covered = 0, validCount = 0;
        for (int t = 0; t < atlas.texelCount(); ++t) {
            if (!atlas.valid(t))
                continue;
            ++validCount;
            if (out.merge.source[t] >= 0) {
                seen[t] = 1;
                ++covered;
            }
        }
        texture::diffusionFill(atlas, blended, seen, config.merge.fillPasses);
        out.merge.color = blended;

        image::savePNG(joinPath(outDir, "texture.png"), blended);
        image::Image sourceMap(atlas.width, atlas.height, 1);
        for (int t = 0; t < atlas.texelCount(); ++t)
            sourceMap.data[t] =
                static_cast<float>((out.merge.source[t] + 1) / 255.0);
        image::savePNG(joinPath(outDir, "sources.png"), sourceMap);

        std::ofstream gmm(joinPath(outDir, "gmm.txt"));
        gmm << std::setprecision(12);
        for (size_t l = 0; l < out.prior.gmms.size(); ++l) {
            for (size_t c = 0; c < out.prior.gmms[l].components.size(); ++c) {
                const auto& comp = out.prior.gmms[l].components[c];
                gmm << "label " << l << " component " << c << " weight "
                    << comp.weight << "\nmean " << comp.mean.transpose()
                    << "\ncovariance\n"
                    << comp.covariance << "\n";
            }
        }

        out.metrics.emplace_back("texture.keyframes", partials.size());
        out.metrics.emplace_back("texture.proposals", out.merge.proposals);
        out.metrics.emplace_back("texture.accepted", out.merge.accepted);
        out.metrics.emplace_back(
            "texture.coverage",
            validCount > 0 ? static_cast<double>(covered) / validCount : 0.0);
        return out;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("texture", e.what());
    }
}

void runPipeline(const SequenceManifest& manifest, const RigBundle& bundle,
                 const PipelineConfig& config, const std::string& outDir) {
    fs::create_directories(outDir);
    Metrics metrics;
    auto flush = [&metrics, &outDir] {
        saveMetrics(joinPath(outDir, "metrics.txt"), metrics);
    };
    StageState geometry;
    try {
        if (config.runMedium) {
            MediumStageOutput medium =
                runMediumStage(manifest, bundle, config, outDir);
            geometry = medium.state;
            metrics.insert(metrics.end(), medium.metrics.begin(),
                           medium.metrics.end());
        } else if (fs::exists(joinPath(outDir, "medium_state.json"))) {
            geometry = loadState(joinPath(outDir, "medium_state.json"));
        }
        if (config.runFine) {
            FineStageOutput fineOut =
                runFineStage(manifest, bundle, config, geometry, outDir);
            geometry = fineOut.state;
            metrics.insert(metrics.end(), fineOut.metrics.begin(),
                           fineOut.metrics.end());
        } else if (fs::exists(joinPath(outDir, "fine_state.json"))) {
            geometry = loadState(joinPath(outDir, "fine_state.json"));
        }
        if (config.runTexture) {
            TextureStageOutput tex =
                runTextureStage(manifest, bundle, config, geometry, outDir);
            metrics.insert(metrics.end(), tex.metrics.begin(),
                           tex.metrics.end());
        }
    } catch (const StageError&) {
        flush();
        throw;
    }
    flush();
}

}  // namespace avatar::pipeline
