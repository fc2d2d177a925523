#include "avatar/pipeline/manifest.h"

#include "avatar/image/image.h"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace avatar::pipeline {

using nlohmann::json;

std::string SequenceManifest::resolve(const std::string& relative) const {
    if (relative.empty() || relative.front() == '/')
        return relative;
    return (std::filesystem::path(root) / relative).string();
}

void saveManifest(const std::string& path, const SequenceManifest& manifest) {
    json frames = json::array();
    for (const FrameRecord& f : manifest.frames) {
        json rec = {{"id", f.id}};
        auto put = [&rec](const char* key, const std::string& value) {
            if (!value.empty())
                rec[key] = value;
        };
        put("image", f.image);
        put("pose", f.pose);
        put("silhouette", f.silhouette);
        put("landmarks", f.landmarks);
        put("semantics", f.semantics);
        put("shading", f.shading);
        put("reflectance", f.reflectance);
        put("flow_forward", f.flowForward);
        put("flow_backward", f.flowBackward);
        frames.push_back(rec);
    }
    const CameraIntrinsics& in = manifest.intrinsics;
    json j = {{"rig", manifest.rigPath},
              {"camera",
               {{"fx", in.fx},
                {"fy", in.fy},
                {"cx", in.cx},
                {"cy", in.cy},
                {"width", in.width},
                {"height", in.height}}},
              {"frames", frames}};
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << j.dump(1) << "\n";
}

SequenceManifest loadManifest(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputFormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    SequenceManifest manifest;
    manifest.root = std::filesystem::path(path).parent_path().string();
    if (manifest.root.empty())
        manifest.root = ".";
    try {
        manifest.rigPath = j.at("rig").get<std::string>();
        const json& cam = j.at("camera");
        manifest.intrinsics.fx = cam.at("fx").get<double>();
        manifest.intrinsics.fy = cam.at("fy").get<double>();
        manifest.intrinsics.cx = cam.at("cx").get<double>();
        manifest.intrinsics.cy = cam.at("cy").get<double>();
        manifest.intrinsics.width = cam.at("width").get<int>();
        manifest.intrinsics.height = cam.at("height").get<int>();
        for (const json& rec : j.at("frames")) {
            FrameRecord f;
            f.id = rec.at("id").get<int>();
            auto get = [&rec](const char* key) {
                return rec.contains(key) ? rec.at(key).get<std::string>()
                                         : std::string();
            };
            f.image = get("image");
            f.pose = get("pose");
            f.silhouette = get("silhouette");
            f.landmarks = get("landmarks");
            f.semantics = get("semantics");
            f.shading = get("shading");
            f.reflectance = get("reflectance");
            f.flowForward = get("flow_forward");
            f.flowBackward = get("flow_backward");
            manifest.frames.push_back(f);
        }
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return manifest;
}

namespace {

// Runs the loader and reports failures without aborting validation.
template <typename Fn>
void checkFile(ValidationReport& report, const std::string& path, Fn&& load) {
    if (path.empty())
        return;
    if (!std::filesystem::exists(path)) {
        report.errors.push_back("missing file: " + path);
        return;
    }
    try {
        load(path);
    } catch (const std::exception& e) {
        report.errors.push_back(std::string(e.what()));
    }
}

}  // namespace

ValidationReport validateManifest(const SequenceManifest& manifest) {
    ValidationReport report;
    if (manifest.frames.empty())
        report.errors.push_back("manifest has no frames");
    if (manifest.intrinsics.fx <= 0.0 || manifest.intrinsics.fy <= 0.0 ||
        manifest.intrinsics.width <= 0 || manifest.intrinsics.height <= 0)
        report.errors.push_back("invalid camera intrinsics");

    int jointCount = -1;
    checkFile(report, manifest.resolve(manifest.rigPath),
              [&jointCount](const std::string& p) {
                  jointCount = static_cast<int>(loadRig(p).rig.parents.size());
              });

    int lastId = std::numeric_limits<int>::min();
    for (const FrameRecord& f : manifest.frames) {
        const std::string tag = "frame " + std::to_string(f.id) + ": ";
        if (f.id <= lastId)
            report.errors.push_back(tag + "frame ids must strictly increase");
        lastId = f.id;
        for (const auto* required :
             {&f.image, &f.pose, &f.silhouette, &f.landmarks})
            if (required->empty())
                report.errors.push_back(tag + "missing required record field");
        checkFile(report, manifest.resolve(f.image),
                  [](const std::string& p) { image::loadPNG(p); });
        if (jointCount > 0)
            checkFile(report, manifest.resolve(f.pose),
                      [jointCount](const std::string& p) {
                          loadPose(p, jointCount);
                      });
        checkFile(report, manifest.resolve(f.silhouette),
                  [](const std::string& p) { loadSilhouette(p); });
        checkFile(report, manifest.resolve(f.landmarks),
                  [](const std::string& p) { loadLandmarks(p); });
        checkFile(report, manifest.resolve(f.semantics),
                  [](const std::string& p) { image::loadPNG(p); });
        checkFile(report, manifest.resolve(f.shading),
                  [](const std::string& p) { image::loadPFM(p); });
        checkFile(report, manifest.resolve(f.reflectance),
                  [](const std::string& p) { image::loadPFM(p); });
        checkFile(report, manifest.resolve(f.flowForward),
                  [](const std::string& p) { image::loadFlow(p); });
        checkFile(report, manifest.resolve(f.flowBackward),
                  [](const std::string& p) { image::loadFlow(p); });
        if (f.flowForward.empty() && f.flowBackward.empty())
            report.flowMissing = true;
    }
    if (report.flowMissing)
        report.warnings.push_back(
            "optical flow missing for some frames; match term disabled");
    return report;
}

std::vector<int> selectKeyframes(int frameCount, int requested) {
    std::vector<int> out;
    if (frameCount <= 0 || requested <= 0)
        return out;
    const int count = std::min(frameCount, requested);
    for (int k = 0; k < count; ++k) {
        // floor rounding keeps ties on the earlier frame
        out.push_back(static_cast<int>(
            static_cast<long long>(k) * frameCount / count));
    }
    return out;
}

}  // namespace avatar::pipeline
