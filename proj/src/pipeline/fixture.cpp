#include "avatar/pipeline/fixture.h"

#include "avatar/render/raster.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

namespace avatar::pipeline {

namespace {

constexpr double kTau = 6.283185307179586;

std::string frameTag(int id) {
    std::ostringstream ss;
    ss << "frames/" << std::setw(4) << std::setfill('0') << id;
    return ss.str();
}

// Barycentric coordinates of the intersection of a pixel ray with a face.
Vec3 rayFaceBary(const render::PinholeCamera& cam, const Vec2& pixel,
                 const core::TriMesh& mesh, int face) {
    const Vec3 o = cam.center();
    const Vec3 d = (cam.unproject(pixel, 1.0) - o).normalized();
    const auto& tri = mesh.faces[face];
    const Vec3& a = mesh.vertices[tri[0]];
    Mat3 m;
    m.col(0) = mesh.vertices[tri[1]] - a;
    m.col(1) = mesh.vertices[tri[2]] - a;
    m.col(2) = -d;
    const Vec3 x = m.lu().solve(o - a);
    return Vec3(1.0 - x[0] - x[1], x[0], x[1]);
}

}  // namespace

Vec3 fixtureAlbedo(int label, const Vec2& uv) {
    static const Vec3 palette[body::kBodyPartCount] = {
        {0.15, 0.12, 0.10}, {0.85, 0.65, 0.55}, {0.20, 0.35, 0.75},
        {0.80, 0.55, 0.45}, {0.78, 0.53, 0.43}, {0.25, 0.22, 0.30},
        {0.75, 0.50, 0.40}, {0.73, 0.48, 0.38}, {0.50, 0.30, 0.20},
        {0.45, 0.28, 0.18}};
    const double pattern = 0.78 + 0.2 * std::sin(kTau * 6.0 * uv.x()) *
                                      std::sin(kTau * 10.0 * uv.y());
    return palette[label] * pattern;
}

std::vector<std::vector<Vec2>> traceMask(const image::Image& mask) {
    auto inside = [&mask](int x, int y) {
        return mask.inside(x, y) && mask.at(x, y) > 0.5f;
    };
    // Walk pixel cracks with the inside region on the left of the travel
    // direction. At a corner (vx, vy) the adjacent pixels are TL, TR, BL,
    // BR; each direction is valid for exactly one inside/outside pattern.
    static const int dx[4] = {0, 1, 0, -1};  // U, R, D, L
    static const int dy[4] = {-1, 0, 1, 0};
    auto valid = [&](int vx, int vy, int d) {
        switch (d) {
            case 0: return inside(vx - 1, vy - 1) && !inside(vx, vy - 1);
            case 1: return inside(vx, vy - 1) && !inside(vx, vy);
            case 2: return inside(vx, vy) && !inside(vx - 1, vy);
            default: return inside(vx - 1, vy) && !inside(vx - 1, vy - 1);
        }
    };
    std::vector<char> used(static_cast<size_t>(mask.width) * mask.height, 0);
    auto idx = [&mask](int x, int y) {
        return static_cast<size_t>(y) * mask.width + x;
    };
    std::vector<std::vector<Vec2>> out;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            // Left-edge starts: a downward crack at corner (x, y).
            if (!inside(x, y) || inside(x - 1, y) || used[idx(x, y)])
                continue;
            std::vector<Vec2> poly;
            int vx = x, vy = y, dir = 2;
            const int sx = vx, sy = vy, sdir = dir;
            long guard = 4L * (mask.width + 1) * (mask.height + 1);
            do {
                if (dir == 2)
                    used[idx(vx, vy)] = 1;
                poly.push_back(Vec2(vx - 0.5, vy - 0.5));
                vx += dx[dir];
                vy += dy[dir];
                // Prefer a right turn, then straight, then left.
                const int options[3] = {(dir + 1) % 4, dir, (dir + 3) % 4};
                int next = -1;
                for (int o : options)
                    if (valid(vx, vy, o)) {
                        next = o;
                        break;
                    }
                if (next < 0)
                    break;
                dir = next;
            } while ((vx != sx || vy != sy || dir != sdir) && --guard > 0);
            if (poly.size() >= 3)
                out.push_back(std::move(poly));
        }
    }
    return out;
}

FixtureTruth makeFixture(const std::string& outDir, const FixtureOptions& opts) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(outDir) / "frames");
    fs::create_directories(fs::path(outDir) / "truth");

    FixtureTruth truth;
    const body::CapsuleRig capsule = body::makeCapsuleRig(
        {opts.segments, opts.rings, opts.height3d});
    truth.bundle = {capsule.rig, capsule.faceLabels, capsule.faceLandmarks,
                    capsule.mirrorVertex};
    truth.model = body::subdivide(capsule.rig, opts.subdivisionSteps);

    const body::RiggedTemplate& rig = capsule.rig;
    const int coarseN = rig.vertexCount();
    const double h = opts.height3d;

    truth.shape.beta = VecX::Zero(rig.shapeDim());
    truth.shape.beta[0] = 0.03;
    truth.shape.beta[1] = -0.02;

    // Smooth, mirror-symmetric coarse displacements (~4 mm).
    const std::vector<Vec3> restNormals =
        core::vertexNormals(rig.restMesh());
    truth.displacements.assign(coarseN, Vec3::Zero());
    for (int i = 0; i < coarseN; ++i) {
        const Vec3& v = rig.restVertices[i];
        const double az = std::atan2(v.z(), v.x());
        const double amp = 0.004 * std::cos(2.0 * az) *
                           std::sin(kTau * v.y() / h);
        truth.displacements[i] = amp * restNormals[i];
    }

    // Higher-frequency normal offsets (~2 mm) on inserted vertices.
    truth.normalOffsets = VecX::Zero(truth.model.offsetCount());
    for (int e = 0; e < truth.model.offsetCount(); ++e) {
        const auto& ins = truth.model.inserted[e];
        const Vec3 mid = 0.5 * (truth.model.fine.restVertices[ins.parentA] +
                                truth.model.fine.restVertices[ins.parentB]);
        const double az = std::atan2(mid.z(), mid.x());
        truth.normalOffsets[e] = 0.002 * std::sin(5.0 * az) *
                                 std::cos(3.0 * kTau * mid.y() / h * 0.5);
    }

    truth.light << 2.25, 0.27, 0.54, 0.18, 0.045, 0.045, 0.045, 0.018, 0.045;

    const body::PoseParams rest = body::PoseParams::rest(rig.jointCount());

    // Unposed truth surfaces (rest pose, so posed == unposed).
    truth.coarseMesh = rig.restMesh();
    truth.coarseMesh.vertices =
        body::unposedRestVertices(rig, truth.shape, rest, truth.displacements);
    truth.fineMesh.faces = truth.model.fine.faces;
    truth.fineMesh.cornerUVs = truth.model.fine.cornerUVs;
    truth.fineMesh.vertices = truth.model.unposedVertices(
        truth.shape, rest, truth.displacements, truth.normalOffsets);

    const int childPerFace = 1 << (2 * opts.subdivisionSteps);
    truth.fineFaceLabels.resize(truth.fineMesh.faceCount());
    for (int f = 0; f < truth.fineMesh.faceCount(); ++f)
        truth.fineFaceLabels[f] = capsule.faceLabels[f / childPerFace];

    const std::vector<Vec3> fineNormals = core::vertexNormals(truth.fineMesh);

    // Serialized ground truth.
    saveRig((fs::path(outDir) / "rig.json").string(), truth.bundle);
    saveLight((fs::path(outDir) / "truth/light.json").string(), truth.light);
    saveOBJ((fs::path(outDir) / "truth/coarse.obj").string(), truth.coarseMesh);
    saveOBJ((fs::path(outDir) / "truth/fine.obj").string(), truth.fineMesh);
    StageState state;
    state.beta = truth.shape.beta;
    state.displacements = truth.displacements;
    state.normalOffsets = truth.normalOffsets;
    saveState((fs::path(outDir) / "truth/state.json").string(), state);

    // Cameras for the whole orbit up front (flow needs the neighbors).
    const Vec3 target(0.0, 0.5 * h, 0.0);
    std::vector<render::PinholeCamera> cams(opts.frames);
    for (int k = 0; k < opts.frames; ++k)
        cams[k] = render::makeOrbitCamera(target, opts.distance, 0.5 * h,
                                          kTau * k / opts.frames, opts.focal,
                                          opts.width, opts.height);

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> anyLabel(0, body::kBodyPartCount - 1);

    SequenceManifest manifest;
    manifest.root = outDir;
    manifest.rigPath = "rig.json";
    manifest.intrinsics = {cams[0].fx, cams[0].fy, cams[0].cx, cams[0].cy,
                           opts.width, opts.height};

    for (int k = 0; k < opts.frames; ++k) {
        const render::PinholeCamera& cam = cams[k];
        const render::DepthMap depth = renderDepth(truth.fineMesh, cam);

        image::Image rgb(opts.width, opts.height, 3);
        image::Image shadingIm(opts.width, opts.height, 1);
        image::Image albedoIm(opts.width, opts.height, 3);
        image::Image semantics(opts.width, opts.height, 1);
        image::Image mask(opts.width, opts.height, 1);
        std::vector<Vec3> worldPos(static_cast<size_t>(opts.width) *
                                   opts.height);

        for (int y = 0; y < opts.height; ++y) {
            for (int x = 0; x < opts.width; ++x) {
                const int f = depth.face(x, y);
                if (f < 0)
                    continue;
                const Vec3 bary = rayFaceBary(cam, Vec2(x, y), truth.fineMesh, f);
                const auto& tri = truth.fineMesh.faces[f];
                Vec3 p = Vec3::Zero(), n = Vec3::Zero();
                Vec2 uv = Vec2::Zero();
                for (int c = 0; c < 3; ++c) {
                    p += bary[c] * truth.fineMesh.vertices[tri[c]];
                    n += bary[c] * fineNormals[tri[c]];
                    uv += bary[c] * truth.fineMesh.cornerUVs[f][c];
                }
                n.normalize();
                const double s = core::shShade(n, truth.light);
                const Vec3 albedo =
                    fixtureAlbedo(truth.fineFaceLabels[f], uv);
                for (int c = 0; c < 3; ++c) {
                    rgb.at(x, y, c) = static_cast<float>(albedo[c] * s);
                    albedoIm.at(x, y, c) = static_cast<float>(albedo[c]);
                }
                shadingIm.at(x, y) = static_cast<float>(s);
                int label = truth.fineFaceLabels[f];
                if (opts.labelNoise > 0.0 && unit(rng) < opts.labelNoise)
                    label = anyLabel(rng);
                semantics.at(x, y) = static_cast<float>(label / 255.0);
                mask.at(x, y) = 1.0f;
                worldPos[static_cast<size_t>(y) * opts.width + x] = p;
            }
        }

        const std::string tag = frameTag(k);
        auto path = [&](const char* suffix) {
            return (fs::path(outDir) / (tag + suffix)).string();
        };
        image::savePNG(path("_image.png"), rgb);
        image::savePNG(path("_semantics.png"), semantics);
        image::savePFM(path("_shading.pfm"), shadingIm);
        image::savePFM(path("_reflectance.pfm"), albedoIm);
        saveSilhouette(path("_silh.json"), traceMask(mask));

        FramePose fp;
        fp.pose = rest;
        fp.worldToCamera = cam.worldToCamera;
        savePose(path("_pose.json"), fp);

        std::vector<medium::Landmark> landmarks;
        for (size_t a = 0; a < capsule.faceLandmarks.size(); ++a) {
            const Vec3 p = capsule.faceLandmarks[a].position(truth.coarseMesh);
            double z = 0.0;
            const Vec2 px = cam.project(p, &z);
            if (z <= 0.0 || !rgb.inside(px))
                continue;
            const int ix = static_cast<int>(std::lround(px.x()));
            const int iy = static_cast<int>(std::lround(px.y()));
            if (depth.depth.at(ix, iy) < static_cast<float>(z - 0.01))
                continue;  // occluded
            landmarks.push_back({static_cast<int>(a), px, 1.0});
        }
        saveLandmarks(path("_landmarks.json"), landmarks);

        auto writeFlowTo = [&](int j, const char* suffix) {
            image::Image flow(opts.width, opts.height, 2);
            for (int y = 0; y < opts.height; ++y)
                for (int x = 0; x < opts.width; ++x) {
                    if (depth.face(x, y) < 0)
                        continue;
                    const Vec2 q = cams[j].project(
                        worldPos[static_cast<size_t>(y) * opts.width + x]);
                    flow.at(x, y, 0) = static_cast<float>(q.x() - x);
                    flow.at(x, y, 1) = static_cast<float>(q.y() - y);
                }
            image::saveFlow(path(suffix), flow);
        };
        FrameRecord record;
        record.id = k;
        record.image = tag + "_image.png";
        record.pose = tag + "_pose.json";
        record.silhouette = tag + "_silh.json";
        record.landmarks = tag + "_landmarks.json";
        record.semantics = tag + "_semantics.png";
        record.shading = tag + "_shading.pfm";
        record.reflectance = tag + "_reflectance.pfm";
        if (opts.writeFlow) {
            if (k + 1 < opts.frames) {
                writeFlowTo(k + 1, "_flow_fw.flo");
                record.flowForward = tag + "_flow_fw.flo";
            }
            if (k > 0) {
                writeFlowTo(k - 1, "_flow_bw.flo");
                record.flowBackward = tag + "_flow_bw.flo";
            }
        }
        manifest.frames.push_back(record);
    }

    saveManifest((fs::path(outDir) / "manifest.json").string(), manifest);
    return truth;
}

}  // namespace avatar::pipeline
