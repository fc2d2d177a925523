#include "avatar/pipeline/io.h"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace avatar::pipeline {

using nlohmann::json;

namespace {

json readJson(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputFormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return j;
}

void writeJson(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << j.dump(1) << "\n";
}

json sparseToJson(const SparseMat& m) {
    json rows = json::array(), cols = json::array(), vals = json::array();
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMat::InnerIterator it(m, k); it; ++it) {
            rows.push_back(it.row());
            cols.push_back(it.col());
            vals.push_back(it.value());
        }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"i", rows}, {"j", cols},
            {"v", vals}};
}

SparseMat sparseFromJson(const json& j) {
    SparseMat m(j.at("rows").get<int>(), j.at("cols").get<int>());
    std::vector<Triplet> triplets;
    const auto& rows = j.at("i");
    const auto& cols = j.at("j");
    const auto& vals = j.at("v");
    for (size_t k = 0; k < rows.size(); ++k)
        triplets.emplace_back(rows[k].get<int>(), cols[k].get<int>(),
                              vals[k].get<double>());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

json denseToJson(const MatX& m) {
    json vals = json::array();
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            vals.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"v", vals}};
}

MatX denseFromJson(const json& j) {
    MatX m(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto& vals = j.at("v");
    size_t k = 0;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            m(r, c) = vals.at(k++).get<double>();
    return m;
}

json vecListToJson(const std::vector<Vec3>& v) {
    json out = json::array();
    for (const Vec3& p : v)
        out.push_back({p.x(), p.y(), p.z()});
    return out;
}

std::vector<Vec3> vecListFromJson(const json& j) {
    std::vector<Vec3> out;
    for (const auto& p : j)
        out.push_back(Vec3(p.at(0).get<double>(), p.at(1).get<double>(),
                           p.at(2).get<double>()));
    return out;
}

}  // namespace

void saveRig(const std::string& path, const RigBundle& bundle) {
    const body::RiggedTemplate& rig = bundle.rig;
    json faces = json::array();
    for (const auto& f : rig.faces)
        faces.push_back({f[0], f[1], f[2]});
    json uvs = json::array();
    for (const auto& c : rig.cornerUVs)
        uvs.push_back({c[0].x(), c[0].y(), c[1].x(), c[1].y(), c[2].x(),
                       c[2].y()});
    json anchors = json::array();
    for (const auto& a : bundle.faceLandmarks)
        anchors.push_back({a.face, a.barycentric[0], a.barycentric[1],
                           a.barycentric[2]});
    writeJson(path,
              {{"vertices", vecListToJson(rig.restVertices)},
               {"faces", faces},
               {"corner_uvs", uvs},
               {"skin_weights", sparseToJson(rig.skinWeights)},
               {"joint_regressor", sparseToJson(rig.jointRegressor)},
               {"parents", rig.parents},
               {"shape_basis", denseToJson(rig.shapeBasis)},
               {"pose_basis", denseToJson(rig.poseBasis)},
               {"face_labels", bundle.faceLabels},
               {"face_landmarks", anchors},
               {"mirror_vertex", bundle.mirrorVertex}});
}

RigBundle loadRig(const std::string& path) {
    const json j = readJson(path);
    RigBundle bundle;
    body::RiggedTemplate& rig = bundle.rig;
    try {
        rig.restVertices = vecListFromJson(j.at("vertices"));
        for (const auto& f : j.at("faces"))
            rig.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(),
                                 f.at(2).get<int>()});
        for (const auto& c : j.at("corner_uvs"))
            rig.cornerUVs.push_back(
                {Vec2(c.at(0).get<double>(), c.at(1).get<double>()),
                 Vec2(c.at(2).get<double>(), c.at(3).get<double>()),
                 Vec2(c.at(4).get<double>(), c.at(5).get<double>())});
        rig.skinWeights = sparseFromJson(j.at("skin_weights"));
        rig.jointRegressor = sparseFromJson(j.at("joint_regressor"));
        rig.parents = j.at("parents").get<std::vector<int>>();
        rig.shapeBasis = denseFromJson(j.at("shape_basis"));
        rig.poseBasis = denseFromJson(j.at("pose_basis"));
        bundle.faceLabels = j.at("face_labels").get<std::vector<int>>();
        for (const auto& a : j.at("face_landmarks")) {
            core::SurfaceAnchor anchor;
            anchor.face = a.at(0).get<int>();
            anchor.barycentric = Vec3(a.at(1).get<double>(), a.at(2).get<double>(),
                                      a.at(3).get<double>());
            bundle.faceLandmarks.push_back(anchor);
        }
        bundle.mirrorVertex = j.at("mirror_vertex").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    rig.validate();
    return bundle;
}

void savePose(const std::string& path, const FramePose& fp) {
    json rot = json::array();
    for (int r = 0; r < fp.pose.jointRotations.rows(); ++r)
        rot.push_back({fp.pose.jointRotations(r, 0), fp.pose.jointRotations(r, 1),
                       fp.pose.jointRotations(r, 2)});
    json extr = json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            extr.push_back(fp.worldToCamera(r, c));
    writeJson(path, {{"joint_rotations", rot},
                     {"translation",
                      {fp.pose.translation.x(), fp.pose.translation.y(),
                       fp.pose.translation.z()}},
                     {"world_to_camera", extr}});
}

FramePose loadPose(const std::string& path, int jointCount) {
    const json j = readJson(path);
    FramePose fp;
    try {
        const auto& rot = j.at("joint_rotations");
        if (static_cast<int>(rot.size()) != jointCount)
            throw InputFormatError(path + ": joint count mismatch");
        fp.pose.jointRotations = MatX::Zero(jointCount, 3);
        for (int r = 0; r < jointCount; ++r)
            for (int c = 0; c < 3; ++c)
                fp.pose.jointRotations(r, c) = rot.at(r).at(c).get<double>();
        const auto& t = j.at("translation");
        fp.pose.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(),
                                   t.at(2).get<double>());
        const auto& extr = j.at("world_to_camera");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                fp.worldToCamera(r, c) = extr.at(4 * r + c).get<double>();
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return fp;
}

void saveLandmarks(const std::string& path,
                   const std::vector<medium::Landmark>& landmarks) {
    json out = json::array();
    for (const auto& lm : landmarks)
        out.push_back({{"id", lm.id},
                       {"x", lm.point.x()},
                       {"y", lm.point.y()},
                       {"confidence", lm.confidence}});
    writeJson(path, out);
}

std::vector<medium::Landmark> loadLandmarks(const std::string& path) {
    const json j = readJson(path);
    std::vector<medium::Landmark> out;
    try {
        for (const auto& e : j) {
            medium::Landmark lm;
            lm.id = e.at("id").get<int>();
            lm.point = Vec2(e.at("x").get<double>(), e.at("y").get<double>());
            lm.confidence = e.at("confidence").get<double>();
            if (lm.confidence < 0.0 || lm.confidence > 1.0)
                throw InputFormatError(path + ": landmark " +
                                       std::to_string(lm.id) +
                                       " confidence out of [0,1]");
            out.push_back(lm);
        }
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return out;
}

void saveSilhouette(const std::string& path,
                    const std::vector<std::vector<Vec2>>& polygons) {
    json out = json::array();
    for (const auto& poly : polygons) {
        json p = json::array();
        for (const Vec2& v : poly)
            p.push_back({v.x(), v.y()});
        out.push_back(p);
    }
    writeJson(path, out);
}

std::vector<std::vector<Vec2>> loadSilhouette(const std::string& path) {
    const json j = readJson(path);
    std::vector<std::vector<Vec2>> out;
    try {
        for (const auto& poly : j) {
            std::vector<Vec2> p;
            for (const auto& v : poly)
                p.push_back(Vec2(v.at(0).get<double>(), v.at(1).get<double>()));
            if (p.size() < 3)
                throw InputFormatError(path + ": degenerate silhouette polygon");
            out.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return out;
}

void saveLight(const std::string& path, const core::SHCoefficients& light) {
    json v = json::array();
    for (int i = 0; i < 9; ++i)
        v.push_back(light[i]);
    writeJson(path, {{"sh", v}});
}

core::SHCoefficients loadLight(const std::string& path) {
    const json j = readJson(path);
    core::SHCoefficients light;
    try {
        const auto& v = j.at("sh");
        if (v.size() != 9)
            throw InputFormatError(path + ": expected 9 SH coefficients");
        for (int i = 0; i < 9; ++i)
            light[i] = v.at(i).get<double>();
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return light;
}

void saveOBJ(const std::string& path, const core::TriMesh& mesh) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    if (mesh.hasUVs()) {
        for (const auto& c : mesh.cornerUVs)
            for (int k = 0; k < 3; ++k)
                out << "vt " << c[k].x() << " " << c[k].y() << "\n";
        for (int f = 0; f < mesh.faceCount(); ++f) {
            out << "f";
            for (int k = 0; k < 3; ++k)
                out << " " << mesh.faces[f][k] + 1 << "/" << 3 * f + k + 1;
            out << "\n";
        }
    } else {
        for (const auto& f : mesh.faces)
            out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1
                << "\n";
    }
}

core::TriMesh loadOBJ(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputFormatError("cannot open " + path);
    core::TriMesh mesh;
    std::vector<Vec2> uvs;
    std::vector<std::array<int, 3>> faceUVs;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x() >> v.y() >> v.z();
            mesh.vertices.push_back(v);
        } else if (tag == "vt") {
            Vec2 v;
            ss >> v.x() >> v.y();
            uvs.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> face{}, uv{-1, -1, -1};
            for (int k = 0; k < 3; ++k) {
                std::string token;
                ss >> token;
                const size_t slash = token.find('/');
                face[k] = std::stoi(token.substr(0, slash)) - 1;
                if (slash != std::string::npos)
                    uv[k] = std::stoi(token.substr(slash + 1)) - 1;
            }
            mesh.faces.push_back(face);
            faceUVs.push_back(uv);
        }
    }
    if (!uvs.empty()) {
        for (const auto& uv : faceUVs) {
            if (uv[0] < 0)
                throw InputFormatError(path + ": mixed UV usage");
            mesh.cornerUVs.push_back({uvs.at(uv[0]), uvs.at(uv[1]),
                                      uvs.at(uv[2])});
        }
    }
    mesh.validate();
    return mesh;
}

void saveMetrics(const std::string& path,
                 const std::vector<std::pair<std::string, double>>& metrics) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << std::setprecision(12);
    for (const auto& [key, value] : metrics)
        out << key << "=" << value << "\n";
}

std::vector<std::pair<std::string, double>> loadMetrics(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputFormatError("cannot open " + path);
    std::vector<std::pair<std::string, double>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InputFormatError(path + ": malformed metrics line: " + line);
        out.emplace_back(line.substr(0, eq), std::stod(line.substr(eq + 1)));
    }
    return out;
}

void saveState(const std::string& path, const StageState& state) {
    json beta = json::array();
    for (int i = 0; i < state.beta.size(); ++i)
        beta.push_back(state.beta[i]);
    json s = json::array();
    for (int i = 0; i < state.normalOffsets.size(); ++i)
        s.push_back(state.normalOffsets[i]);
    writeJson(path, {{"beta", beta},
                     {"displacements", vecListToJson(state.displacements)},
                     {"normal_offsets", s},
                     {"keyframe_silhouette_error", state.keyframeSilhouetteError},
                     {"keyframe_ids", state.keyframeIds}});
}

StageState loadState(const std::string& path) {
    const json j = readJson(path);
    StageState state;
    try {
        const auto& beta = j.at("beta");
        state.beta.resize(beta.size());
        for (size_t i = 0; i < beta.size(); ++i)
            state.beta[i] = beta.at(i).get<double>();
        state.displacements = vecListFromJson(j.at("displacements"));
        const auto& s = j.at("normal_offsets");
        state.normalOffsets.resize(s.size());
        for (size_t i = 0; i < s.size(); ++i)
            state.normalOffsets[i] = s.at(i).get<double>();
        state.keyframeSilhouetteError =
            j.at("keyframe_silhouette_error").get<std::vector<double>>();
        state.keyframeIds = j.at("keyframe_ids").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    return state;
}

}  // namespace avatar::pipeline
