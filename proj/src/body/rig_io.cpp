#include "avatar/body/rig_io.h"

#include <json.hpp>

#include <fstream>

namespace avatar::body {

using nlohmann::json;

namespace {

json sparseToTriplets(const SparseMat& m) {
    json out = json::array();
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMat::InnerIterator it(m, k); it; ++it)
            out.push_back({it.row(), it.col(), it.value()});
    return out;
}

SparseMat tripletsToSparse(const json& j, int rows, int cols, const char* what) {
    std::vector<Triplet> triplets;
    for (const auto& t : j) {
        const int r = t.at(0).get<int>();
        const int c = t.at(1).get<int>();
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw InputFormatError(std::string("rig: triplet out of range in ") + what);
        triplets.emplace_back(r, c, t.at(2).get<double>());
    }
    SparseMat m(rows, cols);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

json denseToJson(const MatX& m) {
    json out;
    out["cols"] = m.cols();
    json triplets = json::array();
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r)
            if (m(r, c) != 0.0)
                triplets.push_back({r, c, m(r, c)});
    out["triplets"] = std::move(triplets);
    return out;
}

MatX jsonToDense(const json& j, int rows, const char* what) {
    const int cols = j.at("cols").get<int>();
    MatX m = MatX::Zero(rows, cols);
    for (const auto& t : j.at("triplets")) {
        const int r = t.at(0).get<int>();
        const int c = t.at(1).get<int>();
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw InputFormatError(std::string("rig: basis entry out of range in ") + what);
        m(r, c) = t.at(2).get<double>();
    }
    return m;
}

}  // namespace

void saveRig(const RiggedTemplate& rig, const std::filesystem::path& path) {
    json j;
    j["schema"] = "rig/1";
    j["vertices"] = json::array();
    for (const Vec3& v : rig.restVertices)
        j["vertices"].push_back({v.x(), v.y(), v.z()});
    j["faces"] = rig.faces;
    if (!rig.cornerUVs.empty()) {
        json uvs = json::array();
        for (const auto& corner : rig.cornerUVs)
            uvs.push_back({{corner[0].x(), corner[0].y()},
                           {corner[1].x(), corner[1].y()},
                           {corner[2].x(), corner[2].y()}});
        j["uvs"] = std::move(uvs);
    }
    j["parents"] = rig.parents;
    j["weights"] = sparseToTriplets(rig.skinWeights);
    j["joint_regressor"] = sparseToTriplets(rig.jointRegressor);
    if (rig.shapeBasis.size() > 0)
        j["shape_basis"] = denseToJson(rig.shapeBasis);
    if (rig.poseBasis.size() > 0)
        j["pose_basis"] = denseToJson(rig.poseBasis);

    std::ofstream out(path);
    if (!out)
        throw Error("saveRig: cannot write " + path.string());
    out << j.dump();
}

RiggedTemplate loadRig(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("loadRig: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputFormatError("loadRig: " + path.string() + ": " + e.what());
    }
    if (j.value("schema", "") != "rig/1")
        throw InputFormatError("loadRig: unsupported schema in " + path.string());

    RiggedTemplate rig;
    for (const auto& v : j.at("vertices"))
        rig.restVertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                                      v.at(2).get<double>());
    for (const auto& f : j.at("faces"))
        rig.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
    if (j.contains("uvs")) {
        for (const auto& u : j.at("uvs"))
            rig.cornerUVs.push_back(
                {Vec2(u.at(0).at(0).get<double>(), u.at(0).at(1).get<double>()),
                 Vec2(u.at(1).at(0).get<double>(), u.at(1).at(1).get<double>()),
                 Vec2(u.at(2).at(0).get<double>(), u.at(2).at(1).get<double>())});
    }
    rig.parents = j.at("parents").get<std::vector<int>>();

    const int n = rig.vertexCount();
    const int joints = rig.jointCount();
    rig.skinWeights = tripletsToSparse(j.at("weights"), n, joints, "weights");
    rig.jointRegressor =
        tripletsToSparse(j.at("joint_regressor"), joints, n, "joint_regressor");
    if (j.contains("shape_basis"))
        rig.shapeBasis = jsonToDense(j.at("shape_basis"), 3 * n, "shape_basis");
    if (j.contains("pose_basis"))
        rig.poseBasis = jsonToDense(j.at("pose_basis"), 3 * n, "pose_basis");

    rig.validate();
    return rig;
}

}  // namespace avatar::body
