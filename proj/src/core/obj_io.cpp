#include "avatar/core/obj_io.h"

#include <fstream>
#include <map>
#include <sstream>

namespace avatar::core {

void saveOBJ(const std::string& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out)
        throw Error("saveOBJ: cannot open " + path);
    out.precision(9);
    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";

    if (mesh.hasUVs()) {
        // Deduplicate corner UVs so seams stay compact.
        std::map<std::pair<double, double>, int> uvIndex;
        std::vector<std::array<int, 3>> faceUV(mesh.faces.size());
        for (size_t f = 0; f < mesh.faces.size(); ++f)
            for (int k = 0; k < 3; ++k) {
                const Vec2& uv = mesh.cornerUVs[f][k];
                auto [it, inserted] = uvIndex.try_emplace(
                    {uv.x(), uv.y()}, static_cast<int>(uvIndex.size()) + 1);
                if (inserted)
                    out << "vt " << uv.x() << " " << uv.y() << "\n";
                faceUV[f][k] = it->second;
            }
        for (size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto& tri = mesh.faces[f];
            out << "f " << tri[0] + 1 << "/" << faceUV[f][0] << " " << tri[1] + 1
                << "/" << faceUV[f][1] << " " << tri[2] + 1 << "/" << faceUV[f][2]
                << "\n";
        }
    } else {
        for (const auto& tri : mesh.faces)
            out << "f " << tri[0] + 1 << " " << tri[1] + 1 << " " << tri[2] + 1
                << "\n";
    }
}

TriMesh loadOBJ(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputFormatError("loadOBJ: cannot open " + path);
    TriMesh mesh;
    std::vector<Vec2> uvs;
    bool anyUV = false;
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
            Vec2 uv;
            ss >> uv.x() >> uv.y();
            uvs.push_back(uv);
        } else if (tag == "f") {
            std::array<int, 3> face{};
            std::array<Vec2, 3> corner{};
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                if (!(ss >> tok))
                    throw InputFormatError("loadOBJ: non-triangle face in " + path);
                const size_t slash = tok.find('/');
                face[k] = std::stoi(tok.substr(0, slash)) - 1;
                if (slash != std::string::npos && slash + 1 < tok.size()) {
                    const int vt = std::stoi(tok.substr(slash + 1)) - 1;
                    if (vt < 0 || vt >= static_cast<int>(uvs.size()))
                        throw InputFormatError("loadOBJ: bad vt index in " + path);
                    corner[k] = uvs[vt];
                    anyUV = true;
                }
            }
            mesh.faces.push_back(face);
            mesh.cornerUVs.push_back(corner);
        }
    }
    if (!anyUV)
        mesh.cornerUVs.clear();
    mesh.validate();
    return mesh;
}

}  // namespace avatar::core
