#include "avatar/core/mesh.h"

#include <algorithm>
#include <map>

namespace avatar::core {

void TriMesh::validate() const {
    const int n = vertexCount();
    for (size_t f = 0; f < faces.size(); ++f) {
        const auto& tri = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (tri[k] < 0 || tri[k] >= n)
                throw Error("TriMesh: face " + std::to_string(f) +
                            " references vertex " + std::to_string(tri[k]));
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw Error("TriMesh: degenerate face " + std::to_string(f));
    }
    if (!cornerUVs.empty() && cornerUVs.size() != faces.size())
        throw Error("TriMesh: cornerUVs size mismatch");
}

std::vector<MeshEdge> collectEdges(const TriMesh& mesh) {
    std::map<std::pair<int, int>, int> index;
    std::vector<MeshEdge> edges;
    for (int f = 0; f < mesh.faceCount(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            int a = tri[k], b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            auto key = std::make_pair(a, b);
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, static_cast<int>(edges.size()));
                edges.push_back({a, b, f, -1});
            } else {
                MeshEdge& e = edges[it->second];
                if (e.faceRight != -1)
                    throw Error("collectEdges: non-manifold edge (" +
                                std::to_string(a) + "," + std::to_string(b) + ")");
                e.faceRight = f;
            }
        }
    }
    return edges;
}

std::vector<Vec3> faceNormals(const TriMesh& mesh) {
    std::vector<Vec3> normals(mesh.faceCount());
    for (int f = 0; f < mesh.faceCount(); ++f) {
        Vec3 n = faceNormalScaled(mesh, f);
        const double len = n.norm();
        normals[f] = len > 1e-14 ? Vec3(n / len) : Vec3::Zero();
    }
    return normals;
}

std::vector<Vec3> vertexNormals(const TriMesh& mesh, bool allowIsolated) {
    std::vector<Vec3> normals(mesh.vertexCount(), Vec3::Zero());
    for (int f = 0; f < mesh.faceCount(); ++f) {
        const Vec3 n = faceNormalScaled(mesh, f);  // area-weighted
        for (int k = 0; k < 3; ++k)
            normals[mesh.faces[f][k]] += n;
    }
    for (int i = 0; i < mesh.vertexCount(); ++i) {
        const double len = normals[i].norm();
        if (len < 1e-14) {
            if (!allowIsolated)
                throw Error("vertexNormals: isolated or degenerate vertex " +
                            std::to_string(i));
            normals[i].setZero();
        } else {
            normals[i] /= len;
        }
    }
    return normals;
}

std::vector<std::vector<int>> vertexAdjacency(const TriMesh& mesh) {
    std::vector<std::vector<int>> adj(mesh.vertexCount());
    for (const MeshEdge& e : collectEdges(mesh)) {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    return adj;
}

std::vector<std::vector<int>> vertexFaces(const TriMesh& mesh) {
    std::vector<std::vector<int>> vf(mesh.vertexCount());
    for (int f = 0; f < mesh.faceCount(); ++f)
        for (int k = 0; k < 3; ++k)
            vf[mesh.faces[f][k]].push_back(f);
    return vf;
}

}  // namespace avatar::core
