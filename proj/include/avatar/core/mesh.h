#pragma once

#include "avatar/types.h"

#include <array>
#include <utility>
#include <vector>

namespace avatar::core {

// Triangle mesh with optional per-face-corner UVs (atlas may have seams, so
// UVs live on corners, not vertices).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<Vec2, 3>> cornerUVs;  // empty or one entry per face

    int vertexCount() const { return static_cast<int>(vertices.size()); }
    int faceCount() const { return static_cast<int>(faces.size()); }
    bool hasUVs() const { return cornerUVs.size() == faces.size(); }

    void validate() const;
};

// A point on a mesh surface: face index plus barycentric weights.
struct SurfaceAnchor {
    int face = -1;
    Vec3 barycentric = Vec3::Zero();  // >= 0, sums to 1

    Vec3 position(const TriMesh& mesh) const {
        const auto& tri = mesh.faces[face];
        return barycentric[0] * mesh.vertices[tri[0]] +
               barycentric[1] * mesh.vertices[tri[1]] +
               barycentric[2] * mesh.vertices[tri[2]];
    }
};

struct MeshEdge {
    int a, b;            // a < b
    int faceLeft = -1;   // faces incident to the edge (-1 if absent)
    int faceRight = -1;
};

// Unique undirected edges; throws on edges with more than two incident faces.
std::vector<MeshEdge> collectEdges(const TriMesh& mesh);

// Unnormalized face normal; its magnitude is twice the triangle area.
inline Vec3 faceNormalScaled(const TriMesh& mesh, int f) {
    const auto& tri = mesh.faces[f];
    const Vec3& a = mesh.vertices[tri[0]];
    return (mesh.vertices[tri[1]] - a).cross(mesh.vertices[tri[2]] - a);
}

std::vector<Vec3> faceNormals(const TriMesh& mesh);

// Area-weighted vertex normals, normalized. Throws on isolated vertices
// unless allowIsolated is set (those get a zero normal).
std::vector<Vec3> vertexNormals(const TriMesh& mesh, bool allowIsolated = false);

// One-ring vertex adjacency.
std::vector<std::vector<int>> vertexAdjacency(const TriMesh& mesh);

// Faces incident to each vertex.
std::vector<std::vector<int>> vertexFaces(const TriMesh& mesh);

}  // namespace avatar::core
