#include "avatar/core/laplacian.h"

#include <iostream>

namespace avatar::core {

CotanLaplacian cotanLaplacian(const std::vector<Vec3>& vertices,
                              const std::vector<std::array<int, 3>>& faces,
                              double cotClamp) {
    const int n = static_cast<int>(vertices.size());
    std::vector<Triplet> triplets;
    triplets.reserve(faces.size() * 12);
    int clamped = 0;

    auto cotAt = [&](const Vec3& apex, const Vec3& a, const Vec3& b) {
        const Vec3 u = a - apex, v = b - apex;
        const double cross = u.cross(v).norm();
        double c;
        if (cross < 1e-12) {
            c = cotClamp;  // degenerate triangle
            ++clamped;
        } else {
            c = u.dot(v) / cross;
            if (c > cotClamp) { c = cotClamp; ++clamped; }
            if (c < -cotClamp) { c = -cotClamp; ++clamped; }
        }
        return c;
    };

    for (const auto& tri : faces) {
        for (int k = 0; k < 3; ++k) {
            const int i = tri[k];
            const int j = tri[(k + 1) % 3];
            const int o = tri[(k + 2) % 3];
            const double w = 0.5 * cotAt(vertices[o], vertices[i], vertices[j]);
            // (Lx)_i = sum w_ij (x_i - x_j)
            triplets.emplace_back(i, i, w);
            triplets.emplace_back(j, j, w);
            triplets.emplace_back(i, j, -w);
            triplets.emplace_back(j, i, -w);
        }
    }

    CotanLaplacian L;
    L.matrix.resize(n, n);
    L.matrix.setFromTriplets(triplets.begin(), triplets.end());
    L.clampedCotangents = clamped;
    if (clamped > 0)
        std::cerr << "cotanLaplacian: clamped " << clamped << " cotangents\n";
    return L;
}

CotanLaplacian cotanLaplacian(const TriMesh& mesh, double cotClamp) {
    return cotanLaplacian(mesh.vertices, mesh.faces, cotClamp);
}

}  // namespace avatar::core
