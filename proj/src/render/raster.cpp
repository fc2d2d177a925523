#include "avatar/render/raster.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace avatar::render {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Screen-space barycentric helpers over 2D points.
double edgeFunction(const Vec2& a, const Vec2& b, const Vec2& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

}  // namespace

DepthMap renderDepth(const core::TriMesh& mesh, const PinholeCamera& cam) {
    DepthMap out;
    out.depth = image::Image(cam.width, cam.height, 1,
                             std::numeric_limits<float>::infinity());
    out.faceId.assign(static_cast<size_t>(cam.width) * cam.height, -1);

    for (int f = 0; f < mesh.faceCount(); ++f) {
        const auto& tri = mesh.faces[f];
        Vec3 pc[3];
        Vec2 ps[3];
        bool behind = false;
        for (int k = 0; k < 3; ++k) {
            pc[k] = cam.toCamera(mesh.vertices[tri[k]]);
            if (pc[k].z() <= 1e-6) {
                behind = true;
                break;
            }
            ps[k] = Vec2(cam.fx * pc[k].x() / pc[k].z() + cam.cx,
                         cam.fy * pc[k].y() / pc[k].z() + cam.cy);
        }
        if (behind)
            continue;

        const double area = edgeFunction(ps[0], ps[1], ps[2]);
        if (std::abs(area) < 1e-12)
            continue;

        const int x0 = std::max(0, static_cast<int>(std::floor(
                                       std::min({ps[0].x(), ps[1].x(), ps[2].x()}))));
        const int x1 = std::min(cam.width - 1,
                                static_cast<int>(std::ceil(
                                    std::max({ps[0].x(), ps[1].x(), ps[2].x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(
                                       std::min({ps[0].y(), ps[1].y(), ps[2].y()}))));
        const int y1 = std::min(cam.height - 1,
                                static_cast<int>(std::ceil(
                                    std::max({ps[0].y(), ps[1].y(), ps[2].y()}))));

        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Vec2 p(x, y);
                double l0 = edgeFunction(ps[1], ps[2], p) / area;
                double l1 = edgeFunction(ps[2], ps[0], p) / area;
                double l2 = edgeFunction(ps[0], ps[1], p) / area;
                if (l0 < 0 || l1 < 0 || l2 < 0)
                    continue;
                // Perspective-correct depth via linear 1/z interpolation.
                const double invZ =
                    l0 / pc[0].z() + l1 / pc[1].z() + l2 / pc[2].z();
                const double z = 1.0 / invZ;
                float& buf = out.depth.at(x, y);
                if (z < buf) {
                    buf = static_cast<float>(z);
                    out.faceId[static_cast<size_t>(y) * cam.width + x] = f;
                }
            }
    }
    return out;
}

VertexVisibility vertexVisibility(const core::TriMesh& mesh,
                                  const PinholeCamera& cam,
                                  const DepthMap& depthMap, double alphaMax,
                                  double deltaZ) {
    const std::vector<Vec3> normals = core::vertexNormals(mesh, true);
    VertexVisibility out;
    out.visible.assign(mesh.vertexCount(), 0);
    out.angle.assign(mesh.vertexCount(), 0.0);

    for (int i = 0; i < mesh.vertexCount(); ++i) {
        double z;
        const Vec2 px = cam.project(mesh.vertices[i], &z);
        if (z <= 0 || !depthMap.depth.inside(px))
            continue;
        const double cosA = -normals[i].dot(cam.viewDirection(mesh.vertices[i]));
        if (cosA <= std::cos(alphaMax))
            continue;
        const double bufZ = depthMap.depth.nearest(px.x(), px.y());
        if (z > bufZ + deltaZ)
            continue;
        out.visible[i] = 1;
        out.angle[i] = std::acos(std::clamp(cosA, -1.0, 1.0));
    }
    return out;
}

Vec3 TexelAtlas::surfacePoint(const core::TriMesh& mesh, int t) const {
    const auto& tri = mesh.faces[texelFace[t]];
    const Vec3& b = texelBary[t];
    return b[0] * mesh.vertices[tri[0]] + b[1] * mesh.vertices[tri[1]] +
           b[2] * mesh.vertices[tri[2]];
}

Vec3 TexelAtlas::surfaceNormal(const std::vector<Vec3>& vertexNormals,
                               const core::TriMesh& mesh, int t) const {
    const auto& tri = mesh.faces[texelFace[t]];
    const Vec3& b = texelBary[t];
    const Vec3 n = b[0] * vertexNormals[tri[0]] + b[1] * vertexNormals[tri[1]] +
                   b[2] * vertexNormals[tri[2]];
    const double len = n.norm();
    return len > 1e-12 ? Vec3(n / len) : vertexNormals[tri[0]];
}

namespace {

// Atlas texel coordinates of a UV point: texel (x, y) center sits at
// uv = ((x+0.5)/W, (y+0.5)/H).
Vec2 uvToTexel(const Vec2& uv, int W, int H) {
    return Vec2(uv.x() * W - 0.5, uv.y() * H - 0.5);
}

struct SeamTexel {
    int texel;
    int face;
    double t;  // parameter along the canonical mesh edge
};

}  // namespace

TexelAtlas buildAtlas(const core::TriMesh& mesh, int width, int height,
                      int gutterWidth) {
    if (!mesh.hasUVs())
        throw Error("buildAtlas: mesh has no UVs");
    TexelAtlas atlas;
    atlas.width = width;
    atlas.height = height;
    atlas.texelFace.assign(static_cast<size_t>(width) * height, -1);
    atlas.texelBary.assign(static_cast<size_t>(width) * height, Vec3::Zero());
    atlas.neighbors.assign(static_cast<size_t>(width) * height, {});
    atlas.gutter.assign(static_cast<size_t>(width) * height, 0);

    // Map texel centers into UV triangles. A small tolerance catches texels
    // whose center sits exactly on a shared triangle edge.
    std::vector<double> bestMargin(static_cast<size_t>(width) * height, -1e-7);
    for (int f = 0; f < mesh.faceCount(); ++f) {
        Vec2 p[3];
        for (int k = 0; k < 3; ++k)
            p[k] = uvToTexel(mesh.cornerUVs[f][k], width, height);
        const double area = edgeFunction(p[0], p[1], p[2]);
        if (std::abs(area) < 1e-12)
            continue;
        const int x0 = std::max(
            0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}))));
        const int x1 = std::min(
            width - 1,
            static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
        const int y0 = std::max(
            0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}))));
        const int y1 = std::min(
            height - 1,
            static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Vec2 q(x, y);
                double l0 = edgeFunction(p[1], p[2], q) / area;
                double l1 = edgeFunction(p[2], p[0], q) / area;
                double l2 = edgeFunction(p[0], p[1], q) / area;
                const double margin = std::min({l0, l1, l2});
                const int t = atlas.texelIndex(x, y);
                if (margin > bestMargin[t]) {
                    bestMargin[t] = margin;
                    atlas.texelFace[t] = f;
                    l0 = std::max(l0, 0.0);
                    l1 = std::max(l1, 0.0);
                    l2 = std::max(l2, 0.0);
                    const double sum = l0 + l1 + l2;
                    atlas.texelBary[t] = Vec3(l0, l1, l2) / sum;
                }
            }
    }

    // In-chart 4-adjacency.
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int t = atlas.texelIndex(x, y);
            if (!atlas.valid(t))
                continue;
            for (int d = 0; d < 4; ++d) {
                const int nx = x + dx[d], ny = y + dy[d];
                if (nx < 0 || nx >= width || ny < 0 || ny >= height)
                    continue;
                const int q = atlas.texelIndex(nx, ny);
                if (atlas.valid(q))
                    atlas.neighbors[t].push_back(q);
            }
        }

    // Seam links: boundary texels matched through shared mesh edges by the
    // parametric position of their surface point along the edge.
    const auto edges = core::collectEdges(mesh);
    std::map<std::pair<int, int>, int> edgeOf;
    for (size_t e = 0; e < edges.size(); ++e)
        edgeOf[{edges[e].a, edges[e].b}] = static_cast<int>(e);

    // A mesh edge is a seam if its two incident faces disagree on the UVs of
    // the shared vertices.
    std::vector<char> isSeam(edges.size(), 0);
    auto cornerUV = [&](int face, int vertex) -> Vec2 {
        const auto& tri = mesh.faces[face];
        for (int k = 0; k < 3; ++k)
            if (tri[k] == vertex)
                return mesh.cornerUVs[face][k];
        throw Error("buildAtlas: vertex not in face");
    };
    for (size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].faceLeft < 0 || edges[e].faceRight < 0)
            continue;
        const Vec2 a0 = cornerUV(edges[e].faceLeft, edges[e].a);
        const Vec2 a1 = cornerUV(edges[e].faceRight, edges[e].a);
        const Vec2 b0 = cornerUV(edges[e].faceLeft, edges[e].b);
        const Vec2 b1 = cornerUV(edges[e].faceRight, edges[e].b);
        if ((a0 - a1).norm() > 1e-9 || (b0 - b1).norm() > 1e-9)
            isSeam[e] = 1;
    }

    std::map<int, std::vector<SeamTexel>> seamTexels;  // edge -> texels
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int t = atlas.texelIndex(x, y);
            if (!atlas.valid(t))
                continue;
            bool boundary = false;
            for (int d = 0; d < 4; ++d) {
                const int nx = x + dx[d], ny = y + dy[d];
                if (nx < 0 || nx >= width || ny < 0 || ny >= height ||
                    !atlas.valid(atlas.texelIndex(nx, ny))) {
                    boundary = true;
                    break;
                }
            }
            if (!boundary)
                continue;
            const int f = atlas.texelFace[t];
            const auto& tri = mesh.faces[f];
            // Nearest seam edge of this face in texel space.
            double bestDist = 1.5;  // only link texels hugging the seam
            int bestEdge = -1;
            double bestT = 0;
            for (int k = 0; k < 3; ++k) {
                const int va = tri[k], vb = tri[(k + 1) % 3];
                const auto it = edgeOf.find(std::minmax(va, vb));
                if (it == edgeOf.end() || !isSeam[it->second])
                    continue;
                const Vec2 pa = uvToTexel(mesh.cornerUVs[f][k], width, height);
                const Vec2 pb =
                    uvToTexel(mesh.cornerUVs[f][(k + 1) % 3], width, height);
                const Vec2 q(x, y);
                const double len2 = (pb - pa).squaredNorm();
                if (len2 < 1e-12)
                    continue;
                double s = (q - pa).dot(pb - pa) / len2;
                s = std::clamp(s, 0.0, 1.0);
                const double dist = (pa + s * (pb - pa) - q).norm();
                if (dist < bestDist) {
                    bestDist = dist;
                    bestEdge = it->second;
                    // Canonical parameter runs from edge.a to edge.b.
                    bestT = va == edges[it->second].a ? s : 1.0 - s;
                }
            }
            if (bestEdge >= 0)
                seamTexels[bestEdge].push_back({t, f, bestT});
        }

    auto addLink = [&](int t, int q) {
        auto& list = atlas.neighbors[t];
        if (std::find(list.begin(), list.end(), q) == list.end())
            list.push_back(q);
    };
    for (auto& [e, list] : seamTexels) {
        const int fa = edges[e].faceLeft;
        for (const SeamTexel& st : list) {
            if (st.face != fa)
                continue;  // link from one side; symmetric insert below
            const SeamTexel* best = nullptr;
            double bestDt = 0.2;  // parametric window
            for (const SeamTexel& ot : list) {
                if (ot.face == fa)
                    continue;
                const double dt = std::abs(ot.t - st.t);
                if (dt < bestDt) {
                    bestDt = dt;
                    best = &ot;
                }
            }
            if (best) {
                addLink(st.texel, best->texel);
                addLink(best->texel, st.texel);
            }
        }
    }

    // Gutter mask: uncovered texels near a chart.
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int t = atlas.texelIndex(x, y);
            if (atlas.valid(t))
                continue;
            for (int oy = -gutterWidth; oy <= gutterWidth && !atlas.gutter[t]; ++oy)
                for (int ox = -gutterWidth; ox <= gutterWidth; ++ox) {
                    const int nx = x + ox, ny = y + oy;
                    if (nx < 0 || nx >= width || ny < 0 || ny >= height)
                        continue;
                    if (atlas.valid(atlas.texelIndex(nx, ny))) {
                        atlas.gutter[t] = 1;
                        break;
                    }
                }
        }
    return atlas;
}

PartialTexture bakePartial(const TexelAtlas& atlas, const core::TriMesh& posed,
                           const PinholeCamera& cam, const image::Image& frame,
                           const image::Image& shading, double shadingEps) {
    if (frame.channels != 3)
        throw Error("bakePartial: frame must be RGB");
    if (shading.channels != 1)
        throw Error("bakePartial: shading must be scalar");

    const DepthMap depthMap = renderDepth(posed, cam);
    const std::vector<Vec3> normals = core::vertexNormals(posed, true);

    PartialTexture out;
    out.color = image::Image(atlas.width, atlas.height, 3);
    out.angle = image::Image(atlas.width, atlas.height, 1);
    out.valid.assign(atlas.texelCount(), 0);

    for (int t = 0; t < atlas.texelCount(); ++t) {
        if (!atlas.valid(t))
            continue;
        const Vec3 p = atlas.surfacePoint(posed, t);
        const Vec3 n = atlas.surfaceNormal(normals, posed, t);
        double z;
        const Vec2 px = cam.project(p, &z);
        if (z <= 0 || !frame.inside(px))
            continue;
        const double cosA = -n.dot(cam.viewDirection(p));
        if (cosA <= 0)
            continue;
        if (z > depthMap.depth.nearest(px.x(), px.y()) + 0.005)
            continue;
        const double s = shading.bilinear(px.x(), px.y());
        if (s < shadingEps)
            continue;  // shadow region: unreliable unshading

        const int x = t % atlas.width, y = t / atlas.width;
        for (int c = 0; c < 3; ++c)
            out.color.at(x, y, c) = static_cast<float>(
                frame.bilinear(px.x(), px.y(), c) / std::max(s, shadingEps));
        out.angle.at(x, y) =
            static_cast<float>(std::acos(std::clamp(cosA, 0.0, 1.0)));
        out.valid[t] = 1;
    }
    return out;
}

std::vector<SemanticSample> sampleSemantics(const TexelAtlas& atlas,
                                            const core::TriMesh& posed,
                                            const PinholeCamera& cam,
                                            const image::Image& labelMap,
                                            int labelCount) {
    const DepthMap depthMap = renderDepth(posed, cam);
    const std::vector<Vec3> normals = core::vertexNormals(posed, true);

    std::vector<SemanticSample> out(atlas.texelCount());
    for (int t = 0; t < atlas.texelCount(); ++t) {
        if (!atlas.valid(t))
            continue;
        const Vec3 p = atlas.surfacePoint(posed, t);
        const Vec3 n = atlas.surfaceNormal(normals, posed, t);
        double z;
        const Vec2 px = cam.project(p, &z);
        if (z <= 0 || !labelMap.inside(px))
            continue;
        const double cosA = -n.dot(cam.viewDirection(p));
        if (cosA <= 0)
            continue;
        if (z > depthMap.depth.nearest(px.x(), px.y()) + 0.005)
            continue;
        // Label images store index/255 (8-bit gray PNG convention).
        const int label =
            static_cast<int>(std::lround(labelMap.nearest(px.x(), px.y()) * 255.0));
        if (label < 0 || label >= labelCount)
            throw InputFormatError("sampleSemantics: label index out of range");
        out[t].label = label;
        out[t].angle = std::acos(std::clamp(cosA, 0.0, 1.0));
    }
    return out;
}

}  // namespace avatar::render
