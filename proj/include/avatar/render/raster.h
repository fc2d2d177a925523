#pragma once

#include "avatar/core/mesh.h"
#include "avatar/image/image.h"
#include "avatar/render/camera.h"

#include <array>
#include <vector>

namespace avatar::render {

struct DepthMap {
    image::Image depth;        // positive camera-space z; +inf where empty
    std::vector<int> faceId;   // per pixel, -1 where empty

    int face(int x, int y) const { return faceId[static_cast<size_t>(y) * depth.width + x]; }
};

// Z-buffer rasterization of the mesh at the camera resolution.
DepthMap renderDepth(const core::TriMesh& mesh, const PinholeCamera& cam);

struct VertexVisibility {
    std::vector<char> visible;
    std::vector<double> angle;  // view angle vs normal (radians); valid where visible
};

// A vertex is visible iff it projects inside the image, passes the angle
// test (angle between normal and view direction < alphaMax) and its depth
// is within deltaZ of the z-buffer.
VertexVisibility vertexVisibility(const core::TriMesh& mesh,
                                  const PinholeCamera& cam,
                                  const DepthMap& depthMap,
                                  double alphaMax,
                                  double deltaZ = 0.005);

// Static texel-to-surface mapping of the UV atlas.
struct TexelAtlas {
    int width = 0, height = 0;
    std::vector<int> texelFace;             // -1 outside all charts
    std::vector<Vec3> texelBary;
    // Surface-adjacent texels: up to 4 in-chart plus seam links.
    std::vector<std::vector<int>> neighbors;
    std::vector<char> gutter;               // within 2 texels of a chart, invalid

    int texelIndex(int x, int y) const { return y * width + x; }
    bool valid(int t) const { return texelFace[t] >= 0; }
    int texelCount() const { return width * height; }
    // Texel's surface point on a (posed or rest) mesh with the same topology.
    Vec3 surfacePoint(const core::TriMesh& mesh, int t) const;
    Vec3 surfaceNormal(const std::vector<Vec3>& vertexNormals,
                       const core::TriMesh& mesh, int t) const;
};

TexelAtlas buildAtlas(const core::TriMesh& mesh, int width, int height,
                      int gutterWidth = 2);

// One keyframe's contribution to the atlas.
struct PartialTexture {
    image::Image color;     // 3 channels, unshaded (albedo estimate)
    image::Image angle;     // viewing angle in radians where valid
    std::vector<char> valid;
};

// Projects every visible texel into the frame and divides out shading.
// Texels that are occluded, back-facing, outside the image or in shadow
// (shading below shadingEps) are invalid.
PartialTexture bakePartial(const TexelAtlas& atlas, const core::TriMesh& posed,
                           const PinholeCamera& cam, const image::Image& frame,
                           const image::Image& shading,
                           double shadingEps = 0.02);

struct SemanticSample {
    int label = -1;        // -1 where unobserved
    double angle = 0.0;    // viewing angle at observation time
};

// Nearest-neighbor semantic label observation per visible texel.
std::vector<SemanticSample> sampleSemantics(const TexelAtlas& atlas,
                                            const core::TriMesh& posed,
                                            const PinholeCamera& cam,
                                            const image::Image& labelMap,
                                            int labelCount);

}  // namespace avatar::render
