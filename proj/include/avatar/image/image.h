#pragma once

#include "avatar/types.h"

#include <string>
#include <vector>

namespace avatar::image {

// Interleaved float image, row-major, origin top-left.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    float& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool inside(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    bool inside(const Vec2& p) const {
        return p.x() >= 0.0 && p.x() <= width - 1.0 && p.y() >= 0.0 &&
               p.y() <= height - 1.0;
    }

    // Bilinear sample of one channel; clamps to the border.
    float bilinear(double x, double y, int c = 0) const;
    // Nearest-neighbor sample; clamps to the border.
    float nearest(double x, double y, int c = 0) const;
};

// 8-bit PNG (gray, gray+alpha, RGB or RGBA). Values scaled to [0,1].
// With linearize set, applies inverse gamma 2.2 to color channels.
Image loadPNG(const std::string& path, bool linearize = false);

// Writes 8-bit PNG from a 1- or 3-channel image; values clamped to [0,1].
// With applyGamma set, encodes with gamma 1/2.2 (sRGB-style export).
void savePNG(const std::string& path, const Image& img, bool applyGamma = false);

// Portable float map, "Pf" (1 channel) or "PF" (3 channels), little-endian.
Image loadPFM(const std::string& path);
void savePFM(const std::string& path, const Image& img);

// Dense 2-channel float flow field: magic "FLOW2F\0\0", then u32 width,
// u32 height, then width*height*(dx, dy) float32, all little-endian.
Image loadFlow(const std::string& path);
void saveFlow(const std::string& path, const Image& flow);

}  // namespace avatar::image
