#include "avatar/image/image.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace avatar::image {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

static_assert(std::endian::native == std::endian::little,
              "float image IO assumes a little-endian host");

}  // namespace

float Image::bilinear(double x, double y, int c) const {
    const double fx = std::clamp(x, 0.0, width - 1.0);
    const double fy = std::clamp(y, 0.0, height - 1.0);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double ax = fx - x0, ay = fy - y0;
    return static_cast<float>(
        (1 - ax) * (1 - ay) * at(x0, y0, c) + ax * (1 - ay) * at(x1, y0, c) +
        (1 - ax) * ay * at(x0, y1, c) + ax * ay * at(x1, y1, c));
}

float Image::nearest(double x, double y, int c) const {
    const int xi = std::clamp(static_cast<int>(std::lround(x)), 0, width - 1);
    const int yi = std::clamp(static_cast<int>(std::lround(y)), 0, height - 1);
    return at(xi, yi, c);
}

Image loadPNG(const std::string& path, bool linearize) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw InputFormatError("loadPNG: cannot open " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info)
        throw Error("loadPNG: libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputFormatError("loadPNG: decode error in " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int ch = png_get_channels(png, info);

    std::vector<png_byte> rowData(static_cast<size_t>(w) * ch);
    Image img(w, h, ch);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, rowData.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                img.at(x, y, c) = rowData[static_cast<size_t>(x) * ch + c] / 255.0f;
    }
    png_destroy_read_struct(&png, &info, nullptr);

    if (linearize) {
        // Alpha channels (2nd of 2, 4th of 4) stay linear.
        const int colorCh = ch == 2 ? 1 : (ch == 4 ? 3 : ch);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < colorCh; ++c)
                    img.at(x, y, c) =
                        static_cast<float>(std::pow(img.at(x, y, c), 2.2));
    }
    return img;
}

void savePNG(const std::string& path, const Image& img, bool applyGamma) {
    if (img.channels != 1 && img.channels != 3)
        throw Error("savePNG: expected 1 or 3 channels");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw Error("savePNG: cannot open " + path);

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info)
        throw Error("savePNG: libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("savePNG: encode error for " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = clamp01(img.at(x, y, c));
                if (applyGamma)
                    v = std::pow(v, 1.0 / 2.2);
                row[static_cast<size_t>(x) * img.channels + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image loadPFM(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputFormatError("loadPFM: cannot open " + path);
    std::string magic;
    int w, h;
    double scale;
    in >> magic >> w >> h >> scale;
    if ((magic != "Pf" && magic != "PF") || w <= 0 || h <= 0 || !in)
        throw InputFormatError("loadPFM: bad header in " + path);
    if (scale > 0)
        throw InputFormatError("loadPFM: big-endian data not supported: " + path);
    in.get();  // single whitespace after the header

    const int ch = magic == "PF" ? 3 : 1;
    Image img(w, h, ch);
    std::vector<float> row(static_cast<size_t>(w) * ch);
    // PFM stores rows bottom-up.
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in)
            throw InputFormatError("loadPFM: truncated data in " + path);
        std::memcpy(&img.at(0, y, 0), row.data(), row.size() * sizeof(float));
    }
    return img;
}

void savePFM(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw Error("savePFM: expected 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("savePFM: cannot open " + path);
    out << (img.channels == 3 ? "PF" : "Pf") << "\n"
        << img.width << " " << img.height << "\n-1.0\n";
    const size_t rowFloats = static_cast<size_t>(img.width) * img.channels;
    for (int y = img.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(img.data.data() + y * rowFloats),
                  static_cast<std::streamsize>(rowFloats * sizeof(float)));
}

namespace {
constexpr char kFlowMagic[8] = {'F', 'L', 'O', 'W', '2', 'F', '\0', '\0'};
}

Image loadFlow(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputFormatError("loadFlow: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kFlowMagic, 8) != 0)
        throw InputFormatError("loadFlow: bad magic in " + path);
    uint32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w == 0 || h == 0 || w > 1 << 16 || h > 1 << 16)
        throw InputFormatError("loadFlow: bad dimensions in " + path);
    Image img(static_cast<int>(w), static_cast<int>(h), 2);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    if (!in)
        throw InputFormatError("loadFlow: truncated data in " + path);
    return img;
}

void saveFlow(const std::string& path, const Image& flow) {
    if (flow.channels != 2)
        throw Error("saveFlow: expected 2 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("saveFlow: cannot open " + path);
    out.write(kFlowMagic, 8);
    const uint32_t w = static_cast<uint32_t>(flow.width);
    const uint32_t h = static_cast<uint32_t>(flow.height);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(flow.data.data()),
              static_cast<std::streamsize>(flow.data.size() * sizeof(float)));
}

}  // namespace avatar::image
