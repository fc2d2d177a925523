#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avatar/core/obj_io.h"
#include "avatar/image/image.h"

#include "test_helpers.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace avatar;
using namespace avatar::image;

namespace {

std::string tmpPath(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("png round trip preserves 8-bit values") {
    Image img(13, 7, 3);
    std::mt19937 rng(3);
    for (float& v : img.data)
        v = std::uniform_int_distribution<int>(0, 255)(rng) / 255.0f;
    const std::string path = tmpPath("avatar_test_rt.png");
    savePNG(path, img);
    Image back = loadPNG(path);
    REQUIRE(back.width == 13);
    REQUIRE(back.height == 7);
    REQUIRE(back.channels == 3);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
    std::remove(path.c_str());
}

TEST_CASE("png gamma export and linearize import invert each other") {
    Image img(8, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = (x + 8 * y) / 63.0f;
    const std::string path = tmpPath("avatar_test_gamma.png");
    savePNG(path, img, true);
    Image back = loadPNG(path, true);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) < 0.01);
    std::remove(path.c_str());
}

TEST_CASE("pfm round trip is bit exact") {
    for (int ch : {1, 3}) {
        Image img(9, 5, ch);
        std::mt19937 rng(11);
        std::normal_distribution<float> gauss(0.0f, 10.0f);
        for (float& v : img.data)
            v = gauss(rng);
        const std::string path = tmpPath("avatar_test.pfm");
        savePFM(path, img);
        Image back = loadPFM(path);
        REQUIRE(back.channels == ch);
        REQUIRE(back.data == img.data);
        std::remove(path.c_str());
    }
}

TEST_CASE("flow file round trip is bit exact") {
    Image flow(6, 4, 2);
    std::mt19937 rng(5);
    std::normal_distribution<float> gauss(0.0f, 3.0f);
    for (float& v : flow.data)
        v = gauss(rng);
    const std::string path = tmpPath("avatar_test.flo2f");
    saveFlow(path, flow);
    Image back = loadFlow(path);
    REQUIRE(back.width == 6);
    REQUIRE(back.height == 4);
    CHECK(back.data == flow.data);
    std::remove(path.c_str());
}

TEST_CASE("flow loader rejects bad magic") {
    const std::string path = tmpPath("avatar_bad.flo2f");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTFLOWX12345678";
    }
    CHECK_THROWS_AS(loadFlow(path), InputFormatError);
    std::remove(path.c_str());
}

TEST_CASE("bilinear sampling interpolates and clamps") {
    Image img(2, 2, 1);
    img.at(0, 0) = 0.0f;
    img.at(1, 0) = 1.0f;
    img.at(0, 1) = 2.0f;
    img.at(1, 1) = 3.0f;
    CHECK(img.bilinear(0.5, 0.5) == doctest::Approx(1.5));
    CHECK(img.bilinear(0.5, 0.0) == doctest::Approx(0.5));
    CHECK(img.bilinear(-5.0, -5.0) == doctest::Approx(0.0));
    CHECK(img.bilinear(10.0, 10.0) == doctest::Approx(3.0));
    CHECK(img.nearest(0.9, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("obj round trip preserves vertices, faces and uvs") {
    core::TriMesh mesh = testutil::makeIcosahedron();
    mesh.cornerUVs.resize(mesh.faces.size());
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (auto& c : mesh.cornerUVs)
        for (auto& uv : c)
            uv = Vec2(uni(rng), uni(rng));

    const std::string path = tmpPath("avatar_test.obj");
    core::saveOBJ(path, mesh);
    core::TriMesh back = core::loadOBJ(path);
    REQUIRE(back.vertexCount() == mesh.vertexCount());
    REQUIRE(back.faceCount() == mesh.faceCount());
    REQUIRE(back.hasUVs());
    for (int i = 0; i < mesh.vertexCount(); ++i)
        CHECK((back.vertices[i] - mesh.vertices[i]).norm() < 1e-8);
    for (int f = 0; f < mesh.faceCount(); ++f) {
        CHECK(back.faces[f] == mesh.faces[f]);
        for (int k = 0; k < 3; ++k)
            CHECK((back.cornerUVs[f][k] - mesh.cornerUVs[f][k]).norm() < 1e-8);
    }
    std::remove(path.c_str());
}
