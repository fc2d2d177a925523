#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avatar/core/laplacian.h"
#include "avatar/core/mesh.h"
#include "avatar/core/plucker.h"
#include "avatar/core/robust.h"
#include "avatar/core/sh.h"

#include "test_helpers.h"

#include <numbers>

using namespace avatar;
using namespace avatar::core;
using testutil::makeGrid;
using testutil::makeIcosphere;
using testutil::randomRigid;
using testutil::randomUnit;

TEST_CASE("point_to_ray_distance basics") {
    PluckerRay axis = PluckerRay::fromPointDirection(Vec3(0, 0, 0), Vec3(0, 0, 1));
    Vec3 d = pointToRayResidual(Vec3(1, 0, 0), axis);
    CHECK(d.isApprox(Vec3(0, -1, 0), 1e-12));
    CHECK(d.norm() == doctest::Approx(1.0));

    // Point on the ray.
    CHECK(pointToRayDistance(Vec3(0, 0, 7.5), axis) == doctest::Approx(0.0));
}

TEST_CASE("point_to_ray_distance matches naive closed form") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 p(uni(rng), uni(rng), uni(rng));
        const Vec3 n = randomUnit(rng);
        const Vec3 l(uni(rng), uni(rng), uni(rng));
        PluckerRay ray = PluckerRay::fromPointDirection(p, n);
        CHECK(ray.isValid());
        const double naive = (l - p).cross(n).norm();
        CHECK(pointToRayDistance(l, ray) == doctest::Approx(naive).epsilon(1e-10));
    }
}

TEST_CASE("point_to_ray residual Jacobian") {
    std::mt19937 rng(3);
    PluckerRay ray = PluckerRay::fromPointDirection(Vec3(1, 2, 3), randomUnit(rng));
    const Vec3 l(0.4, -0.2, 1.0);
    const Mat3 J = pointToRayJacobian(ray);
    const double h = 1e-7;
    for (int c = 0; c < 3; ++c) {
        Vec3 lp = l, lm = l;
        lp[c] += h;
        lm[c] -= h;
        const Vec3 fd = (pointToRayResidual(lp, ray) - pointToRayResidual(lm, ray)) / (2 * h);
        CHECK((J.col(c) - fd).norm() < 1e-7);
    }
}

TEST_CASE("unpose_ray identity and translation") {
    std::mt19937 rng(11);
    PluckerRay ray = PluckerRay::fromPointDirection(Vec3(1, 0, 2), randomUnit(rng));
    PluckerRay same = unposeRay(ray, Mat4::Identity());
    CHECK(same.direction.isApprox(ray.direction, 1e-12));
    CHECK(same.moment.isApprox(ray.moment, 1e-12));

    // Pure translation: distance to a co-translated point is unchanged.
    Mat4 T = Mat4::Identity();
    T.topRightCorner<3, 1>() = Vec3(0.3, -1.0, 2.5);
    const Vec3 point(0.2, 0.7, -0.4);
    PluckerRay unposed = unposeRay(ray, T);
    const Vec3 pointUnposed = point - T.topRightCorner<3, 1>();
    CHECK(pointToRayDistance(point, ray) ==
          doctest::Approx(pointToRayDistance(pointUnposed, unposed)).epsilon(1e-12));
}

TEST_CASE("Plucker distance is rigid-invariant") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        const Mat4 T = randomRigid(rng);
        PluckerRay ray = PluckerRay::fromPointDirection(
            Vec3(uni(rng), uni(rng), uni(rng)), randomUnit(rng));
        const Vec3 point(uni(rng), uni(rng), uni(rng));

        PluckerRay posed = transformRay(ray, T);
        const Vec3 posedPoint =
            T.topLeftCorner<3, 3>() * point + T.topRightCorner<3, 1>();
        CHECK(std::abs(pointToRayDistance(point, ray) -
                       pointToRayDistance(posedPoint, posed)) < 1e-9);

        // unpose undoes the transform.
        PluckerRay back = unposeRay(posed, T);
        CHECK(std::abs(pointToRayDistance(point, back) -
                       pointToRayDistance(point, ray)) < 1e-9);
    }
}

TEST_CASE("unpose_ray rejects singular transforms") {
    Mat4 T = Mat4::Identity();
    T(0, 0) = 0.0;
    T(1, 1) = 0.0;
    PluckerRay ray = PluckerRay::fromPointDirection(Vec3(0, 0, 0), Vec3(1, 0, 0));
    CHECK_THROWS_AS(unposeRay(ray, T), DegeneratePoseError);
}

TEST_CASE("geman_mcclure values and properties") {
    CHECK(gemanMcClure(0.0, 1.0) == doctest::Approx(0.0));
    const double sigma = 0.7;
    CHECK(gemanMcClure(sigma * sigma, sigma) == doctest::Approx(0.5));
    const double far = 100.0 * sigma;
    CHECK(gemanMcClure(far * far, sigma) > 1.0 - 1e-3);

    // Monotone in |e|, bounded by 1, even in e.
    double prev = -1.0;
    for (double e = 0.0; e < 20.0; e += 0.25) {
        const double v = gemanMcClure(e * e, sigma);
        CHECK(v >= prev);
        CHECK(v < 1.0);
        CHECK(v == gemanMcClure(e * e, sigma));
        prev = v;
    }
    CHECK_THROWS_AS(gemanMcClure(1.0, 0.0), Error);
}

TEST_CASE("sh_shade ambient and parity") {
    SHCoefficients ambient = SHCoefficients::Zero();
    ambient[0] = 1.0 / sh_constants::c0;
    std::mt19937 rng(5);
    for (int i = 0; i < 10; ++i)
        CHECK(shShade(randomUnit(rng), ambient) == doctest::Approx(1.0));

    SHCoefficients band1 = SHCoefficients::Zero();
    band1[1] = 0.3;
    band1[2] = -0.8;
    band1[3] = 1.1;
    for (int i = 0; i < 10; ++i) {
        const Vec3 n = randomUnit(rng);
        CHECK(shShade(-n, band1) == doctest::Approx(-shShade(n, band1)));
    }
}

TEST_CASE("sh_shade is linear in L") {
    std::mt19937 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SHCoefficients L1, L2;
    for (int i = 0; i < 9; ++i) {
        L1[i] = gauss(rng);
        L2[i] = gauss(rng);
    }
    const Vec3 n = randomUnit(rng);
    const double a = 0.7, b = -2.1;
    CHECK(shShade(n, a * L1 + b * L2) ==
          doctest::Approx(a * shShade(n, L1) + b * shShade(n, L2)));
}

TEST_CASE("sh_shade matches numerically projected clamped-cosine irradiance") {
    // Independent oracle: project max(0, n.d) onto the real SH basis with
    // analytically derived constants via Fibonacci-sphere quadrature.
    const double pi = std::numbers::pi;
    const Vec3 light = Vec3(0.3, -0.5, 0.9).normalized();
    auto irradiance = [&](const Vec3& n) { return std::max(0.0, n.dot(light)); };
    auto basisOracle = [&](const Vec3& n) {
        Eigen::Matrix<double, 9, 1> y;
        const double x = n.x(), yy = n.y(), z = n.z();
        y[0] = std::sqrt(1.0 / (4 * pi));
        y[1] = std::sqrt(3.0 / (4 * pi)) * yy;
        y[2] = std::sqrt(3.0 / (4 * pi)) * z;
        y[3] = std::sqrt(3.0 / (4 * pi)) * x;
        y[4] = std::sqrt(15.0 / (4 * pi)) * x * yy;
        y[5] = std::sqrt(15.0 / (4 * pi)) * yy * z;
        y[6] = std::sqrt(5.0 / (16 * pi)) * (3 * z * z - 1);
        y[7] = std::sqrt(15.0 / (4 * pi)) * x * z;
        y[8] = std::sqrt(15.0 / (16 * pi)) * (x * x - yy * yy);
        return y;
    };

    const int samples = 40000;
    std::vector<Vec3> dirs(samples);
    const double golden = pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < samples; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / samples;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        dirs[i] = Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }

    SHCoefficients L = SHCoefficients::Zero();
    for (const Vec3& n : dirs)
        L += irradiance(n) * basisOracle(n);
    L *= 4.0 * pi / samples;

    // The library constants must agree with the analytic ones.
    SHCoefficients lib = shBasis(Vec3(0.36, 0.48, 0.8));
    CHECK((lib - basisOracle(Vec3(0.36, 0.48, 0.8))).cwiseAbs().maxCoeff() < 1e-5);

    // sh_shade must reproduce the projected (band-limited) irradiance
    // computed through the independent basis formulas.
    double rms = 0.0;
    double peak = 0.0;
    std::mt19937 rng(17);
    const int testPts = 500;
    for (int i = 0; i < testPts; ++i) {
        const Vec3 n = randomUnit(rng);
        const double projected = L.dot(basisOracle(n));
        const double err = shShade(n, L) - projected;
        rms += err * err;
        peak = std::max(peak, std::abs(projected));
    }
    rms = std::sqrt(rms / testPts);
    CHECK(rms <= 0.02 * peak);
}

TEST_CASE("cotan laplacian on flat grid is harmonic at interior vertices") {
    TriMesh grid = makeGrid(6, 6);
    CotanLaplacian L = cotanLaplacian(grid);
    for (int c = 0; c < 3; ++c) {
        VecX coord(grid.vertexCount());
        for (int i = 0; i < grid.vertexCount(); ++i)
            coord[i] = grid.vertices[i][c];
        VecX lap = L.apply(coord);
        // Interior vertices of the flat grid.
        for (int y = 1; y < 6; ++y)
            for (int x = 1; x < 6; ++x)
                CHECK(std::abs(lap[y * 7 + x]) < 1e-9);
    }
}

TEST_CASE("cotan weights on equilateral triangle pair") {
    TriMesh mesh;
    const double h = std::sqrt(3.0) / 2.0;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, h, 0), Vec3(0.5, -h, 0)};
    mesh.faces = {{0, 1, 2}, {0, 3, 1}};
    CotanLaplacian L = cotanLaplacian(mesh);
    // Interior edge (0,1): two cot(60) terms averaged -> 1/sqrt(3).
    CHECK(-L.matrix.coeff(0, 1) == doctest::Approx(1.0 / std::sqrt(3.0)));
    // Boundary edge (0,2): single cot(60)/2.
    CHECK(-L.matrix.coeff(0, 2) == doctest::Approx(0.5 / std::sqrt(3.0)));
}

TEST_CASE("cotan laplacian symmetry, zero row sums, PSD") {
    TriMesh sphere = makeIcosphere(2);
    // Perturb to make it irregular.
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> uni(-0.05, 0.05);
    for (auto& v : sphere.vertices)
        v += Vec3(uni(rng), uni(rng), uni(rng));

    CotanLaplacian L = cotanLaplacian(sphere);
    SparseMat diff = SparseMat(L.matrix.transpose()) - L.matrix;
    CHECK(diff.coeffs().cwiseAbs().maxCoeff() < 1e-9);

    VecX ones = VecX::Ones(sphere.vertexCount());
    CHECK(L.apply(ones).cwiseAbs().maxCoeff() < 1e-9);

    for (int t = 0; t < 5; ++t) {
        VecX x = VecX::Random(sphere.vertexCount());
        CHECK(x.dot(L.apply(x)) >= -1e-9);
    }
}

TEST_CASE("degenerate triangle clamps instead of blowing up") {
    TriMesh mesh;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, 1e-9, 0)};
    mesh.faces = {{0, 1, 2}};
    CotanLaplacian L = cotanLaplacian(mesh);
    CHECK(L.clampedCotangents > 0);
    CHECK(std::isfinite(L.matrix.coeff(0, 1)));
}

TEST_CASE("vertex normals: corner, sphere, grid") {
    // Three equal-area faces meeting at the origin corner of a cube.
    TriMesh corner;
    corner.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    corner.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}};
    auto normals = vertexNormals(corner);
    CHECK(normals[0].isApprox(Vec3(1, 1, 1).normalized(), 1e-9));

    TriMesh sphere = makeIcosphere(3);
    auto sphereNormals = vertexNormals(sphere);
    for (int i = 0; i < sphere.vertexCount(); ++i) {
        const double cosAngle =
            sphereNormals[i].dot(sphere.vertices[i].normalized());
        CHECK(std::acos(std::min(1.0, cosAngle)) < 2.0 * std::numbers::pi / 180.0);
    }

    TriMesh grid = makeGrid(4, 4);
    for (const Vec3& n : vertexNormals(grid))
        CHECK(n.isApprox(Vec3(0, 0, 1), 1e-12));
}

TEST_CASE("vertex normals reject isolated vertices") {
    TriMesh mesh;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(5, 5, 5)};
    mesh.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(vertexNormals(mesh), Error);
    CHECK(vertexNormals(mesh, true)[3].norm() == doctest::Approx(0.0));
}
