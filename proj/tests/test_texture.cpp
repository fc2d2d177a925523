#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avatar/texture/texture.h"
#include "test_helpers.h"

#include <cmath>
#include <random>

using namespace avatar;
using namespace avatar::texture;

namespace {

// Fully valid rectangular atlas with 4-neighborhood adjacency.
render::TexelAtlas gridAtlas(int w, int h) {
    render::TexelAtlas a;
    a.width = w;
    a.height = h;
    a.texelFace.assign(static_cast<size_t>(w) * h, 0);
    a.texelBary.assign(static_cast<size_t>(w) * h, Vec3(1, 0, 0));
    a.gutter.assign(static_cast<size_t>(w) * h, 0);
    a.neighbors.resize(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto& n = a.neighbors[a.texelIndex(x, y)];
            if (x > 0)
                n.push_back(a.texelIndex(x - 1, y));
            if (x < w - 1)
                n.push_back(a.texelIndex(x + 1, y));
            if (y > 0)
                n.push_back(a.texelIndex(x, y - 1));
            if (y < h - 1)
                n.push_back(a.texelIndex(x, y + 1));
        }
    return a;
}

render::PartialTexture uniformPartial(int w, int h, const Vec3& color,
                                      double angle = 0.0) {
    render::PartialTexture p;
    p.color = image::Image(w, h, 3, 0.0f);
    p.angle = image::Image(w, h, 1, static_cast<float>(angle));
    p.valid.assign(static_cast<size_t>(w) * h, 1);
    for (int t = 0; t < w * h; ++t)
        for (int c = 0; c < 3; ++c)
            p.color.data[3 * t + c] = static_cast<float>(color[c]);
    return p;
}

Vec3 texel(const image::Image& img, int t) {
    return Vec3(img.data[3 * t], img.data[3 * t + 1], img.data[3 * t + 2]);
}

void setTexel(image::Image& img, int t, const Vec3& c) {
    for (int ch = 0; ch < 3; ++ch)
        img.data[3 * t + ch] = static_cast<float>(c[ch]);
}

double psnr(const image::Image& img, const image::Image& truth,
            const std::vector<char>& mask) {
    double mse = 0;
    int count = 0;
    for (size_t t = 0; t < mask.size(); ++t) {
        if (!mask[t])
            continue;
        mse += (texel(img, static_cast<int>(t)) - texel(truth, static_cast<int>(t)))
                   .squaredNorm();
        count += 3;
    }
    return -10.0 * std::log10(mse / count);
}

}  // namespace

TEST_CASE("HSV embedding handles primaries, grays and hue wrap") {
    CHECK((hsvEmbed(Vec3(1, 0, 0)) - Vec4(1, 0, 1, 1)).norm() < 1e-12);
    CHECK((hsvEmbed(Vec3(0, 1, 0)) - Vec4(std::cos(2 * M_PI / 3),
                                          std::sin(2 * M_PI / 3), 1, 1))
              .norm() < 1e-12);
    CHECK((hsvEmbed(Vec3(0.5, 0.5, 0.5)) - Vec4(1, 0, 0, 0.5)).norm() < 1e-12);
    CHECK((hsvEmbed(Vec3::Zero()) - Vec4(1, 0, 0, 0)).norm() < 1e-12);
    // Reds on either side of the wrap embed close together.
    const Vec4 a = hsvEmbed(Vec3(1.0, 0.0, 0.02));
    const Vec4 b = hsvEmbed(Vec3(1.0, 0.02, 0.0));
    CHECK((a - b).norm() < 0.2);
}

TEST_CASE("semantic unaries follow the cosine-weighted vote") {
    const render::TexelAtlas atlas = gridAtlas(2, 1);
    const int K = 4;
    std::vector<std::vector<render::SemanticSample>> obs(
        K, std::vector<render::SemanticSample>(2));
    for (int k = 0; k < K; ++k) {
        obs[k][0] = {3, 0.0};  // unanimous at zero angle
        obs[k][1] = {-1, 0.0};
    }
    obs[1][1] = {5, M_PI / 3};  // one view at 60 degrees

    const MatX unary = semanticUnaries(atlas, obs, 10);
    CHECK(unary(0, 3) == doctest::Approx(0.0));
    CHECK(unary(0, 5) == doctest::Approx(1.0));
    CHECK(unary(1, 5) == doctest::Approx(1.0 - 0.25 / K));
    CHECK(unary(1, 3) == doctest::Approx(1.0));
}

TEST_CASE("label fusion survives 10 percent salt-and-pepper noise") {
    const int w = 24, h = 24;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    std::vector<int> truth(w * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            truth[atlas.texelIndex(x, y)] = x < w / 2 ? 2 : 5;

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> anyLabel(0, 9);
    std::vector<std::vector<render::SemanticSample>> obs(
        5, std::vector<render::SemanticSample>(w * h));
    for (auto& frame : obs)
        for (int t = 0; t < w * h; ++t) {
            frame[t].label = uni(rng) < 0.1 ? anyLabel(rng) : truth[t];
            frame[t].angle = 0.0;
        }

    const SemanticPrior prior = fuseSemantics(atlas, obs, {}, FuseOptions{});
    int correct = 0;
    for (int t = 0; t < w * h; ++t)
        if (prior.labels[t] == truth[t])
            ++correct;
    CHECK(correct >= static_cast<int>(0.99 * w * h));
    CHECK(static_cast<int>(prior.gmms.size()) == 10);
    for (const ColorGMM& g : prior.gmms) {
        REQUIRE(!g.components.empty());
        double wsum = 0;
        for (const auto& c : g.components)
            wsum += c.weight;
        CHECK(wsum == doctest::Approx(1.0));
    }
}

TEST_CASE("GMM fit recovers clusters and Mahalanobis scale") {
    std::mt19937 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = 0.05;
    const std::vector<Vec4> means = {Vec4(1, 0, 0.9, 0.8), Vec4(-1, 0, 0.5, 0.3),
                                     Vec4(0, 1, 0.2, 0.6)};
    std::vector<Vec4> samples;
    for (int i = 0; i < 3000; ++i) {
        Vec4 s = means[i % 3];
        for (int d = 0; d < 4; ++d)
            s[d] += sigma * gauss(rng);
        samples.push_back(s);
    }
    const ColorGMM gmm = fitGMM(samples, GMMOptions{});
    REQUIRE(gmm.components.size() == 3);
    for (const Vec4& mu : means)
        CHECK(gmm.mahalanobis(mu) < 1.0);

    // A point 3 standard deviations from every component scores ~9.
    const Vec4 far = means[0] + Vec4(0, 0, 3 * sigma, 0);
    CHECK(gmm.mahalanobis(far) == doctest::Approx(9.0).epsilon(0.35));
    CHECK(gmm.mahalanobis(far) >= 5.0);
}

TEST_CASE("merge unary matches the formula term by term") {
    const int w = 2, h = 1;
    render::PartialTexture p = uniformPartial(w, h, Vec3(0.8, 0.1, 0.1), 0.0);
    SemanticPrior prior;
    prior.labels.assign(w * h, 0);
    prior.gmms.resize(1);
    prior.gmms[0].components.push_back(
        {hsvEmbed(Vec3(0.8, 0.1, 0.1)), Mat4::Identity(), 1.0});

    MergeConfig config;
    SUBCASE("all terms vanish") {
        CHECK(unaryMergeCost(0, p, prior, 0.0, 0.0, config) ==
              doctest::Approx(0.0));
    }
    SUBCASE("grazing view contributes the full visibility weight") {
        p.angle.data[0] = static_cast<float>(M_PI / 2);
        CHECK(unaryMergeCost(0, p, prior, 0.0, 0.0, config) ==
              doctest::Approx(config.visWeight));
    }
    SUBCASE("color three sigma out pays at least 9 gmm weights") {
        // Unit covariance: squared Mahalanobis equals squared distance.
        prior.gmms[0].components[0].mean =
            hsvEmbed(Vec3(0.8, 0.1, 0.1)) + Vec4(0, 0, 0, 3);
        const double cost = unaryMergeCost(0, p, prior, 0.0, 0.0, config);
        CHECK(cost == doctest::Approx(9.0 * config.gmmWeight));
    }
    SUBCASE("silhouette and face terms are linear") {
        const double cost = unaryMergeCost(0, p, prior, 0.25, 0.5, config);
        CHECK(cost == doctest::Approx(config.faceWeight * 0.25 +
                                      config.silhWeight * 0.5));
    }
    SUBCASE("uncovered texel is infinite") {
        p.valid[1] = 0;
        CHECK(std::isinf(unaryMergeCost(1, p, prior, 0.0, 0.0, config)));
    }
}

TEST_CASE("pairwise coupling is zero across semantic boundaries") {
    const Vec3 a(1, 0, 0), b(0, 1, 0), c(0, 0, 1), d(1, 1, 0);
    CHECK(etaApprox(a, b, &c, &d, false) == 0.0);
    CHECK(etaApprox(a, b, &c, &d, true) ==
          doctest::Approx(std::max((a - d).norm(), (b - c).norm())));
    CHECK(etaApprox(a, b, nullptr, &d, true) == doctest::Approx((a - d).norm()));
    CHECK(etaApprox(a, b, nullptr, nullptr, true) == 0.0);
}

TEST_CASE("identical partials merge to the first partial exactly") {
    const int w = 8, h = 8;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    render::PartialTexture base = uniformPartial(w, h, Vec3::Zero(), 0.2);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int t = 0; t < w * h; ++t)
        setTexel(base.color, t, Vec3(uni(rng), uni(rng), uni(rng)));
    const std::vector<render::PartialTexture> partials(4, base);

    SemanticPrior prior;
    prior.labels.assign(w * h, 0);
    MergeConfig config;
    config.gmmWeight = 0.0;
    const MergeState state = mergeTextures(atlas, partials, prior,
                                           {0.1, 0.1, 0.1, 0.1}, config);
    for (int t = 0; t < w * h; ++t) {
        CHECK((texel(state.color, t) - texel(base.color, t)).norm() == 0.0);
        CHECK(state.source[t] >= 0);
    }
}

TEST_CASE("two half-corrupted partials reach the brute-force optimum") {
    const int w = 4, h = 4;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    render::PartialTexture p0 = uniformPartial(w, h, Vec3::Zero());
    render::PartialTexture p1 = uniformPartial(w, h, Vec3::Zero());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int t = atlas.texelIndex(x, y);
            const bool left = x < w / 2;
            setTexel(p0.color, t, left ? Vec3(1, 0, 0) : Vec3(0.9, 0.1, 0.8));
            p0.angle.data[t] = left ? 0.1f : 1.4f;
            setTexel(p1.color, t, left ? Vec3(0.2, 0.8, 0.9) : Vec3(0, 1, 0));
            p1.angle.data[t] = left ? 1.4f : 0.1f;
        }
    const std::vector<render::PartialTexture> partials = {p0, p1};
    SemanticPrior prior;
    prior.labels.assign(w * h, 0);
    MergeConfig config;
    config.gmmWeight = 0.0;
    config.proposalCap = 12;
    config.seed = 2;
    const std::vector<double> silh = {0.0, 0.0};

    const MergeState state = mergeTextures(atlas, partials, prior, silh, config);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            CHECK(state.source[atlas.texelIndex(x, y)] == (x < w / 2 ? 0 : 1));

    // Exhaustive optimum of the full objective over all 2^16 assignments.
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << 16); ++mask) {
        std::vector<int> source(16);
        for (int t = 0; t < 16; ++t)
            source[t] = (mask >> t) & 1;
        best = std::min(best,
                        mergeEnergy(atlas, partials, prior, silh, source, config));
    }
    CHECK(mergeEnergy(atlas, partials, prior, silh, state.source, config) ==
          doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("merge output is a selection and is seed-reproducible") {
    const int w = 12, h = 12;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<render::PartialTexture> partials;
    for (int k = 0; k < 5; ++k) {
        render::PartialTexture p = uniformPartial(w, h, Vec3::Zero());
        for (int t = 0; t < w * h; ++t) {
            setTexel(p.color, t, Vec3(uni(rng), uni(rng), uni(rng)));
            p.angle.data[t] = static_cast<float>(1.3 * uni(rng));
            p.valid[t] = uni(rng) < 0.8 ? 1 : 0;
        }
        partials.push_back(p);
    }
    SemanticPrior prior;
    prior.labels.assign(w * h, 0);
    for (int t = w * h / 2; t < w * h; ++t)
        prior.labels[t] = 4;
    MergeConfig config;
    config.gmmWeight = 0.0;
    config.seed = 99;
    const std::vector<double> silh = {0.02, 0.3, 0.05, 0.4, 0.01};

    const MergeState a = mergeTextures(atlas, partials, prior, silh, config);
    const MergeState b = mergeTextures(atlas, partials, prior, silh, config);
    CHECK(a.source == b.source);
    CHECK(a.color.data == b.color.data);
    CHECK(a.proposals == b.proposals);

    for (int t = 0; t < w * h; ++t) {
        // Texels covered by the first partial are assigned from the start;
        // assigned texels carry exact provenance.
        if (partials[0].valid[t])
            CHECK(a.source[t] >= 0);
        if (a.source[t] < 0)
            continue;
        REQUIRE(partials[a.source[t]].valid[t]);
        CHECK((texel(a.color, t) - texel(partials[a.source[t]].color, t)).norm() ==
              0.0);
    }
}

TEST_CASE("cross-blending ramps across source boundaries and stays local") {
    const int w = 16, h = 4;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    const std::vector<render::PartialTexture> partials = {
        uniformPartial(w, h, Vec3::Zero()), uniformPartial(w, h, Vec3::Ones())};
    MergeState state;
    state.color = image::Image(w, h, 3, 0.0f);
    state.source.assign(w * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = w / 2; x < w; ++x) {
            state.source[atlas.texelIndex(x, y)] = 1;
            setTexel(state.color, atlas.texelIndex(x, y), Vec3::Ones());
        }

    const image::Image blended = crossBlend(atlas, partials, state, 3);
    std::vector<double> row;
    for (int x = 0; x < w; ++x)
        row.push_back(blended.data[3 * atlas.texelIndex(x, 1)]);
    for (int x = 0; x + 1 < w; ++x)
        CHECK(row[x] <= row[x + 1] + 1e-12);
    for (int x = 0; x < w / 2 - 3; ++x)
        CHECK(row[x] == 0.0);
    for (int x = w / 2 + 3; x < w; ++x)
        CHECK(row[x] == 1.0);
    CHECK(row[w / 2 - 1] > 0.0);
    CHECK(row[w / 2] < 1.0);

    // Uniform colors on both sides: blending is a no-op.
    MergeState uniform = state;
    uniform.color = image::Image(w, h, 3, 0.5f);
    const std::vector<render::PartialTexture> same = {
        uniformPartial(w, h, Vec3(0.5, 0.5, 0.5)),
        uniformPartial(w, h, Vec3(0.5, 0.5, 0.5))};
    const image::Image out = crossBlend(atlas, same, uniform, 3);
    CHECK(out.data == uniform.color.data);
}

TEST_CASE("diffusion fill floods never-seen texels from the boundary") {
    const int w = 8, h = 8;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    image::Image color(w, h, 3, 0.0f);
    std::vector<char> seen(w * h, 0);
    for (int y = 0; y < h; ++y) {
        const int t = atlas.texelIndex(0, y);
        seen[t] = 1;
        setTexel(color, t, Vec3(0.7, 0.2, 0.1));
    }
    diffusionFill(atlas, color, seen, 50);
    for (int t = 0; t < w * h; ++t)
        CHECK((texel(color, t) - Vec3(0.7, 0.2, 0.1)).norm() < 1e-5);
}

TEST_CASE("merging beats the median partial by 3 dB on a noisy fixture") {
    const int w = 32, h = 32;
    const render::TexelAtlas atlas = gridAtlas(w, h);
    image::Image truth(w, h, 3, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            setTexel(truth, atlas.texelIndex(x, y),
                     Vec3(0.2 + 0.6 * x / (w - 1), 0.5, 0.8 - 0.6 * y / (h - 1)));

    // Each keyframe is clean on its own quadrant and noisy elsewhere.
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> uni(-0.35, 0.35);
    std::vector<render::PartialTexture> partials;
    for (int k = 0; k < 4; ++k) {
        render::PartialTexture p = uniformPartial(w, h, Vec3::Zero());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int t = atlas.texelIndex(x, y);
                const int quadrant = (x >= w / 2) + 2 * (y >= h / 2);
                Vec3 c = texel(truth, t);
                if (quadrant != k) {
                    c += Vec3(uni(rng), uni(rng), uni(rng));
                    p.angle.data[t] = 1.2f;
                } else {
                    p.angle.data[t] = 0.1f;
                }
                setTexel(p.color, t, c);
            }
        partials.push_back(p);
    }

    SemanticPrior prior;
    prior.labels.assign(w * h, 0);
    MergeConfig config;
    config.gmmWeight = 0.0;
    config.seed = 23;
    const std::vector<double> silh = {0.01, 0.01, 0.01, 0.01};
    const MergeState merged = mergeTextures(atlas, partials, prior, silh, config);

    const std::vector<char> all(w * h, 1);
    std::vector<double> partialPsnr;
    for (const auto& p : partials)
        partialPsnr.push_back(psnr(p.color, truth, all));
    std::sort(partialPsnr.begin(), partialPsnr.end());
    const double median =
        0.5 * (partialPsnr[1] + partialPsnr[2]);
    CHECK(psnr(merged.color, truth, all) >= median + 3.0);
}
