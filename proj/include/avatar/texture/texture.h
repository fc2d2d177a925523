#pragma once

#include "avatar/image/image.h"
#include "avatar/render/raster.h"

#include <vector>

namespace avatar::texture {

// RGB in [0, inf) -> (cos h, sin h, s, v). The circular hue embedding
// avoids the 0/360 degree wrap in the mixture models.
Vec4 hsvEmbed(const Vec3& rgb);

struct GaussianComponent {
    Vec4 mean = Vec4::Zero();
    Mat4 covariance = Mat4::Identity();
    double weight = 1.0;
};

// Mixture over embedded HSV colors of one semantic part.
struct ColorGMM {
    std::vector<GaussianComponent> components;

    // Minimum squared Mahalanobis distance over the components.
    double mahalanobis(const Vec4& x) const;
};

struct GMMOptions {
    int components = 3;
    int emIterations = 50;
    int maxSamples = 20000;  // per label, subsampled deterministically
    uint64_t seed = 7;
};

// k-means initialized EM fit; degenerate inputs collapse to fewer
// components (at least one, unit covariance when starved of samples).
ColorGMM fitGMM(const std::vector<Vec4>& samples, const GMMOptions& opts);

struct SemanticPrior {
    std::vector<int> labels;    // per texel; -1 outside the atlas
    std::vector<ColorGMM> gmms; // per label
};

struct FuseOptions {
    int labelCount = 10;
    double pottsWeight = 0.5;
    int maxSweeps = 10;
    GMMOptions gmm;
};

// Per-texel label unaries phi_t(x) = 1 - sum_k X_k(cos^2 alpha_k^t) / K;
// texels without any observation get a uniform row of ones.
MatX semanticUnaries(const render::TexelAtlas& atlas,
                     const std::vector<std::vector<render::SemanticSample>>& observations,
                     int labelCount);

// Fuses per-keyframe semantic observations into a global texel labeling by
// alpha-beta-swap graph cut over the surface adjacency, then fits per-label
// HSV mixtures on the partial-texture colors under the fused labels.
SemanticPrior fuseSemantics(const render::TexelAtlas& atlas,
                            const std::vector<std::vector<render::SemanticSample>>& observations,
                            const std::vector<render::PartialTexture>& partials,
                            const FuseOptions& opts);

struct MergeConfig {
    double visWeight = 1.0;
    double gmmWeight = 0.3;
    double faceWeight = 1.0;
    double silhWeight = 0.5;
    double proposalEpsilon = 1e-3;  // selection prob ~ 1/(eps + E_silh)
    int proposalCap = 0;            // 0 = 3 * keyframe count
    int faceLabel = 1;
    int ssimWindow = 7;
    int blendBand = 3;
    int fillPasses = 50;
    uint64_t seed = 0;
};

// Per-texel structural dissimilarity 1 - SSIM between partial k and
// partial 0, evaluated on face-labeled texels valid in both (0 elsewhere
// and for k = 0).
std::vector<double> faceDissimilarity(const render::TexelAtlas& atlas,
                                      const render::PartialTexture& reference,
                                      const render::PartialTexture& candidate,
                                      const std::vector<int>& labels,
                                      int faceLabel, int window);

// theta_t(k); +inf where the partial does not cover the texel.
double unaryMergeCost(int texel, const render::PartialTexture& partial,
                      const SemanticPrior& prior, double faceDissim,
                      double silhouetteError, const MergeConfig& config);

// Smoothness of one proposal edge: max cross difference between the
// current texture and the candidate partial when the binary decisions
// differ inside one semantic region, 0 across semantic boundaries or when
// a referenced color is missing on both sides.
double etaApprox(const Vec3& currentT, const Vec3& currentQ,
                 const Vec3* candidateT, const Vec3* candidateQ,
                 bool sameSemantic);

struct MergeState {
    image::Image color;       // 3-channel atlas texture M
    std::vector<int> source;  // keyframe per texel; -1 never seen
    int proposals = 0;
    int accepted = 0;  // proposals that switched at least one texel
};

// Full-energy evaluation of a source labeling (exact pairwise form:
// |U_ut^t - U_uq^q| for u_t != u_q within one semantic region).
double mergeEnergy(const render::TexelAtlas& atlas,
                   const std::vector<render::PartialTexture>& partials,
                   const SemanticPrior& prior,
                   const std::vector<double>& silhouetteErrors,
                   const std::vector<int>& source, const MergeConfig& config);

// Randomized binary-decision merging: starts from partial 0 and repeatedly
// tests one keyframe (drawn with probability inversely proportional to its
// silhouette error) against the current texture with an optimal graph cut.
// Stops at the proposal cap or after a full window of K idle proposals.
MergeState mergeTextures(const render::TexelAtlas& atlas,
                         const std::vector<render::PartialTexture>& partials,
                         const SemanticPrior& prior,
                         const std::vector<double>& silhouetteErrors,
                         const MergeConfig& config);

// Linear cross-blend between the two source textures within `band` texels
// of a source-label boundary; texels farther away are untouched.
image::Image crossBlend(const render::TexelAtlas& atlas,
                        const std::vector<render::PartialTexture>& partials,
                        const MergeState& state, int band);

// Iterative neighbor-averaging fill of atlas texels never seen by any
// partial; seen texels act as fixed boundary values.
void diffusionFill(const render::TexelAtlas& atlas, image::Image& color,
                   const std::vector<char>& seen, int passes);

}  // namespace avatar::texture
