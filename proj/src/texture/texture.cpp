#include "avatar/texture/texture.h"

#include "avatar/graph/labeling.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

namespace avatar::texture {

namespace {

constexpr double kBigCost = 1e12;  // finite stand-in for +inf inside cuts

Vec3 texelColor(const image::Image& img, int t) {
    return Vec3(img.data[3 * static_cast<size_t>(t)],
                img.data[3 * static_cast<size_t>(t) + 1],
                img.data[3 * static_cast<size_t>(t) + 2]);
}

void setTexelColor(image::Image& img, int t, const Vec3& c) {
    for (int ch = 0; ch < 3; ++ch)
        img.data[3 * static_cast<size_t>(t) + ch] = static_cast<float>(c[ch]);
}

}  // namespace

Vec4 hsvEmbed(const Vec3& rgb) {
    const double mx = rgb.maxCoeff();
    const double mn = rgb.minCoeff();
    const double delta = mx - mn;
    double h = 0.0;
    if (delta > 1e-12) {
        if (mx == rgb.x())
            h = std::fmod((rgb.y() - rgb.z()) / delta, 6.0);
        else if (mx == rgb.y())
            h = (rgb.z() - rgb.x()) / delta + 2.0;
        else
            h = (rgb.x() - rgb.y()) / delta + 4.0;
        h *= M_PI / 3.0;
    }
    const double s = mx > 1e-12 ? delta / mx : 0.0;
    return Vec4(std::cos(h), std::sin(h), s, mx);
}

double ColorGMM::mahalanobis(const Vec4& x) const {
    if (components.empty())
        throw Error("ColorGMM: no components");
    double best = std::numeric_limits<double>::infinity();
    for (const GaussianComponent& c : components) {
        const Vec4 d = x - c.mean;
        best = std::min(best, d.dot(c.covariance.ldlt().solve(d)));
    }
    return best;
}

ColorGMM fitGMM(const std::vector<Vec4>& samplesIn, const GMMOptions& opts) {
    ColorGMM gmm;
    if (samplesIn.empty()) {
        gmm.components.push_back({});
        return gmm;
    }

    std::vector<Vec4> samples = samplesIn;
    if (static_cast<int>(samples.size()) > opts.maxSamples) {
        std::vector<Vec4> sub;
        const double stride =
            static_cast<double>(samples.size()) / opts.maxSamples;
        for (int i = 0; i < opts.maxSamples; ++i)
            sub.push_back(samples[static_cast<size_t>(i * stride)]);
        samples = std::move(sub);
    }
    const int n = static_cast<int>(samples.size());
    const int k = std::max(1, std::min(opts.components, n));

    // k-means++ seeding, then Lloyd iterations.
    std::mt19937_64 rng(opts.seed);
    std::vector<Vec4> centers;
    centers.push_back(samples[rng() % n]);
    std::vector<double> dist2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0;
        for (int i = 0; i < n; ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (const Vec4& c : centers)
                d = std::min(d, (samples[i] - c).squaredNorm());
            dist2[i] = d;
            total += d;
        }
        if (total <= 1e-18) {
            centers.push_back(samples[rng() % n]);
            continue;
        }
        std::uniform_real_distribution<double> uni(0.0, total);
        double r = uni(rng);
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            r -= dist2[i];
            if (r <= 0) {
                pick = i;
                break;
            }
        }
        centers.push_back(samples[pick]);
    }
    std::vector<int> assign(n, 0);
    for (int it = 0; it < 30; ++it) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (samples[i] - centers[c]).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        for (int c = 0; c < k; ++c) {
            Vec4 mean = Vec4::Zero();
            int count = 0;
            for (int i = 0; i < n; ++i)
                if (assign[i] == c) {
                    mean += samples[i];
                    ++count;
                }
            if (count > 0)
                centers[c] = mean / count;
        }
        if (!changed)
            break;
    }

    // EM refinement with full covariances.
    std::vector<GaussianComponent> comps(k);
    for (int c = 0; c < k; ++c) {
        comps[c].mean = centers[c];
        comps[c].weight = 1.0 / k;
    }
    MatX resp(n, k);
    for (int it = 0; it < opts.emIterations; ++it) {
        for (int i = 0; i < n; ++i) {
            double sum = 0;
            for (int c = 0; c < k; ++c) {
                const Vec4 d = samples[i] - comps[c].mean;
                const auto ldlt = comps[c].covariance.ldlt();
                const double logDet =
                    std::log(std::max(comps[c].covariance.determinant(), 1e-30));
                const double logP = -0.5 * d.dot(ldlt.solve(d)) - 0.5 * logDet +
                                    std::log(comps[c].weight);
                resp(i, c) = std::exp(std::max(logP, -600.0));
                sum += resp(i, c);
            }
            if (sum <= 0)
                resp.row(i).setConstant(1.0 / k);
            else
                resp.row(i) /= sum;
        }
        for (int c = 0; c < k; ++c) {
            const double nk = resp.col(c).sum();
            if (nk < 1e-9)
                continue;
            Vec4 mean = Vec4::Zero();
            for (int i = 0; i < n; ++i)
                mean += resp(i, c) * samples[i];
            mean /= nk;
            Mat4 cov = Mat4::Zero();
            for (int i = 0; i < n; ++i) {
                const Vec4 d = samples[i] - mean;
                cov += resp(i, c) * d * d.transpose();
            }
            cov /= nk;
            comps[c].mean = mean;
            comps[c].covariance = cov + 1e-6 * Mat4::Identity();
            comps[c].weight = nk / n;
        }
        double wsum = 0;
        for (const auto& c : comps)
            wsum += c.weight;
        for (auto& c : comps)
            c.weight /= wsum;
    }
    gmm.components = std::move(comps);
    return gmm;
}

MatX semanticUnaries(const render::TexelAtlas& atlas,
                     const std::vector<std::vector<render::SemanticSample>>& observations,
                     int labelCount) {
    const int T = atlas.texelCount();
    const double K = std::max<size_t>(observations.size(), 1);
    MatX unary = MatX::Ones(T, labelCount);
    for (const auto& frame : observations) {
        if (static_cast<int>(frame.size()) != T)
            throw InputFormatError("semanticUnaries: observation size mismatch");
        for (int t = 0; t < T; ++t) {
            const render::SemanticSample& s = frame[t];
            if (s.label < 0)
                continue;
            if (s.label >= labelCount)
                throw InputFormatError("semanticUnaries: label out of range");
            const double c = std::cos(s.angle);
            unary(t, s.label) -= c * c / K;
        }
    }
    return unary;
}

SemanticPrior fuseSemantics(const render::TexelAtlas& atlas,
                            const std::vector<std::vector<render::SemanticSample>>& observations,
                            const std::vector<render::PartialTexture>& partials,
                            const FuseOptions& opts) {
    const int T = atlas.texelCount();
    SemanticPrior prior;
    prior.labels.assign(T, -1);

    bool anyObservation = false;
    for (const auto& frame : observations)
        for (const auto& s : frame)
            if (s.label >= 0)
                anyObservation = true;

    std::vector<int> nodeOf(T, -1);
    std::vector<int> texelOf;
    for (int t = 0; t < T; ++t)
        if (atlas.valid(t)) {
            nodeOf[t] = static_cast<int>(texelOf.size());
            texelOf.push_back(t);
        }

    if (!anyObservation) {
        std::cerr << "fuseSemantics: no semantic observations, "
                     "using all-background prior\n";
        for (int t : texelOf)
            prior.labels[t] = 0;
    } else {
        const MatX unaryFull = semanticUnaries(atlas, observations, opts.labelCount);
        graph::LabelProblem problem;
        problem.labelCount = opts.labelCount;
        problem.unary.resize(texelOf.size(), opts.labelCount);
        for (size_t i = 0; i < texelOf.size(); ++i)
            problem.unary.row(i) = unaryFull.row(texelOf[i]);
        for (int t = 0; t < T; ++t)
            for (int q : atlas.neighbors[t])
                if (t < q && nodeOf[t] >= 0 && nodeOf[q] >= 0)
                    problem.edges.emplace_back(nodeOf[t], nodeOf[q]);
        const double potts = opts.pottsWeight;
        problem.pairwise = [potts](int, int a, int b) {
            return a == b ? 0.0 : potts;
        };

        std::vector<int> initial(texelOf.size());
        for (size_t i = 0; i < texelOf.size(); ++i) {
            int best = 0;
            problem.unary.row(i).minCoeff(&best);
            initial[i] = best;
        }
        const graph::SwapResult fused =
            graph::alphaBetaSwap(problem, std::move(initial), opts.maxSweeps);
        for (size_t i = 0; i < texelOf.size(); ++i)
            prior.labels[texelOf[i]] = fused.labels[i];
    }

    // Per-label mixtures over the unshaded partial-texture colors.
    std::vector<std::vector<Vec4>> samples(opts.labelCount);
    for (const render::PartialTexture& p : partials)
        for (int t = 0; t < T; ++t)
            if (p.valid[t] && prior.labels[t] >= 0)
                samples[prior.labels[t]].push_back(hsvEmbed(texelColor(p.color, t)));
    for (int l = 0; l < opts.labelCount; ++l) {
        GMMOptions g = opts.gmm;
        g.seed = opts.gmm.seed + l;  // decorrelate per-label inits
        prior.gmms.push_back(fitGMM(samples[l], g));
    }
    return prior;
}

std::vector<double> faceDissimilarity(const render::TexelAtlas& atlas,
                                      const render::PartialTexture& reference,
                                      const render::PartialTexture& candidate,
                                      const std::vector<int>& labels,
                                      int faceLabel, int window) {
    const int T = atlas.texelCount();
    std::vector<double> out(T, 0.0);
    const int w = atlas.width;
    const int h = atlas.height;
    const int r = window / 2;
    const double C1 = 1e-4, C2 = 9e-4;

    const auto gray = [](const image::Image& img, int t) {
        return (img.data[3 * static_cast<size_t>(t)] +
                img.data[3 * static_cast<size_t>(t) + 1] +
                img.data[3 * static_cast<size_t>(t) + 2]) /
               3.0;
    };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int t = atlas.texelIndex(x, y);
            if (!atlas.valid(t) || labels[t] != faceLabel ||
                !reference.valid[t] || !candidate.valid[t])
                continue;
            double m1 = 0, m2 = 0, s1 = 0, s2 = 0, s12 = 0;
            int count = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= w || yy < 0 || yy >= h)
                        continue;
                    const int tt = atlas.texelIndex(xx, yy);
                    if (!atlas.valid(tt) || labels[tt] != faceLabel ||
                        !reference.valid[tt] || !candidate.valid[tt])
                        continue;
                    const double a = gray(reference.color, tt);
                    const double b = gray(candidate.color, tt);
                    m1 += a;
                    m2 += b;
                    s1 += a * a;
                    s2 += b * b;
                    s12 += a * b;
                    ++count;
                }
            if (count < 2)
                continue;
            m1 /= count;
            m2 /= count;
            const double v1 = std::max(s1 / count - m1 * m1, 0.0);
            const double v2 = std::max(s2 / count - m2 * m2, 0.0);
            const double cov = s12 / count - m1 * m2;
            const double ssim = (2 * m1 * m2 + C1) * (2 * cov + C2) /
                                ((m1 * m1 + m2 * m2 + C1) * (v1 + v2 + C2));
            out[t] = 1.0 - ssim;
        }
    return out;
}

double unaryMergeCost(int texel, const render::PartialTexture& partial,
                      const SemanticPrior& prior, double faceDissim,
                      double silhouetteError, const MergeConfig& config) {
    if (!partial.valid[texel])
        return std::numeric_limits<double>::infinity();
    const double sinA = std::sin(partial.angle.data[texel]);
    double cost = config.visWeight * sinA * sinA +
                  config.silhWeight * silhouetteError +
                  config.faceWeight * faceDissim;
    const int label = prior.labels[texel];
    if (label >= 0 && config.gmmWeight > 0)
        cost += config.gmmWeight *
                prior.gmms[label].mahalanobis(
                    hsvEmbed(texelColor(partial.color, texel)));
    return cost;
}

double etaApprox(const Vec3& currentT, const Vec3& currentQ,
                 const Vec3* candidateT, const Vec3* candidateQ,
                 bool sameSemantic) {
    if (!sameSemantic)
        return 0.0;
    double eta = 0.0;
    if (candidateQ)
        eta = std::max(eta, (currentT - *candidateQ).norm());
    if (candidateT)
        eta = std::max(eta, (currentQ - *candidateT).norm());
    return eta;
}

double mergeEnergy(const render::TexelAtlas& atlas,
                   const std::vector<render::PartialTexture>& partials,
                   const SemanticPrior& prior,
                   const std::vector<double>& silhouetteErrors,
                   const std::vector<int>& source, const MergeConfig& config) {
    const int T = atlas.texelCount();
    std::vector<std::vector<double>> faceD(partials.size());
    for (size_t k = 0; k < partials.size(); ++k)
        faceD[k] = k == 0 ? std::vector<double>(T, 0.0)
                          : faceDissimilarity(atlas, partials[0], partials[k],
                                              prior.labels, config.faceLabel,
                                              config.ssimWindow);
    double energy = 0;
    for (int t = 0; t < T; ++t) {
        if (source[t] < 0)
            continue;
        energy += unaryMergeCost(t, partials[source[t]], prior, faceD[source[t]][t],
                                 silhouetteErrors[source[t]], config);
    }
    for (int t = 0; t < T; ++t)
        for (int q : atlas.neighbors[t]) {
            if (t >= q || source[t] < 0 || source[q] < 0)
                continue;
            if (source[t] == source[q] || prior.labels[t] != prior.labels[q])
                continue;
            energy += (texelColor(partials[source[t]].color, t) -
                       texelColor(partials[source[q]].color, q))
                          .norm();
        }
    return energy;
}

MergeState mergeTextures(const render::TexelAtlas& atlas,
                         const std::vector<render::PartialTexture>& partials,
                         const SemanticPrior& prior,
                         const std::vector<double>& silhouetteErrors,
                         const MergeConfig& config) {
    if (partials.empty())
        throw Error("mergeTextures: no partial textures");
    if (silhouetteErrors.size() != partials.size())
        throw Error("mergeTextures: silhouette error count mismatch");
    const int T = atlas.texelCount();
    const int K = static_cast<int>(partials.size());

    MergeState state;
    state.color = image::Image(atlas.width, atlas.height, 3, 0.0f);
    state.source.assign(T, -1);
    for (int t = 0; t < T; ++t)
        if (partials[0].valid[t]) {
            state.source[t] = 0;
            setTexelColor(state.color, t, texelColor(partials[0].color, t));
        }

    // Precompute the per-texel unaries of every keyframe.
    std::vector<std::vector<double>> theta(K, std::vector<double>(T));
    for (int k = 0; k < K; ++k) {
        const std::vector<double> faceD =
            k == 0 ? std::vector<double>(T, 0.0)
                   : faceDissimilarity(atlas, partials[0], partials[k],
                                       prior.labels, config.faceLabel,
                                       config.ssimWindow);
        for (int t = 0; t < T; ++t) {
            const double c = unaryMergeCost(t, partials[k], prior, faceD[t],
                                            silhouetteErrors[k], config);
            theta[k][t] = std::min(c, kBigCost);
        }
    }

    std::vector<double> proposalWeight(K);
    for (int k = 0; k < K; ++k)
        proposalWeight[k] =
            1.0 / (config.proposalEpsilon + std::max(silhouetteErrors[k], 0.0));
    std::discrete_distribution<int> draw(proposalWeight.begin(),
                                         proposalWeight.end());
    std::mt19937_64 rng(config.seed);

    const int cap = config.proposalCap > 0 ? config.proposalCap : 3 * K;
    int idle = 0;
    while (state.proposals < cap && idle < K) {
        const int k = draw(rng);
        ++state.proposals;

        // Binary decision per texel: keep the current source or take k.
        std::vector<int> nodeOf(T, -1);
        std::vector<int> texelOf;
        for (int t = 0; t < T; ++t) {
            if (state.source[t] < 0 && !partials[k].valid[t])
                continue;
            if (!atlas.valid(t))
                continue;
            nodeOf[t] = static_cast<int>(texelOf.size());
            texelOf.push_back(t);
        }
        std::vector<std::array<double, 2>> unary(texelOf.size());
        for (size_t i = 0; i < texelOf.size(); ++i) {
            const int t = texelOf[i];
            unary[i][0] = state.source[t] >= 0 ? theta[state.source[t]][t] : kBigCost;
            unary[i][1] = theta[k][t];
        }
        std::vector<graph::BinaryPairCost> pairs;
        for (int t = 0; t < T; ++t) {
            if (nodeOf[t] < 0 || state.source[t] < 0)
                continue;
            for (int q : atlas.neighbors[t]) {
                if (t >= q || nodeOf[q] < 0 || state.source[q] < 0)
                    continue;
                const Vec3 mt = texelColor(state.color, t);
                const Vec3 mq = texelColor(state.color, q);
                Vec3 ut, uq;
                const bool hasT = partials[k].valid[t];
                const bool hasQ = partials[k].valid[q];
                if (hasT)
                    ut = texelColor(partials[k].color, t);
                if (hasQ)
                    uq = texelColor(partials[k].color, q);
                const double eta = etaApprox(
                    mt, mq, hasT ? &ut : nullptr, hasQ ? &uq : nullptr,
                    prior.labels[t] == prior.labels[q]);
                if (eta <= 0)
                    continue;
                graph::BinaryPairCost pc;
                pc.a = nodeOf[t];
                pc.b = nodeOf[q];
                pc.ku = pc.uk = eta;
                pairs.push_back(pc);
            }
        }
        const graph::BinaryLabelingResult cut = graph::binaryLabeling(unary, pairs);
        int switched = 0;
        for (size_t i = 0; i < texelOf.size(); ++i) {
            const int t = texelOf[i];
            if (cut.labels[i] != 1 || state.source[t] == k)
                continue;
            state.source[t] = k;
            setTexelColor(state.color, t, texelColor(partials[k].color, t));
            ++switched;
        }
        if (switched > 0) {
            ++state.accepted;
            idle = 0;
        } else {
            ++idle;
        }
    }
    return state;
}

image::Image crossBlend(const render::TexelAtlas& atlas,
                        const std::vector<render::PartialTexture>& partials,
                        const MergeState& state, int band) {
    image::Image out = state.color;
    const int T = atlas.texelCount();

    // Layered multi-source BFS from the source-label boundaries, carrying
    // the neighboring region's source along each texel's own region.
    std::vector<int> distance(T, -1);
    std::vector<int> other(T, -1);
    std::vector<int> frontier;
    for (int t = 0; t < T; ++t) {
        if (state.source[t] < 0)
            continue;
        for (int q : atlas.neighbors[t])
            if (state.source[q] >= 0 && state.source[q] != state.source[t]) {
                distance[t] = 1;
                other[t] = state.source[q];
                frontier.push_back(t);
                break;
            }
    }
    for (int d = 2; d <= band && !frontier.empty(); ++d) {
        std::vector<int> next;
        for (int f : frontier)
            for (int q : atlas.neighbors[f]) {
                if (distance[q] >= 0 || state.source[q] != state.source[f])
                    continue;
                distance[q] = d;
                other[q] = other[f];
                next.push_back(q);
            }
        frontier = std::move(next);
    }

    for (int t = 0; t < T; ++t) {
        if (distance[t] < 0 || other[t] < 0 || !partials[other[t]].valid[t])
            continue;
        const double wOwn = 0.5 + 0.5 * distance[t] / (band + 1.0);
        const Vec3 blended = wOwn * texelColor(state.color, t) +
                             (1.0 - wOwn) * texelColor(partials[other[t]].color, t);
        setTexelColor(out, t, blended);
    }
    return out;
}

void diffusionFill(const render::TexelAtlas& atlas, image::Image& color,
                   const std::vector<char>& seen, int passes) {
    const int T = atlas.texelCount();
    std::vector<char> has(seen.begin(), seen.end());
    for (int pass = 0; pass < passes; ++pass) {
        image::Image next = color;
        std::vector<char> nextHas = has;
        bool any = false;
        for (int t = 0; t < T; ++t) {
            if (!atlas.valid(t) || seen[t])
                continue;
            Vec3 sum = Vec3::Zero();
            int count = 0;
            for (int q : atlas.neighbors[t])
                if (has[q]) {
                    sum += texelColor(color, q);
                    ++count;
                }
            if (count == 0)
                continue;
            setTexelColor(next, t, sum / count);
            nextHas[t] = 1;
            any = true;
        }
        color = std::move(next);
        has = std::move(nextHas);
        if (!any && pass > 0)
            break;
    }
}

}  // namespace avatar::texture
