#include "avatar/body/capsule_rig.h"

#include <cmath>
#include <numbers>

namespace avatar::body {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Person-ish radius profile over normalized height t in [0,1].
double profileRadius(double t) {
    static const std::vector<std::pair<double, double>> knots = {
        {0.00, 0.030}, {0.05, 0.090}, {0.30, 0.080}, {0.50, 0.120},
        {0.55, 0.160}, {0.62, 0.150}, {0.78, 0.170}, {0.83, 0.065},
        {0.86, 0.075}, {0.94, 0.095}, {1.00, 0.030}};
    if (t <= knots.front().first) return knots.front().second;
    for (size_t k = 1; k < knots.size(); ++k) {
        if (t <= knots[k].first) {
            const double a = (t - knots[k - 1].first) /
                             (knots[k].first - knots[k - 1].first);
            return (1 - a) * knots[k - 1].second + a * knots[k].second;
        }
    }
    return knots.back().second;
}

// Hat-function weights over a sorted node list; partition of unity.
std::vector<double> hatWeights(const std::vector<double>& nodes, double y) {
    std::vector<double> w(nodes.size(), 0.0);
    if (y <= nodes.front()) {
        w.front() = 1.0;
        return w;
    }
    if (y >= nodes.back()) {
        w.back() = 1.0;
        return w;
    }
    for (size_t k = 1; k < nodes.size(); ++k) {
        if (y <= nodes[k]) {
            const double a = (y - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
            w[k - 1] = 1.0 - a;
            w[k] = a;
            return w;
        }
    }
    return w;
}

}  // namespace

CapsuleRig makeCapsuleRig(const CapsuleRigOptions& opts) {
    const int S = opts.segments;
    const int R = opts.rings;
    const double h = opts.height;
    if (S < 8 || R < 8 || S % 2 != 0)
        throw Error("makeCapsuleRig: need segments >= 8 (even) and rings >= 8");

    CapsuleRig out;
    RiggedTemplate& rig = out.rig;

    // Ring vertices, then the two poles.
    std::vector<double> ringY(R);
    for (int i = 0; i < R; ++i)
        ringY[i] = h * (i + 1.0) / (R + 1.0);
    for (int i = 0; i < R; ++i) {
        const double r = profileRadius(ringY[i] / h);
        for (int s = 0; s < S; ++s) {
            const double phi = kTau * s / S;
            rig.restVertices.emplace_back(r * std::cos(phi), ringY[i],
                                          r * std::sin(phi));
        }
    }
    const int bottomPole = R * S;
    const int topPole = R * S + 1;
    rig.restVertices.emplace_back(0.0, 0.0, 0.0);
    rig.restVertices.emplace_back(0.0, h, 0.0);
    const int n = rig.vertexCount();

    auto ringVertex = [S](int ring, int seg) { return ring * S + seg % S; };
    auto uvOf = [&](int ring, int seg, bool wrap) {
        return Vec2(wrap && seg % S == 0 ? 1.0 : double(seg % S) / S,
                    ringY[ring] / h);
    };

    // Side quads.
    for (int i = 0; i + 1 < R; ++i) {
        for (int s = 0; s < S; ++s) {
            const int a = ringVertex(i, s), b = ringVertex(i, s + 1);
            const int c = ringVertex(i + 1, s + 1), d = ringVertex(i + 1, s);
            const bool wrap = (s + 1) % S == 0;
            rig.faces.push_back({a, d, c});
            rig.cornerUVs.push_back({uvOf(i, s, false), uvOf(i + 1, s, false),
                                     uvOf(i + 1, s + 1, wrap)});
            rig.faces.push_back({a, c, b});
            rig.cornerUVs.push_back({uvOf(i, s, false), uvOf(i + 1, s + 1, wrap),
                                     uvOf(i, s + 1, wrap)});
        }
    }
    // Caps.
    for (int s = 0; s < S; ++s) {
        const bool wrap = (s + 1) % S == 0;
        rig.faces.push_back({bottomPole, ringVertex(0, s + 1), ringVertex(0, s)});
        rig.cornerUVs.push_back({Vec2((s + 0.5) / S, 0.0), uvOf(0, s + 1, wrap),
                                 uvOf(0, s, false)});
        rig.faces.push_back({topPole, ringVertex(R - 1, s), ringVertex(R - 1, s + 1)});
        rig.cornerUVs.push_back({Vec2((s + 0.5) / S, 1.0), uvOf(R - 1, s, false),
                                 uvOf(R - 1, s + 1, wrap)});
    }

    // 16 joints: pelvis, chest, neck, head, then leg and arm chains.
    enum Joint {
        Pelvis = 0, Chest, Neck, Head,
        LHip, LKnee, LAnkle, RHip, RKnee, RAnkle,
        LShoulder, LElbow, LWrist, RShoulder, RElbow, RWrist,
    };
    rig.parents = {-1, Pelvis, Chest, Neck,
                   Pelvis, LHip, LKnee, Pelvis, RHip, RKnee,
                   Chest, LShoulder, LElbow, Chest, RShoulder, RElbow};
    const int J = 16;

    // Heights the regressor targets (fractions of body height).
    const std::vector<std::pair<int, double>> jointHeights = {
        {Pelvis, 0.52}, {Chest, 0.70}, {Neck, 0.82}, {Head, 0.90},
        {LHip, 0.50},   {LKnee, 0.28}, {LAnkle, 0.06},
        {RHip, 0.50},   {RKnee, 0.28}, {RAnkle, 0.06},
        {LShoulder, 0.78}, {LElbow, 0.65}, {LWrist, 0.55},
        {RShoulder, 0.78}, {RElbow, 0.65}, {RWrist, 0.55}};
    auto sideOf = [](int q) {
        switch (q) {
            case LHip: case LKnee: case LAnkle:
            case LShoulder: case LElbow: case LWrist:
                return +1;
            case RHip: case RKnee: case RAnkle:
            case RShoulder: case RElbow: case RWrist:
                return -1;
            default:
                return 0;
        }
    };

    std::vector<Triplet> regTriplets;
    for (const auto& [q, frac] : jointHeights) {
        // Nearest ring in height.
        int best = 0;
        for (int i = 1; i < R; ++i)
            if (std::abs(ringY[i] - frac * h) < std::abs(ringY[best] - frac * h))
                best = i;
        const int side = sideOf(q);
        double total = 0.0;
        std::vector<double> w(S);
        for (int s = 0; s < S; ++s) {
            const double c = std::cos(kTau * s / S);
            w[s] = side == 0 ? 1.0 : std::max(0.0, 1.0 + side * c);
            total += w[s];
        }
        for (int s = 0; s < S; ++s)
            if (w[s] > 0)
                regTriplets.emplace_back(q, ringVertex(best, s), w[s] / total);
    }
    rig.jointRegressor.resize(J, n);
    rig.jointRegressor.setFromTriplets(regTriplets.begin(), regTriplets.end());

    // Skinning: vertical hat bands, with a smooth left/right azimuth split
    // in the leg region. The arm chain carries no geometry.
    const std::vector<double> nodes = {0.06 * h, 0.28 * h, 0.50 * h,
                                       0.70 * h, 0.82 * h, 0.90 * h};
    std::vector<Triplet> weightTriplets;
    for (int i = 0; i < n; ++i) {
        const Vec3& v = rig.restVertices[i];
        const double phi = std::atan2(v.z(), v.x());
        const double left = 0.5 * (1.0 + std::cos(phi));
        const std::vector<double> band = hatWeights(nodes, v.y());
        // Node -> joint mapping: ankle, knee split by side; the rest on the
        // spine chain.
        auto add = [&](int joint, double w) {
            if (w > 1e-12)
                weightTriplets.emplace_back(i, joint, w);
        };
        add(LAnkle, band[0] * left);
        add(RAnkle, band[0] * (1.0 - left));
        add(LKnee, band[1] * left);
        add(RKnee, band[1] * (1.0 - left));
        add(Pelvis, band[2]);
        add(Chest, band[3]);
        add(Neck, band[4]);
        add(Head, band[5]);
    }
    rig.skinWeights.resize(n, J);
    rig.skinWeights.setFromTriplets(weightTriplets.begin(), weightTriplets.end());

    // Shape basis: mode 0 = radial girth, mode 1 = height scaling.
    rig.shapeBasis = MatX::Zero(3 * n, 2);
    for (int i = 0; i < n; ++i) {
        const Vec3& v = rig.restVertices[i];
        Vec3 radial(v.x(), 0.0, v.z());
        if (radial.norm() > 1e-9)
            radial.normalize();
        rig.shapeBasis.block<3, 1>(3 * i, 0) = radial;
        rig.shapeBasis(3 * i + 1, 1) = (v.y() - 0.52 * h) / h;
    }

    // Semantic part per face.
    out.faceLabels.resize(rig.faces.size());
    for (size_t f = 0; f < rig.faces.size(); ++f) {
        const auto& tri = rig.faces[f];
        const Vec3 c = (rig.restVertices[tri[0]] + rig.restVertices[tri[1]] +
                        rig.restVertices[tri[2]]) / 3.0;
        const double t = c.y() / h;
        const bool leftSide = c.x() > 0.0;
        BodyPart part;
        if (t > 0.955)
            part = BodyPart::Hair;
        else if (t > 0.84)
            part = c.z() > 0.0 ? BodyPart::Face : BodyPart::Hair;
        else if (t > 0.52) {
            const double r = std::hypot(c.x(), c.z());
            const double az = r > 1e-9 ? std::abs(c.x()) / r : 0.0;
            if (az > 0.92 && t < 0.80)
                part = leftSide ? BodyPart::LeftArm : BodyPart::RightArm;
            else
                part = BodyPart::UpperClothes;
        } else if (t > 0.30)
            part = BodyPart::Pants;
        else if (t > 0.06)
            part = leftSide ? BodyPart::LeftLeg : BodyPart::RightLeg;
        else
            part = leftSide ? BodyPart::LeftShoe : BodyPart::RightShoe;
        out.faceLabels[f] = static_cast<int>(part);
    }

    // Landmark anchors spread over the facial region (front of the head).
    for (size_t f = 0; f < rig.faces.size() && out.faceLandmarks.size() < 8; ++f) {
        if (out.faceLabels[f] != static_cast<int>(BodyPart::Face))
            continue;
        if (f % 3 != 0)
            continue;
        core::SurfaceAnchor anchor;
        anchor.face = static_cast<int>(f);
        anchor.barycentric = Vec3(1, 1, 1) / 3.0;
        out.faceLandmarks.push_back(anchor);
    }

    // Left-right mirror partner (sagittal plane x = 0): phi -> pi - phi.
    out.mirrorVertex.resize(n);
    for (int i = 0; i < R; ++i)
        for (int s = 0; s < S; ++s) {
            const int sm = ((S / 2 - s) % S + S) % S;
            out.mirrorVertex[ringVertex(i, s)] = ringVertex(i, sm);
        }
    out.mirrorVertex[bottomPole] = bottomPole;
    out.mirrorVertex[topPole] = topPole;

    rig.validate();
    return out;
}

}  // namespace avatar::body
