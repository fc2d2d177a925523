#include "avatar/shading/shading.h"

#include "avatar/core/laplacian.h"
#include "avatar/solve/dogleg.h"

#include <Eigen/Dense>

#include <cmath>
#include <iostream>

namespace avatar::shading {

SHFitResult fitSH(const std::vector<ShadingSample>& samples, int irlsRounds,
                  double smoothing) {
    const int n = static_cast<int>(samples.size());
    if (n < 200)
        throw Error("fitSH: need at least 200 samples, got " + std::to_string(n));

    MatX B(n, 9);
    VecX I(n);
    for (int i = 0; i < n; ++i) {
        B.row(i) = core::shBasis(samples[i].normal.normalized()).transpose();
        I[i] = samples[i].intensity;
    }

    SHFitResult result;
    // A degenerate normal distribution (e.g. all samples alike) leaves the
    // normal equations consistent but singular; detect it on the basis
    // matrix itself and damp every solve.
    Eigen::ColPivHouseholderQR<MatX> qr(B);
    qr.setThreshold(1e-9);
    result.rankDeficient = qr.rank() < 9;
    if (result.rankDeficient)
        std::cerr << "fitSH: rank-deficient system, damped solve\n";

    VecX L = VecX::Zero(9);
    VecX w = VecX::Ones(n);
    for (int round = 0; round < irlsRounds; ++round) {
        MatX H = B.transpose() * w.asDiagonal() * B;
        const VecX rhs = B.transpose() * (w.asDiagonal() * I);
        if (result.rankDeficient)
            H.diagonal().array() += 1e-8 * (H.trace() / 9.0 + 1.0);
        L = H.ldlt().solve(rhs);
        const VecX r = B * L - I;
        for (int i = 0; i < n; ++i)
            w[i] = 1.0 / std::max(std::abs(r[i]), smoothing);
    }

    result.coefficients = L;
    result.l1Residual = (B * L - I).cwiseAbs().mean();
    return result;
}

namespace {

// Unit normal from a 2-DOF tangent-plane offset around a prior direction.
struct TangentFrame {
    Vec3 prior, t1, t2;

    static TangentFrame around(const Vec3& n) {
        TangentFrame f;
        f.prior = n.normalized();
        const Vec3 axis =
            std::abs(f.prior.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        f.t1 = f.prior.cross(axis).normalized();
        f.t2 = f.prior.cross(f.t1);
        return f;
    }

    Vec3 normal(double a, double b) const {
        return (prior + a * t1 + b * t2).normalized();
    }

    // d normal / d (a, b), 3x2.
    Eigen::Matrix<double, 3, 2> jacobian(double a, double b) const {
        const Vec3 u = prior + a * t1 + b * t2;
        const double len = u.norm();
        const Vec3 n = u / len;
        const Mat3 proj = (Mat3::Identity() - n * n.transpose()) / len;
        Eigen::Matrix<double, 3, 2> J;
        J.col(0) = proj * t1;
        J.col(1) = proj * t2;
        return J;
    }
};

// Shading-gradient residual on one mesh edge:
// (H(n_i) - H(n_j)) - (I(p_i) - I(p_j)).
class EdgeGradientResidual : public solve::ResidualBlockBase {
  public:
    EdgeGradientResidual(std::vector<int> blocks, TangentFrame fi,
                         TangentFrame fj, const core::SHCoefficients& light,
                         double imageDelta)
        : ResidualBlockBase(std::move(blocks)), fi_(fi), fj_(fj), light_(light),
          imageDelta_(imageDelta) {}

    int residualSize() const override { return 1; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        const VecX& pi = *params[0];
        const VecX& pj = *params[1];
        const Vec3 ni = fi_.normal(pi[0], pi[1]);
        const Vec3 nj = fj_.normal(pj[0], pj[1]);
        residual[0] =
            core::shShade(ni, light_) - core::shShade(nj, light_) - imageDelta_;
        if (jacobians) {
            (*jacobians)[0] = core::shShadeGradient(ni, light_).transpose() *
                              fi_.jacobian(pi[0], pi[1]);
            (*jacobians)[1] = -core::shShadeGradient(nj, light_).transpose() *
                              fj_.jacobian(pj[0], pj[1]);
        }
    }

  private:
    TangentFrame fi_, fj_;
    core::SHCoefficients light_;
    double imageDelta_;
};

// Laplacian smoothness of the normal field around one vertex:
// sum_j w_ij (n_i - n_j); invisible neighbors contribute their fixed prior.
class NormalLaplacianResidual : public solve::ResidualBlockBase {
  public:
    NormalLaplacianResidual(std::vector<int> blocks,
                            std::vector<TangentFrame> frames,
                            std::vector<double> weights, Vec3 fixedPart,
                            double centerWeight)
        : ResidualBlockBase(std::move(blocks)), frames_(std::move(frames)),
          weights_(std::move(weights)), fixedPart_(std::move(fixedPart)),
          centerWeight_(centerWeight) {}

    int residualSize() const override { return 3; }

    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        // Block 0 is the center vertex, the rest are visible neighbors.
        Vec3 r = fixedPart_;
        const VecX& pc = *params[0];
        r += centerWeight_ * frames_[0].normal(pc[0], pc[1]);
        for (size_t k = 1; k < frames_.size(); ++k) {
            const VecX& p = *params[k];
            r -= weights_[k] * frames_[k].normal(p[0], p[1]);
        }
        residual = r;
        if (jacobians) {
            (*jacobians)[0] = centerWeight_ * frames_[0].jacobian(pc[0], pc[1]);
            for (size_t k = 1; k < frames_.size(); ++k) {
                const VecX& p = *params[k];
                (*jacobians)[k] = -weights_[k] * frames_[k].jacobian(p[0], p[1]);
            }
        }
    }

  private:
    std::vector<TangentFrame> frames_;
    std::vector<double> weights_;  // aligned with frames_, entry 0 unused
    Vec3 fixedPart_;
    double centerWeight_;
};

}  // namespace

AuxiliaryNormalField estimateNormals(const core::TriMesh& posed,
                                     const render::PinholeCamera& cam,
                                     const image::Image& shadingImage,
                                     const core::SHCoefficients& light,
                                     const std::vector<char>& visible,
                                     const NormalEstimationOptions& opts) {
    const int n = posed.vertexCount();
    const std::vector<Vec3> priors = core::vertexNormals(posed, true);

    AuxiliaryNormalField field;
    field.normals = priors;
    field.mask.assign(n, 0);

    std::vector<int> blockOf(n, -1);
    std::vector<TangentFrame> frames(n);
    solve::Problem problem;
    for (int i = 0; i < n; ++i) {
        if (!visible[i])
            continue;
        frames[i] = TangentFrame::around(priors[i]);
        blockOf[i] =
            problem.addParameterBlock("n" + std::to_string(i), VecX::Zero(2));
        field.mask[i] = 1;
    }
    if (problem.parameterBlockCount() == 0)
        return field;

    // Image shading at each visible vertex projection.
    std::vector<double> intensity(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (!visible[i])
            continue;
        const Vec2 px = cam.project(posed.vertices[i]);
        intensity[i] = shadingImage.bilinear(px.x(), px.y());
    }

    for (const core::MeshEdge& e : core::collectEdges(posed)) {
        if (!visible[e.a] || !visible[e.b])
            continue;
        problem.addResidualBlock(
            std::make_unique<EdgeGradientResidual>(
                std::vector<int>{blockOf[e.a], blockOf[e.b]}, frames[e.a],
                frames[e.b], light, intensity[e.a] - intensity[e.b]),
            "grad");
    }

    const core::CotanLaplacian lap = core::cotanLaplacian(posed);
    for (int i = 0; i < n; ++i) {
        if (!visible[i])
            continue;
        std::vector<int> blocks = {blockOf[i]};
        std::vector<TangentFrame> rowFrames = {frames[i]};
        std::vector<double> weights = {0.0};
        Vec3 fixedPart = Vec3::Zero();
        double centerWeight = 0.0;
        for (SparseMat::InnerIterator it(lap.matrix, i); it; ++it) {
            const int j = static_cast<int>(it.row());
            if (j == i) {
                centerWeight = it.value();
                continue;
            }
            const double w = -it.value();  // off-diagonals carry -w_ij
            if (visible[j]) {
                blocks.push_back(blockOf[j]);
                rowFrames.push_back(frames[j]);
                weights.push_back(w);
            } else {
                fixedPart -= w * priors[j];
            }
        }
        problem.addResidualBlock(
            std::make_unique<NormalLaplacianResidual>(
                std::move(blocks), std::move(rowFrames), std::move(weights),
                fixedPart, centerWeight),
            "lapn", opts.smoothnessWeight);
    }

    solve::SolverOptions sopts;
    sopts.maxIterations = opts.maxIterations;
    solve::minimize(problem, sopts);

    for (int i = 0; i < n; ++i)
        if (visible[i]) {
            const VecX& p = problem.parameterBlock(blockOf[i]).values;
            field.normals[i] = frames[i].normal(p[0], p[1]);
        }
    return field;
}

}  // namespace avatar::shading
