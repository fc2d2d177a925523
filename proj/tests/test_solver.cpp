#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avatar/solve/dogleg.h"

#include <random>

using namespace avatar;
using namespace avatar::solve;

namespace {

// r = A x - b on a single parameter block.
class LinearResidual : public ResidualBlockBase {
public:
    LinearResidual(int block, MatX A, VecX b)
        : ResidualBlockBase({block}), A_(std::move(A)), b_(std::move(b)) {}
    int residualSize() const override { return static_cast<int>(b_.size()); }
    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        residual = A_ * (*params[0]) - b_;
        if (jacobians)
            (*jacobians)[0] = A_;
    }

private:
    MatX A_;
    VecX b_;
};

// Classic two-residual Rosenbrock: r = (10(y - x^2), 1 - x).
class RosenbrockResidual : public ResidualBlockBase {
public:
    explicit RosenbrockResidual(int block) : ResidualBlockBase({block}) {}
    int residualSize() const override { return 2; }
    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        const double x = (*params[0])[0], y = (*params[0])[1];
        residual[0] = 10.0 * (y - x * x);
        residual[1] = 1.0 - x;
        if (jacobians) {
            (*jacobians)[0] << -20.0 * x, 10.0, -1.0, 0.0;
        }
    }
};

// Signed distance of a rigidly transformed 2D model point to a line
// (n . p - c). Parameters: (tx, ty, theta).
class Point2DToLine : public ResidualBlockBase {
public:
    Point2DToLine(int block, Vec2 modelPoint, Vec2 lineNormal, double lineOffset)
        : ResidualBlockBase({block}),
          p_(std::move(modelPoint)),
          n_(std::move(lineNormal)),
          c_(lineOffset) {}
    int residualSize() const override { return 1; }
    void evaluate(const std::vector<const VecX*>& params, VecX& residual,
                  std::vector<MatX>* jacobians) const override {
        const VecX& x = *params[0];
        const double ct = std::cos(x[2]), st = std::sin(x[2]);
        const Vec2 q(ct * p_.x() - st * p_.y() + x[0],
                     st * p_.x() + ct * p_.y() + x[1]);
        residual[0] = n_.dot(q) - c_;
        if (jacobians) {
            const Vec2 dq_dtheta(-st * p_.x() - ct * p_.y(),
                                 ct * p_.x() - st * p_.y());
            (*jacobians)[0] << n_.x(), n_.y(), n_.dot(dq_dtheta);
        }
    }

private:
    Vec2 p_, n_;
    double c_;
};

}  // namespace

TEST_CASE("linear least squares converges in a couple of iterations") {
    std::mt19937 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int m = 30, n = 6;
    MatX A(m, n);
    VecX b(m);
    for (int i = 0; i < m; ++i) {
        b[i] = gauss(rng);
        for (int j = 0; j < n; ++j)
            A(i, j) = gauss(rng);
    }

    Problem problem;
    const int block = problem.addParameterBlock("x", VecX::Zero(n));
    problem.addResidualBlock(std::make_unique<LinearResidual>(block, A, b), "lin");

    SolverOptions opts;
    opts.initialTrustRadius = 1e6;  // let the Gauss-Newton step through
    SolveReport report = minimize(problem, opts);

    const VecX oracle = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    CHECK(report.iterations <= 2);
    CHECK((problem.parameterBlock(block).values - oracle).norm() < 1e-8);
    CHECK(report.finalCost <= report.initialCost);
}

TEST_CASE("Rosenbrock smoke test") {
    Problem problem;
    VecX x0(2);
    x0 << -1.2, 1.0;
    const int block = problem.addParameterBlock("x", x0);
    problem.addResidualBlock(std::make_unique<RosenbrockResidual>(block), "rb");

    SolverOptions opts;
    opts.maxIterations = 200;
    opts.functionTolerance = 0.0;
    SolveReport report = minimize(problem, opts);
    CHECK(report.finalCost < 1e-10);
    CHECK(problem.parameterBlock(block).values[0] == doctest::Approx(1.0));

    // Accepted-step cost sequence must be monotone: final <= initial.
    CHECK(report.finalCost <= report.initialCost);
}

TEST_CASE("robust kernel suppresses a gross outlier") {
    std::mt19937 rng(9);
    std::normal_distribution<double> noise(0.0, 0.01);
    Problem clean, robust;
    const int bc = clean.addParameterBlock("x", VecX::Zero(1));
    const int br = robust.addParameterBlock("x", VecX::Zero(1));
    MatX A(1, 1);
    A << 1.0;
    for (int i = 0; i < 100; ++i) {
        VecX b(1);
        b << 0.5 + noise(rng);
        clean.addResidualBlock(std::make_unique<LinearResidual>(bc, A, b), "data");
        robust.addResidualBlock(std::make_unique<LinearResidual>(br, A, b), "data",
                                1.0, /*robustSigma=*/0.1);
    }
    VecX outlier(1);
    outlier << 100.0;
    robust.addResidualBlock(std::make_unique<LinearResidual>(br, A, outlier), "data",
                            1.0, 0.1);

    SolverOptions opts;
    opts.maxIterations = 200;
    minimize(clean, opts);
    minimize(robust, opts);
    CHECK(std::abs(robust.parameterBlock(br).values[0] -
                   clean.parameterBlock(bc).values[0]) < 1e-3);
}

TEST_CASE("reported robust cost equals sum of rho") {
    Problem problem;
    const int block = problem.addParameterBlock("x", VecX::Zero(1));
    MatX A(1, 1);
    A << 1.0;
    VecX b(1);
    b << 2.0;
    problem.addResidualBlock(std::make_unique<LinearResidual>(block, A, b), "t",
                             1.0, 0.5);
    // rho(|0-2|^2) = 4 / (0.25 + 4)
    CHECK(evaluateCost(problem) == doctest::Approx(4.0 / 4.25));
}

TEST_CASE("non-finite residual aborts with the offending term named") {
    Problem problem;
    const int block = problem.addParameterBlock("x", VecX::Zero(1));
    MatX A(1, 1);
    A << 1.0;
    VecX b(1);
    b << std::numeric_limits<double>::quiet_NaN();
    problem.addResidualBlock(std::make_unique<LinearResidual>(block, A, b), "badterm");
    try {
        minimize(problem);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("badterm") != std::string::npos);
    }
}

TEST_CASE("alternate with no-op associate equals one long minimize") {
    auto build = [](Problem& p) {
        VecX x0(2);
        x0 << -1.2, 1.0;
        const int block = p.addParameterBlock("x", x0);
        p.addResidualBlock(std::make_unique<RosenbrockResidual>(block), "rb");
        return block;
    };

    Problem alt, single;
    const int ba = build(alt);
    const int bs = build(single);

    AlternationOptions aopts;
    aopts.rounds = 3;
    aopts.solver.maxIterations = 60;
    aopts.solver.functionTolerance = 0.0;
    alternate(alt, nullptr, aopts);

    SolverOptions sopts = aopts.solver;
    sopts.maxIterations = 180;
    minimize(single, sopts);

    CHECK((alt.parameterBlock(ba).values - single.parameterBlock(bs).values)
              .norm() < 1e-9);
}

TEST_CASE("alternation schedule halves scheduled term weights each round") {
    Problem problem;
    const int block = problem.addParameterBlock("x", VecX::Zero(1));
    MatX A(1, 1);
    A << 1.0;
    VecX b(1);
    b << 1.0;
    problem.addResidualBlock(std::make_unique<LinearResidual>(block, A, b), "reg",
                             4.0);

    AlternationOptions opts;
    opts.rounds = 3;
    opts.scheduledTerms = {"reg"};
    opts.scheduleFactor = 0.5;
    opts.solver.maxIterations = 5;
    alternate(problem, nullptr, opts);
    CHECK(problem.termWeight("reg") == doctest::Approx(0.5));
}

TEST_CASE("ICP-style 2D point-to-line fit with re-association") {
    // Ground-truth rigid transform applied to a square outline; the
    // residuals measure distance to the nearest transformed edge line,
    // re-associated every round.
    const double gtTheta = 0.4, gtTx = 0.3, gtTy = -0.2;
    const double ct = std::cos(gtTheta), st = std::sin(gtTheta);
    auto applyGT = [&](const Vec2& p) {
        return Vec2(ct * p.x() - st * p.y() + gtTx, st * p.x() + ct * p.y() + gtTy);
    };

    // Square edge lines in ground-truth pose: n . q = c.
    struct Line { Vec2 n; double c; };
    std::vector<Line> lines;
    const std::vector<Vec2> normals = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
    const std::vector<Vec2> anchors = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    for (int i = 0; i < 4; ++i) {
        const Vec2 n(ct * normals[i].x() - st * normals[i].y(),
                     st * normals[i].x() + ct * normals[i].y());
        lines.push_back({n, n.dot(applyGT(anchors[i]))});
    }

    // Sample model points along the unit square outline.
    std::vector<Vec2> points;
    for (int i = 0; i < 10; ++i) {
        const double s = i / 10.0;
        points.emplace_back(s, 0.0);
        points.emplace_back(1.0, s);
        points.emplace_back(1.0 - s, 1.0);
        points.emplace_back(0.0, 1.0 - s);
    }

    Problem problem;
    const int block = problem.addParameterBlock("pose", VecX::Zero(3));

    auto associate = [&](Problem& p, int) {
        p.clearTerm("icp");
        const VecX& x = p.parameterBlock(block).values;
        const double c = std::cos(x[2]), s = std::sin(x[2]);
        for (const Vec2& mp : points) {
            const Vec2 q(c * mp.x() - s * mp.y() + x[0],
                         s * mp.x() + c * mp.y() + x[1]);
            int best = 0;
            double bestDist = std::numeric_limits<double>::max();
            for (int li = 0; li < 4; ++li) {
                const double d = std::abs(lines[li].n.dot(q) - lines[li].c);
                if (d < bestDist) {
                    bestDist = d;
                    best = li;
                }
            }
            p.addResidualBlock(
                std::make_unique<Point2DToLine>(block, mp, lines[best].n,
                                                lines[best].c),
                "icp");
        }
    };

    AlternationOptions opts;
    opts.rounds = 8;
    opts.solver.maxIterations = 30;
    SolveReport report = alternate(problem, associate, opts);

    const VecX& sol = problem.parameterBlock(block).values;
    CHECK(std::abs(sol[0] - gtTx) < 1e-4);
    CHECK(std::abs(sol[1] - gtTy) < 1e-4);
    CHECK(std::abs(sol[2] - gtTheta) < 1e-4);
    CHECK(report.finalCost < 1e-10);
}

TEST_CASE("finite-difference check accepts analytic Jacobians") {
    Problem problem;
    VecX x0(2);
    x0 << 0.3, -0.7;
    const int block = problem.addParameterBlock("x", x0);
    problem.addResidualBlock(std::make_unique<RosenbrockResidual>(block), "rb");
    problem.addResidualBlock(
        std::make_unique<Point2DToLine>(
            problem.addParameterBlock("pose", VecX::Ones(3)), Vec2(0.2, 0.4),
            Vec2(0.6, 0.8), 0.3),
        "line");
    CHECK(checkJacobians(problem) < 1e-5);
}
