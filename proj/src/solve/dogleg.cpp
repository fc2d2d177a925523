#include "avatar/solve/dogleg.h"

#include "avatar/core/robust.h"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace avatar::solve {

namespace {

struct Workspace {
    std::vector<const VecX*> params;
    VecX residual;
    std::vector<MatX> jacobians;
};

void gatherParams(const Problem& problem, const ResidualBlock& block,
                  Workspace& ws) {
    const auto& ids = block.parameterBlocks();
    ws.params.resize(ids.size());
    for (size_t i = 0; i < ids.size(); ++i)
        ws.params[i] = &problem.parameterBlock(ids[i]).values;
}

struct Evaluation {
    double cost = 0.0;
    std::map<std::string, double> termCosts;
    VecX gh;        // J~^T r~ (half the gradient)
    SparseMat JtJ;
};

// Scaled residual/Jacobian so that cost = sum |r~|^2 up to the robust
// correction; robust blocks use the IRLS scale sqrt(w * rho').
double blockScale(const ResidualEntry& e, double squaredNorm, double* robustCost) {
    if (e.robustSigma > 0.0) {
        *robustCost = e.weight * core::gemanMcClure(squaredNorm, e.robustSigma);
        return std::sqrt(e.weight *
                         core::gemanMcClureWeight(squaredNorm, e.robustSigma));
    }
    *robustCost = e.weight * squaredNorm;
    return std::sqrt(e.weight);
}

Evaluation evaluate(const Problem& problem, bool withDerivatives) {
    Evaluation ev;
    const int n = problem.totalParameterSize();
    if (withDerivatives)
        ev.gh = VecX::Zero(n);
    std::vector<Triplet> triplets;
    Workspace ws;

    for (const ResidualEntry& e : problem.residuals()) {
        const ResidualBlock& block = *e.block;
        const auto& ids = block.parameterBlocks();
        gatherParams(problem, block, ws);
        ws.residual.resize(block.residualSize());
        std::vector<MatX>* jac = nullptr;
        if (withDerivatives) {
            ws.jacobians.resize(ids.size());
            for (size_t i = 0; i < ids.size(); ++i)
                ws.jacobians[i].setZero(block.residualSize(),
                                        problem.parameterBlock(ids[i]).values.size());
            jac = &ws.jacobians;
        }
        block.evaluate(ws.params, ws.residual, jac);
        if (!ws.residual.allFinite())
            throw Error("minimize: non-finite residual in term '" + e.term + "'");

        double contribution = 0.0;
        const double scale = blockScale(e, ws.residual.squaredNorm(), &contribution);
        ev.cost += contribution;
        ev.termCosts[e.term] += contribution;

        if (!withDerivatives)
            continue;

        const VecX rs = scale * ws.residual;
        for (size_t i = 0; i < ids.size(); ++i) {
            if (!ws.jacobians[i].allFinite())
                throw Error("minimize: non-finite Jacobian in term '" + e.term + "'");
            const int off = problem.parameterBlock(ids[i]).columnOffset;
            const MatX Js = scale * ws.jacobians[i];
            ev.gh.segment(off, Js.cols()) += Js.transpose() * rs;
            // Accumulate J^T J block-wise (upper pattern folded in full).
            for (size_t j = 0; j < ids.size(); ++j) {
                const int off2 = problem.parameterBlock(ids[j]).columnOffset;
                const MatX Hij = Js.transpose() * (scale * ws.jacobians[j]);
                for (int c = 0; c < Hij.cols(); ++c)
                    for (int r = 0; r < Hij.rows(); ++r)
                        if (Hij(r, c) != 0.0)
                            triplets.emplace_back(off + r, off2 + c, Hij(r, c));
            }
        }
    }

    if (withDerivatives) {
        ev.JtJ.resize(n, n);
        ev.JtJ.setFromTriplets(triplets.begin(), triplets.end());
    }
    return ev;
}

VecX projectToBounds(const Problem& problem, const VecX& x) {
    VecX out = x;
    for (int b = 0; b < problem.parameterBlockCount(); ++b) {
        const ParameterBlock& pb = problem.parameterBlock(b);
        if (pb.lower.size() == 0)
            continue;
        auto seg = out.segment(pb.columnOffset, pb.values.size());
        seg = seg.cwiseMax(pb.lower).cwiseMin(pb.upper);
    }
    return out;
}

}  // namespace

double evaluateCost(const Problem& problem,
                    std::map<std::string, double>* termCosts) {
    Evaluation ev = evaluate(problem, false);
    if (termCosts)
        *termCosts = ev.termCosts;
    return ev.cost;
}

SolveReport minimize(Problem& problem, const SolverOptions& opts) {
    SolveReport report;
    const int n = problem.totalParameterSize();
    VecX x = problem.packParameters();

    Evaluation ev = evaluate(problem, true);
    report.initialCost = ev.cost;
    double cost = ev.cost;
    double radius = opts.initialTrustRadius;

    Eigen::SimplicialLDLT<SparseMat> ldlt;
    SparseMat damping(n, n);
    damping.setIdentity();

    report.termination = "max_iterations";
    int iter = 0;
    for (; iter < opts.maxIterations; ++iter) {
        report.trustRadiusTrace.push_back(radius);
        const VecX& gh = ev.gh;
        if (2.0 * gh.cwiseAbs().maxCoeff() < opts.gradientTolerance) {
            report.termination = "gradient_tolerance";
            break;
        }

        const SparseMat H = ev.JtJ + opts.normalEquationDamping * damping;
        ldlt.compute(H);
        VecX hGN;
        bool haveGN = ldlt.info() == Eigen::Success;
        if (haveGN) {
            hGN = ldlt.solve(-gh);
            haveGN = hGN.allFinite();
        }

        const double gSq = gh.squaredNorm();
        const double gHg = gh.dot(ev.JtJ * gh);
        const VecX hSD = (gHg > 1e-300) ? VecX(-(gSq / gHg) * gh)
                                        : VecX(-gh);

        // Dogleg step within the current radius.
        VecX h;
        if (haveGN && hGN.norm() <= radius) {
            h = hGN;
        } else if (!haveGN || hSD.norm() >= radius) {
            h = (radius / hSD.norm()) * hSD;
        } else {
            const VecX d = hGN - hSD;
            const double a = d.squaredNorm();
            const double b = 2.0 * hSD.dot(d);
            const double c = hSD.squaredNorm() - radius * radius;
            const double tau = (-b + std::sqrt(std::max(0.0, b * b - 4 * a * c))) / (2 * a);
            h = hSD + tau * d;
        }

        const double predicted = -(2.0 * gh.dot(h) + h.dot(ev.JtJ * h));
        VecX xNew = projectToBounds(problem, x + h);
        problem.unpackParameters(xNew);
        double newCost;
        try {
            newCost = evaluateCost(problem);
        } catch (const Error&) {
            problem.unpackParameters(x);
            radius *= 0.25;
            if (radius < opts.minTrustRadius) {
                report.termination = "trust_region_collapse";
                break;
            }
            continue;
        }

        const double actual = cost - newCost;
        const double gain = predicted > 0 ? actual / predicted : -1.0;

        if (gain > 0.05 && actual > 0) {
            x = xNew;
            const double relChange = actual / std::max(cost, 1e-300);
            cost = newCost;
            ev = evaluate(problem, true);
            if (gain > 0.75)
                radius = std::max(radius, 2.0 * h.norm());
            else if (gain < 0.25)
                radius *= 0.5;
            if (relChange < opts.functionTolerance) {
                report.termination = "function_tolerance";
                ++iter;
                break;
            }
        } else {
            problem.unpackParameters(x);
            radius *= 0.25;
            if (radius < opts.minTrustRadius) {
                report.termination = "trust_region_collapse";
                break;
            }
        }
    }

    problem.unpackParameters(x);
    report.iterations = iter;
    report.finalCost = cost;
    report.termCosts = evaluate(problem, false).termCosts;
    report.success = cost <= report.initialCost + 1e-15;
    if (!report.trustRadiusTrace.empty())
        report.trustRadiusTrace.push_back(radius);
    return report;
}

SolveReport alternate(Problem& problem,
                      const std::function<void(Problem&, int round)>& associate,
                      const AlternationOptions& opts) {
    SolveReport last;
    SolverOptions solverOpts = opts.solver;
    bool first = true;
    for (int round = 0; round < opts.rounds; ++round) {
        if (associate)
            associate(problem, round);
        for (const std::string& term : opts.scheduledTerms)
            problem.scaleTermWeight(term, opts.scheduleFactor);
        SolveReport r = minimize(problem, solverOpts);
        if (first) {
            last.initialCost = r.initialCost;
            first = false;
        }
        if (!r.trustRadiusTrace.empty())
            solverOpts.initialTrustRadius = r.trustRadiusTrace.back();
        last.iterations += r.iterations;
        last.finalCost = r.finalCost;
        last.termCosts = r.termCosts;
        last.termination = r.termination;
        last.success = r.success;
        for (double t : r.trustRadiusTrace)
            last.trustRadiusTrace.push_back(t);
    }
    return last;
}

double checkJacobians(Problem& problem, double step) {
    double worst = 0.0;
    Workspace ws;
    for (const ResidualEntry& e : problem.residuals()) {
        const ResidualBlock& block = *e.block;
        const auto& ids = block.parameterBlocks();
        gatherParams(problem, block, ws);
        const int m = block.residualSize();
        ws.residual.resize(m);
        ws.jacobians.resize(ids.size());
        for (size_t i = 0; i < ids.size(); ++i)
            ws.jacobians[i].setZero(m, problem.parameterBlock(ids[i]).values.size());
        block.evaluate(ws.params, ws.residual, &ws.jacobians);

        for (size_t i = 0; i < ids.size(); ++i) {
            VecX& values = problem.parameterBlock(ids[i]).values;
            MatX fd(m, values.size());
            VecX rPlus(m), rMinus(m);
            for (int c = 0; c < values.size(); ++c) {
                const double saved = values[c];
                values[c] = saved + step;
                block.evaluate(ws.params, rPlus, nullptr);
                values[c] = saved - step;
                block.evaluate(ws.params, rMinus, nullptr);
                values[c] = saved;
                fd.col(c) = (rPlus - rMinus) / (2.0 * step);
            }
            const double scale = std::max({1.0,
                                           ws.jacobians[i].cwiseAbs().maxCoeff(),
                                           fd.cwiseAbs().maxCoeff()});
            worst = std::max(worst,
                             (ws.jacobians[i] - fd).cwiseAbs().maxCoeff() / scale);
        }
    }
    return worst;
}

}  // namespace avatar::solve
