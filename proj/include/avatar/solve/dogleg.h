#pragma once

#include "avatar/solve/problem.h"

#include <functional>
#include <map>

namespace avatar::solve {

struct SolverOptions {
    int maxIterations = 100;
    double gradientTolerance = 1e-8;    // on the max-norm of J^T r
    double functionTolerance = 1e-9;    // relative cost change
    double initialTrustRadius = 1.0;
    double minTrustRadius = 1e-12;
    double normalEquationDamping = 1e-12;
};

struct SolveReport {
    int iterations = 0;
    double initialCost = 0.0;
    double finalCost = 0.0;
    std::map<std::string, double> termCosts;
    std::string termination;
    std::vector<double> trustRadiusTrace;
    bool success = false;
};

// Powell dogleg trust region over the problem's sparse normal equations.
// Robustified blocks contribute rho(|r|^2) to the cost and are folded into
// the linear system by IRLS-style rescaling with sqrt(d rho / d |r|^2).
SolveReport minimize(Problem& problem, const SolverOptions& opts = {});

// Evaluate total cost and the per-term breakdown at the current parameters.
double evaluateCost(const Problem& problem,
                    std::map<std::string, double>* termCosts = nullptr);

struct AlternationOptions {
    int rounds = 3;
    SolverOptions solver;
    // Terms whose weights are multiplied by scheduleFactor every round.
    std::vector<std::string> scheduledTerms;
    double scheduleFactor = 0.5;
};

// Alternate {associate; minimize}. The associate callback rebuilds any
// data-dependent residual blocks (correspondences); the trust radius is
// carried across rounds.
SolveReport alternate(Problem& problem,
                      const std::function<void(Problem&, int round)>& associate,
                      const AlternationOptions& opts);

// Compare every analytic Jacobian against central finite differences at the
// current parameter values. Returns the worst relative error.
double checkJacobians(Problem& problem, double step = 1e-6);

}  // namespace avatar::solve
