#include "avatar/graph/labeling.h"

#include "avatar/graph/maxflow.h"

#include <cmath>
#include <string>

namespace avatar::graph {

BinaryLabelingResult binaryLabeling(
    const std::vector<std::array<double, 2>>& unary,
    const std::vector<BinaryPairCost>& pairs) {
    const int n = static_cast<int>(unary.size());
    FlowNetwork net(n);

    // Convention: source side = label 0 (keep). A cut source->node edge is
    // paid when the node takes label 1, so its capacity carries the label-1
    // cost; node->sink carries the label-0 cost.
    for (int i = 0; i < n; ++i)
        net.addTerminal(i, unary[i][1], unary[i][0]);

    for (size_t e = 0; e < pairs.size(); ++e) {
        const BinaryPairCost& p = pairs[e];
        const double slack = p.ku + p.uk - p.kk - p.uu;
        if (slack < -1e-9)
            throw Error("binaryLabeling: non-submodular pairwise term on edge " +
                        std::to_string(e) + " (" + std::to_string(p.a) + "," +
                        std::to_string(p.b) + ")");
        // Standard decomposition: theta(xa, xb) = kk
        //   + (uk - kk) [xa=1] + (uu - uk) [xb=1] + slack [xa=0, xb=1].
        const double da = p.uk - p.kk;
        const double db = p.uu - p.uk;
        net.addTerminal(p.a, std::max(da, 0.0), std::max(-da, 0.0));
        net.addTerminal(p.b, std::max(db, 0.0), std::max(-db, 0.0));
        if (slack > 0)
            net.addEdge(p.a, p.b, slack, 0.0);
    }

    BinaryLabelingResult result;
    result.cutValue = net.solve();
    result.labels.resize(n);
    for (int i = 0; i < n; ++i)
        result.labels[i] = net.sourceSide(i) ? 0 : 1;

    result.energy = 0;
    for (int i = 0; i < n; ++i)
        result.energy += unary[i][result.labels[i]];
    for (const BinaryPairCost& p : pairs) {
        const int la = result.labels[p.a], lb = result.labels[p.b];
        result.energy += la == 0 ? (lb == 0 ? p.kk : p.ku) : (lb == 0 ? p.uk : p.uu);
    }
    return result;
}

double LabelProblem::energy(const std::vector<int>& labels) const {
    double e = 0;
    for (int i = 0; i < nodeCount(); ++i)
        e += unary(i, labels[i]);
    for (size_t k = 0; k < edges.size(); ++k)
        e += pairwise(static_cast<int>(k), labels[edges[k].first],
                      labels[edges[k].second]);
    return e;
}

namespace {

SwapResult swapFromInit(const LabelProblem& problem, std::vector<int> initial,
                        int maxSweeps) {
    const int n = problem.nodeCount();
    const int L = problem.labelCount;

    SwapResult result;
    result.labels = std::move(initial);
    result.energy = problem.energy(result.labels);

    // Node -> incident edges, for collecting the boundary terms of a move.
    std::vector<std::vector<int>> incident(n);
    for (size_t k = 0; k < problem.edges.size(); ++k) {
        incident[problem.edges[k].first].push_back(static_cast<int>(k));
        incident[problem.edges[k].second].push_back(static_cast<int>(k));
    }

    std::vector<int> nodeOf(n, -1);
    for (int sweep = 0; sweep < maxSweeps; ++sweep) {
        ++result.sweeps;
        bool improved = false;
        for (int alpha = 0; alpha < L; ++alpha)
            for (int beta = alpha + 1; beta < L; ++beta) {
                // Participating nodes carry label alpha or beta.
                std::vector<int> nodes;
                for (int i = 0; i < n; ++i)
                    if (result.labels[i] == alpha || result.labels[i] == beta) {
                        nodeOf[i] = static_cast<int>(nodes.size());
                        nodes.push_back(i);
                    } else {
                        nodeOf[i] = -1;
                    }
                if (nodes.empty())
                    continue;

                // Binary move: label 0 = alpha, label 1 = beta.
                std::vector<std::array<double, 2>> unary(nodes.size());
                for (size_t m = 0; m < nodes.size(); ++m)
                    unary[m] = {problem.unary(nodes[m], alpha),
                                problem.unary(nodes[m], beta)};
                std::vector<BinaryPairCost> pairs;
                for (size_t k = 0; k < problem.edges.size(); ++k) {
                    const auto [a, b] = problem.edges[k];
                    const int ia = nodeOf[a], ib = nodeOf[b];
                    const int ek = static_cast<int>(k);
                    if (ia >= 0 && ib >= 0) {
                        pairs.push_back({ia, ib, problem.pairwise(ek, alpha, alpha),
                                         problem.pairwise(ek, alpha, beta),
                                         problem.pairwise(ek, beta, alpha),
                                         problem.pairwise(ek, beta, beta)});
                    } else if (ia >= 0) {
                        const int lb = result.labels[b];
                        unary[ia][0] += problem.pairwise(ek, alpha, lb);
                        unary[ia][1] += problem.pairwise(ek, beta, lb);
                    } else if (ib >= 0) {
                        const int la = result.labels[a];
                        unary[ib][0] += problem.pairwise(ek, la, alpha);
                        unary[ib][1] += problem.pairwise(ek, la, beta);
                    }
                }

                BinaryLabelingResult move = binaryLabeling(unary, pairs);
                std::vector<int> candidate = result.labels;
                for (size_t m = 0; m < nodes.size(); ++m)
                    candidate[nodes[m]] = move.labels[m] == 0 ? alpha : beta;
                const double candidateEnergy = problem.energy(candidate);
                if (candidateEnergy < result.energy - 1e-12) {
                    result.labels = std::move(candidate);
                    result.energy = candidateEnergy;
                    improved = true;
                }
            }
        if (!improved)
            break;
    }
    return result;
}

}  // namespace

SwapResult alphaBetaSwap(const LabelProblem& problem, std::vector<int> initial,
                         int maxSweeps) {
    if (!initial.empty())
        return swapFromInit(problem, std::move(initial), maxSweeps);

    const int n = problem.nodeCount();
    const int L = problem.labelCount;

    // Swap moves only reach local optima; hedge with a handful of
    // deterministic starts (greedy unary plus each constant labeling).
    std::vector<int> greedy(n);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int l = 1; l < L; ++l)
            if (problem.unary(i, l) < problem.unary(i, best))
                best = l;
        greedy[i] = best;
    }
    SwapResult result = swapFromInit(problem, std::move(greedy), maxSweeps);
    for (int l = 0; l < L; ++l) {
        SwapResult alt =
            swapFromInit(problem, std::vector<int>(n, l), maxSweeps);
        if (alt.energy < result.energy)
            result = std::move(alt);
    }
    return result;
}

}  // namespace avatar::graph
