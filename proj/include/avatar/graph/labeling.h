#pragma once

#include "avatar/types.h"

#include <array>
#include <functional>
#include <vector>

namespace avatar::graph {

// Pairwise cost table of one edge for a two-label problem.
// Labels: 0 = keep, 1 = update.
struct BinaryPairCost {
    int a = 0, b = 0;
    double kk = 0, ku = 0, uk = 0, uu = 0;
};

struct BinaryLabelingResult {
    std::vector<uint8_t> labels;
    double energy = 0;    // unary + pairwise of the returned labeling
    double cutValue = 0;  // max-flow value; energy = cutValue + problem constant
};

// Globally optimal two-label assignment via one max-flow. The pairwise
// tables must be submodular (kk + uu <= ku + uk); a violating edge raises
// an error naming the edge.
BinaryLabelingResult binaryLabeling(
    const std::vector<std::array<double, 2>>& unary,
    const std::vector<BinaryPairCost>& pairs);

// Multi-label problem over an adjacency list with a per-edge pairwise cost.
struct LabelProblem {
    int labelCount = 0;
    MatX unary;  // nodes x labels
    std::vector<std::pair<int, int>> edges;
    // pairwise(edgeIndex, labelA, labelB); must be >= 0 and semi-metric on
    // every label pair used in a swap move.
    std::function<double(int, int, int)> pairwise;

    int nodeCount() const { return static_cast<int>(unary.rows()); }
    double energy(const std::vector<int>& labels) const;
};

struct SwapResult {
    std::vector<int> labels;
    double energy = 0;
    int sweeps = 0;
};

// Alpha-beta swap move making: iterates label pairs in lexicographic order,
// solving each swap move to optimality with binaryLabeling, until a full
// sweep brings no improvement or the sweep budget is exhausted.
SwapResult alphaBetaSwap(const LabelProblem& problem,
                         std::vector<int> initial = {}, int maxSweeps = 10);

}  // namespace avatar::graph
