#pragma once

#include "avatar/types.h"

#include <vector>

namespace avatar::graph {

// Max-flow / min-cut on a two-terminal network, solved with the
// augmenting-path scheme with search-tree reuse that is standard for
// grid-like vision graphs.
class FlowNetwork {
  public:
    explicit FlowNetwork(int nodeCount = 0);

    int addNode();
    int nodeCount() const { return static_cast<int>(terminal_.size()); }

    // Accumulates terminal capacities (source->node and node->sink).
    void addTerminal(int node, double sourceCap, double sinkCap);
    // Adds a directed edge pair with the given forward/reverse capacities.
    void addEdge(int a, int b, double cap, double revCap = 0.0);

    // Returns the max-flow value; afterwards minCutSourceSide() is valid.
    double solve();

    // True if the node is on the source side of the minimum cut.
    bool sourceSide(int node) const;

  private:
    struct Arc {
        int head;
        int next;  // next arc out of the same tail, -1 terminates
        int rev;   // index of the reverse arc
        double rcap;
    };

    int growStep(int node, std::vector<int>& queue);
    double augment(int arcFromS, std::vector<int>& orphans);
    void adopt(std::vector<int>& orphans, std::vector<int>& queue);
    bool rootedInTerminal(int node);

    std::vector<Arc> arcs_;
    std::vector<int> firstArc_;
    std::vector<double> terminal_;  // >0: residual from source, <0: to sink
    std::vector<signed char> tree_;  // 0 free, +1 source, -1 sink
    std::vector<int> parentArc_;     // arc into this node's parent, -2 = terminal
    std::vector<int> timestamp_;
    std::vector<int> dist_;
    int time_ = 0;
    double flow_ = 0.0;
    bool solved_ = false;
};

}  // namespace avatar::graph
