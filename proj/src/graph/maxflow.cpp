#include "avatar/graph/maxflow.h"

#include <algorithm>
#include <limits>

namespace avatar::graph {

namespace {
constexpr int kParentNone = -1;
constexpr int kParentTerminal = -2;
}  // namespace

FlowNetwork::FlowNetwork(int nodeCount) {
    for (int i = 0; i < nodeCount; ++i)
        addNode();
}

int FlowNetwork::addNode() {
    firstArc_.push_back(-1);
    terminal_.push_back(0.0);
    solved_ = false;
    return nodeCount() - 1;
}

void FlowNetwork::addTerminal(int node, double sourceCap, double sinkCap) {
    if (sourceCap < 0 || sinkCap < 0)
        throw Error("FlowNetwork: negative terminal capacity");
    // Merge with the node's current excess, then let the opposing parts
    // cancel: the common part always flows.
    const double excess = terminal_[node];
    if (excess > 0)
        sourceCap += excess;
    else
        sinkCap -= excess;
    flow_ += std::min(sourceCap, sinkCap);
    terminal_[node] = sourceCap - sinkCap;
    solved_ = false;
}

void FlowNetwork::addEdge(int a, int b, double cap, double revCap) {
    if (cap < 0 || revCap < 0)
        throw Error("FlowNetwork: negative edge capacity");
    if (a == b)
        return;
    const int ia = static_cast<int>(arcs_.size());
    arcs_.push_back({b, firstArc_[a], ia + 1, cap});
    firstArc_[a] = ia;
    arcs_.push_back({a, firstArc_[b], ia, revCap});
    firstArc_[b] = ia + 1;
    solved_ = false;
}

bool FlowNetwork::rootedInTerminal(int node) {
    // Walk the parent chain; cache results with the current timestamp.
    int n = node;
    int steps = 0;
    while (true) {
        if (parentArc_[n] == kParentTerminal) {
            timestamp_[n] = time_;
            dist_[n] = 1;
            break;
        }
        if (timestamp_[n] == time_)
            break;
        if (parentArc_[n] == kParentNone)
            return false;
        n = arcs_[parentArc_[n]].head;
        ++steps;
    }
    int d = dist_[n] + steps;
    for (int m = node; timestamp_[m] != time_; m = arcs_[parentArc_[m]].head) {
        timestamp_[m] = time_;
        dist_[m] = d--;
    }
    return true;
}

double FlowNetwork::augment(int pathArc, std::vector<int>& orphans) {
    const int sSide = arcs_[arcs_[pathArc].rev].head;
    const int tSide = arcs_[pathArc].head;

    int sRoot = sSide, tRoot = tSide;
    double bottleneck = arcs_[pathArc].rcap;
    for (int n = sSide; parentArc_[n] != kParentTerminal;
         n = arcs_[parentArc_[n]].head) {
        bottleneck = std::min(bottleneck, arcs_[arcs_[parentArc_[n]].rev].rcap);
        sRoot = arcs_[parentArc_[n]].head;
    }
    bottleneck = std::min(bottleneck, terminal_[sRoot]);
    for (int n = tSide; parentArc_[n] != kParentTerminal;
         n = arcs_[parentArc_[n]].head) {
        bottleneck = std::min(bottleneck, arcs_[parentArc_[n]].rcap);
        tRoot = arcs_[parentArc_[n]].head;
    }
    bottleneck = std::min(bottleneck, -terminal_[tRoot]);

    arcs_[pathArc].rcap -= bottleneck;
    arcs_[arcs_[pathArc].rev].rcap += bottleneck;

    for (int n = sSide; parentArc_[n] != kParentTerminal;) {
        Arc& toParent = arcs_[parentArc_[n]];
        Arc& fromParent = arcs_[toParent.rev];
        fromParent.rcap -= bottleneck;
        toParent.rcap += bottleneck;
        const int next = toParent.head;
        if (fromParent.rcap <= 0) {
            parentArc_[n] = kParentNone;
            orphans.push_back(n);
        }
        n = next;
    }
    terminal_[sRoot] -= bottleneck;
    if (terminal_[sRoot] <= 0 && parentArc_[sRoot] == kParentTerminal) {
        parentArc_[sRoot] = kParentNone;
        orphans.push_back(sRoot);
    }
    for (int n = tSide; parentArc_[n] != kParentTerminal;) {
        Arc& toParent = arcs_[parentArc_[n]];
        Arc& fromParent = arcs_[toParent.rev];
        toParent.rcap -= bottleneck;
        fromParent.rcap += bottleneck;
        const int next = toParent.head;
        if (toParent.rcap <= 0) {
            parentArc_[n] = kParentNone;
            orphans.push_back(n);
        }
        n = next;
    }
    terminal_[tRoot] += bottleneck;
    if (terminal_[tRoot] >= 0 && parentArc_[tRoot] == kParentTerminal) {
        parentArc_[tRoot] = kParentNone;
        orphans.push_back(tRoot);
    }
    return bottleneck;
}

void FlowNetwork::adopt(std::vector<int>& orphans, std::vector<int>& queue) {
    while (!orphans.empty()) {
        const int o = orphans.back();
        orphans.pop_back();
        const signed char t = tree_[o];
        if (t == 0)
            continue;
        ++time_;

        // Look for a new parent in the same tree with residual toward o
        // (for the source tree) or from o (for the sink tree).
        int bestArc = kParentNone;
        int bestDist = std::numeric_limits<int>::max();
        for (int a = firstArc_[o]; a != -1; a = arcs_[a].next) {
            const int q = arcs_[a].head;
            if (tree_[q] != t)
                continue;
            const double residual = t > 0 ? arcs_[arcs_[a].rev].rcap : arcs_[a].rcap;
            if (residual <= 0)
                continue;
            if (!rootedInTerminal(q))
                continue;
            if (dist_[q] < bestDist) {
                bestDist = dist_[q];
                bestArc = a;
            }
        }
        if (bestArc != kParentNone) {
            parentArc_[o] = bestArc;
            timestamp_[o] = time_;
            dist_[o] = bestDist + 1;
            continue;
        }

        // No parent: o leaves the tree; children become orphans, neighbors
        // with spare residual become active again.
        for (int a = firstArc_[o]; a != -1; a = arcs_[a].next) {
            const int q = arcs_[a].head;
            if (tree_[q] != t)
                continue;
            if (parentArc_[q] >= 0 && arcs_[parentArc_[q]].head == o) {
                parentArc_[q] = kParentNone;
                orphans.push_back(q);
            }
            const double residual = t > 0 ? arcs_[arcs_[a].rev].rcap : arcs_[a].rcap;
            if (residual > 0)
                queue.push_back(q);
        }
        tree_[o] = 0;
        parentArc_[o] = kParentNone;
    }
}

double FlowNetwork::solve() {
    const int n = nodeCount();
    tree_.assign(n, 0);
    parentArc_.assign(n, kParentNone);
    timestamp_.assign(n, -1);
    dist_.assign(n, 0);
    time_ = 0;

    std::vector<int> queue;
    for (int i = 0; i < n; ++i) {
        if (terminal_[i] > 0) {
            tree_[i] = 1;
            parentArc_[i] = kParentTerminal;
            queue.push_back(i);
        } else if (terminal_[i] < 0) {
            tree_[i] = -1;
            parentArc_[i] = kParentTerminal;
            queue.push_back(i);
        }
    }

    std::vector<int> orphans;
    size_t qhead = 0;
    while (qhead < queue.size()) {
        const int p = queue[qhead];
        const signed char t = tree_[p];
        if (t == 0) {
            ++qhead;
            continue;
        }
        bool augmented = false;
        for (int a = firstArc_[p]; a != -1; a = arcs_[a].next) {
            const double residual = t > 0 ? arcs_[a].rcap : arcs_[arcs_[a].rev].rcap;
            if (residual <= 0)
                continue;
            const int q = arcs_[a].head;
            if (tree_[q] == 0) {
                tree_[q] = t;
                parentArc_[q] = arcs_[a].rev;
                timestamp_[q] = timestamp_[p];
                dist_[q] = dist_[p] + 1;
                queue.push_back(q);
            } else if (tree_[q] == -t) {
                const int pathArc = t > 0 ? a : arcs_[a].rev;
                flow_ += augment(pathArc, orphans);
                adopt(orphans, queue);
                augmented = true;
                break;
            }
        }
        // After an augmentation p may still have growth options; revisit it.
        if (augmented && tree_[p] != 0)
            queue.push_back(p);
        ++qhead;
        // Compact the queue occasionally to bound memory.
        if (qhead > 1u << 20) {
            queue.erase(queue.begin(), queue.begin() + static_cast<long>(qhead));
            qhead = 0;
        }
    }
    solved_ = true;
    return flow_;
}

bool FlowNetwork::sourceSide(int node) const {
    if (!solved_)
        throw Error("FlowNetwork: solve() before querying the cut");
    return tree_[node] > 0;
}

}  // namespace avatar::graph
