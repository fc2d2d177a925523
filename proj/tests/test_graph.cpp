#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avatar/graph/labeling.h"
#include "avatar/graph/maxflow.h"

#include <algorithm>
#include <cmath>
#include <random>

using namespace avatar;
using namespace avatar::graph;

TEST_CASE("max flow: single node terminal chain") {
    FlowNetwork net(1);
    net.addTerminal(0, 3.0, 3.0);
    CHECK(net.solve() == doctest::Approx(3.0));
}

TEST_CASE("max flow: diamond network") {
    // s->a(2), s->b(2), a->t(1), b->t(3), a->b(1). Min cut = 4.
    FlowNetwork net(2);
    net.addTerminal(0, 2.0, 1.0);
    net.addTerminal(1, 2.0, 3.0);
    net.addEdge(0, 1, 1.0);
    CHECK(net.solve() == doctest::Approx(4.0));
}

namespace {

struct RandomNet {
    int n;
    std::vector<double> srcCap, snkCap;
    struct E {
        int a, b;
        double cap;
    };
    std::vector<E> edges;

    double cutCapacity(uint32_t sourceMask) const {
        double cut = 0;
        for (int i = 0; i < n; ++i) {
            const bool src = sourceMask >> i & 1;
            cut += src ? snkCap[i] : srcCap[i];
        }
        for (const E& e : edges) {
            const bool sa = sourceMask >> e.a & 1;
            const bool sb = sourceMask >> e.b & 1;
            if (sa && !sb)
                cut += e.cap;
        }
        return cut;
    }
};

RandomNet makeRandomNet(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> cap(0.0, 5.0);
    std::uniform_int_distribution<int> node(0, n - 1);
    RandomNet net{n, {}, {}, {}};
    net.srcCap.resize(n);
    net.snkCap.resize(n);
    for (int i = 0; i < n; ++i) {
        net.srcCap[i] = rng() % 3 == 0 ? cap(rng) : 0.0;
        net.snkCap[i] = rng() % 3 == 0 ? cap(rng) : 0.0;
    }
    const int m = 2 * n;
    for (int k = 0; k < m; ++k) {
        int a = node(rng), b = node(rng);
        if (a != b)
            net.edges.push_back({a, b, cap(rng)});
    }
    return net;
}

}  // namespace

TEST_CASE("max flow equals exhaustive min cut on random 12-node networks") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        RandomNet spec = makeRandomNet(rng, 12);
        FlowNetwork net(spec.n);
        for (int i = 0; i < spec.n; ++i)
            net.addTerminal(i, spec.srcCap[i], spec.snkCap[i]);
        for (const auto& e : spec.edges)
            net.addEdge(e.a, e.b, e.cap);
        const double flow = net.solve();

        double minCut = 1e300;
        uint32_t argMask = 0;
        for (uint32_t mask = 0; mask < (1u << spec.n); ++mask) {
            const double c = spec.cutCapacity(mask);
            if (c < minCut) {
                minCut = c;
                argMask = mask;
            }
        }
        CHECK(flow == doctest::Approx(minCut).epsilon(1e-9));

        // The returned partition is itself a minimum cut.
        uint32_t gotMask = 0;
        for (int i = 0; i < spec.n; ++i)
            if (net.sourceSide(i))
                gotMask |= 1u << i;
        CHECK(spec.cutCapacity(gotMask) == doctest::Approx(minCut).epsilon(1e-9));
        (void)argMask;
    }
}

TEST_CASE("max flow is invariant to equal-capacity edge subdivision") {
    std::mt19937 rng(7);
    RandomNet spec = makeRandomNet(rng, 10);

    FlowNetwork plain(spec.n);
    for (int i = 0; i < spec.n; ++i)
        plain.addTerminal(i, spec.srcCap[i], spec.snkCap[i]);
    for (const auto& e : spec.edges)
        plain.addEdge(e.a, e.b, e.cap);

    FlowNetwork split(spec.n);
    for (int i = 0; i < spec.n; ++i)
        split.addTerminal(i, spec.srcCap[i], spec.snkCap[i]);
    for (const auto& e : spec.edges) {
        const int mid = split.addNode();
        split.addEdge(e.a, mid, e.cap);
        split.addEdge(mid, e.b, e.cap);
    }
    CHECK(plain.solve() == doctest::Approx(split.solve()).epsilon(1e-9));
}

TEST_CASE("binary labeling: unanimous unaries with zero coupling") {
    std::vector<std::array<double, 2>> unary(5, {2.0, 1.0});
    std::vector<BinaryPairCost> pairs;
    for (int i = 0; i + 1 < 5; ++i)
        pairs.push_back({i, i + 1, 0, 0, 0, 0});
    auto res = binaryLabeling(unary, pairs);
    for (uint8_t l : res.labels)
        CHECK(l == 1);
    CHECK(res.energy == doctest::Approx(5.0));
}

TEST_CASE("binary labeling: strong coupling forces agreement") {
    // Opposing unaries, disagreement penalty 10: both nodes take one label.
    std::vector<std::array<double, 2>> unary = {{0.0, 1.0}, {1.0, 0.0}};
    std::vector<BinaryPairCost> pairs = {{0, 1, 0, 10, 10, 0}};
    auto res = binaryLabeling(unary, pairs);
    CHECK(res.labels[0] == res.labels[1]);
    CHECK(res.energy == doctest::Approx(1.0));

    // Exhaustive check over the 4 labelings.
    double best = 1e300;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double e = unary[0][a] + unary[1][b] + (a != b ? 10.0 : 0.0);
            best = std::min(best, e);
        }
    CHECK(res.energy == doctest::Approx(best));
}

TEST_CASE("binary labeling matches exhaustive search on random 3x3 grids") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> uni(0.0, 4.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::array<double, 2>> unary(9);
        for (auto& u : unary)
            u = {uni(rng), uni(rng)};
        std::vector<BinaryPairCost> pairs;
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) {
                const int i = 3 * y + x;
                // Random submodular tables: agreement cheap, disagreement dear.
                auto table = [&]() {
                    BinaryPairCost p;
                    p.kk = 0.2 * uni(rng);
                    p.uu = 0.2 * uni(rng);
                    const double base = p.kk + p.uu;
                    p.ku = 0.5 * base + uni(rng);
                    p.uk = 0.5 * base + uni(rng);
                    return p;
                };
                if (x + 1 < 3) {
                    BinaryPairCost p = table();
                    p.a = i;
                    p.b = i + 1;
                    pairs.push_back(p);
                }
                if (y + 1 < 3) {
                    BinaryPairCost p = table();
                    p.a = i;
                    p.b = i + 3;
                    pairs.push_back(p);
                }
            }

        auto res = binaryLabeling(unary, pairs);

        double best = 1e300;
        for (uint32_t mask = 0; mask < 512; ++mask) {
            double e = 0;
            for (int i = 0; i < 9; ++i)
                e += unary[i][mask >> i & 1];
            for (const auto& p : pairs) {
                const int la = mask >> p.a & 1, lb = mask >> p.b & 1;
                e += la == 0 ? (lb == 0 ? p.kk : p.ku) : (lb == 0 ? p.uk : p.uu);
            }
            best = std::min(best, e);
        }
        CHECK(res.energy == doctest::Approx(best).epsilon(1e-9));

        // Algebraic identity: energy = cut value + problem constant.
        double constant = 0;
        for (const auto& p : pairs) {
            const double da = p.uk - p.kk;
            const double db = p.uu - p.uk;
            constant += p.kk + std::min(da, 0.0) + std::min(db, 0.0);
        }
        for (const auto& u : unary)
            constant -= 0;  // terminal capacities are absorbed into the flow
        CHECK(res.energy ==
              doctest::Approx(res.cutValue + constant).epsilon(1e-9));
    }
}

TEST_CASE("binary labeling rejects non-submodular edges by name") {
    std::vector<std::array<double, 2>> unary(2, {0.0, 0.0});
    std::vector<BinaryPairCost> pairs = {{0, 1, 5.0, 1.0, 1.0, 5.0}};
    CHECK_THROWS_WITH_AS(binaryLabeling(unary, pairs),
                         doctest::Contains("non-submodular"), Error);
}

namespace {

LabelProblem makePottsProblem(std::mt19937& rng, int nodes, int labels,
                              double lambda) {
    LabelProblem p;
    p.labelCount = labels;
    p.unary = MatX::Zero(nodes, labels);
    std::uniform_real_distribution<double> uni(0.0, 3.0);
    for (int i = 0; i < nodes; ++i)
        for (int l = 0; l < labels; ++l)
            p.unary(i, l) = uni(rng);
    for (int i = 0; i + 1 < nodes; ++i)
        p.edges.emplace_back(i, i + 1);
    p.edges.emplace_back(0, nodes - 1);  // a loop for good measure
    p.pairwise = [lambda](int, int a, int b) { return a == b ? 0.0 : lambda; };
    return p;
}

}  // namespace

TEST_CASE("alpha-beta swap: unary-only problems solved exactly") {
    std::mt19937 rng(13);
    LabelProblem p = makePottsProblem(rng, 10, 4, 0.0);
    auto res = alphaBetaSwap(p);
    for (int i = 0; i < 10; ++i) {
        int best = 0;
        for (int l = 1; l < 4; ++l)
            if (p.unary(i, l) < p.unary(i, best))
                best = l;
        CHECK(res.labels[i] == best);
    }
}

TEST_CASE("alpha-beta swap equals binary labeling on 2-label problems") {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        LabelProblem p = makePottsProblem(rng, 9, 2, 1.5);
        auto swap = alphaBetaSwap(p);

        std::vector<std::array<double, 2>> unary(9);
        for (int i = 0; i < 9; ++i)
            unary[i] = {p.unary(i, 0), p.unary(i, 1)};
        std::vector<BinaryPairCost> pairs;
        for (auto [a, b] : p.edges)
            pairs.push_back({a, b, 0, 1.5, 1.5, 0});
        auto exact = binaryLabeling(unary, pairs);
        CHECK(swap.energy == doctest::Approx(exact.energy).epsilon(1e-9));
    }
}

TEST_CASE("alpha-beta swap is within 5% of exhaustive optimum") {
    std::mt19937 rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        LabelProblem p = makePottsProblem(rng, 8, 3, 1.0);
        auto res = alphaBetaSwap(p);

        double best = 1e300;
        std::vector<int> labels(8);
        for (int code = 0; code < 6561; ++code) {  // 3^8
            int c = code;
            for (int i = 0; i < 8; ++i) {
                labels[i] = c % 3;
                c /= 3;
            }
            best = std::min(best, p.energy(labels));
        }
        CHECK(res.energy <= 1.05 * best + 1e-12);
        CHECK(res.energy >= best - 1e-12);
    }
}
