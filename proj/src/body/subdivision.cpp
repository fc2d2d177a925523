#include "avatar/body/subdivision.h"

#include "avatar/core/laplacian.h"

#include <Eigen/SparseCholesky>

#include <iostream>
#include <map>

namespace avatar::body {

namespace {

struct SplitTopology {
    std::vector<core::MeshEdge> edges;
    std::vector<std::array<int, 3>> newFaces;
    std::vector<std::array<Vec2, 3>> newUVs;
    // midpoint vertex index per edge = oldVertexCount + edgeIndex
};

SplitTopology splitFaces(const std::vector<std::array<int, 3>>& faces,
                         const std::vector<std::array<Vec2, 3>>& uvs,
                         int vertexCount) {
    core::TriMesh tmp;
    tmp.vertices.resize(vertexCount);
    tmp.faces = faces;
    SplitTopology out;
    out.edges = core::collectEdges(tmp);

    std::map<std::pair<int, int>, int> edgeIndex;
    for (size_t e = 0; e < out.edges.size(); ++e)
        edgeIndex[{out.edges[e].a, out.edges[e].b}] = static_cast<int>(e);

    auto mid = [&](int a, int b) {
        return vertexCount + edgeIndex.at(std::minmax(a, b));
    };

    const bool hasUVs = uvs.size() == faces.size();
    for (size_t f = 0; f < faces.size(); ++f) {
        const auto& tri = faces[f];
        const int ab = mid(tri[0], tri[1]);
        const int bc = mid(tri[1], tri[2]);
        const int ca = mid(tri[2], tri[0]);
        out.newFaces.push_back({tri[0], ab, ca});
        out.newFaces.push_back({tri[1], bc, ab});
        out.newFaces.push_back({tri[2], ca, bc});
        out.newFaces.push_back({ab, bc, ca});
        if (hasUVs) {
            const auto& u = uvs[f];
            const Vec2 uab = 0.5 * (u[0] + u[1]);
            const Vec2 ubc = 0.5 * (u[1] + u[2]);
            const Vec2 uca = 0.5 * (u[2] + u[0]);
            out.newUVs.push_back({u[0], uab, uca});
            out.newUVs.push_back({u[1], ubc, uab});
            out.newUVs.push_back({u[2], uca, ubc});
            out.newUVs.push_back({uab, ubc, uca});
        }
    }
    return out;
}

}  // namespace

core::TriMesh subdivideMesh(const core::TriMesh& mesh, int steps) {
    if (steps < 1)
        throw Error("subdivideMesh: steps must be >= 1");
    core::TriMesh cur = mesh;
    for (int s = 0; s < steps; ++s) {
        SplitTopology topo = splitFaces(cur.faces, cur.cornerUVs, cur.vertexCount());
        core::TriMesh next;
        next.vertices = cur.vertices;
        for (const core::MeshEdge& e : topo.edges)
            next.vertices.push_back(0.5 * (cur.vertices[e.a] + cur.vertices[e.b]));
        next.faces = std::move(topo.newFaces);
        next.cornerUVs = std::move(topo.newUVs);
        cur = std::move(next);
    }
    return cur;
}

SubdividedModel subdivide(const RiggedTemplate& rig, int steps) {
    if (steps < 1)
        throw Error("subdivide: steps must be >= 1");

    SubdividedModel model;
    model.coarseVertexCount = rig.vertexCount();
    model.fine = rig;

    // Identity expansion for the coarse vertices.
    model.coarseSupport.resize(rig.vertexCount());
    model.offsetSupport.resize(rig.vertexCount());
    for (int i = 0; i < rig.vertexCount(); ++i)
        model.coarseSupport[i] = {{i, 1.0}};

    for (int s = 0; s < steps; ++s) {
        RiggedTemplate& cur = model.fine;
        const int n = cur.vertexCount();
        const int j = cur.jointCount();

        // Frozen edge normals from the current rest surface.
        const std::vector<Vec3> normals = core::vertexNormals(cur.restMesh());

        SplitTopology topo = splitFaces(cur.faces, cur.cornerUVs, n);
        const int numEdges = static_cast<int>(topo.edges.size());

        // Averaged attributes for inserted vertices.
        std::vector<Triplet> weightTriplets;
        for (int k = 0; k < cur.skinWeights.outerSize(); ++k)
            for (SparseMat::InnerIterator it(cur.skinWeights, k); it; ++it)
                weightTriplets.emplace_back(it.row(), it.col(), it.value());

        MatX newShape;
        if (cur.shapeBasis.size() > 0) {
            newShape.resize(3 * (n + numEdges), cur.shapeBasis.cols());
            newShape.topRows(3 * n) = cur.shapeBasis;
        }
        MatX newPose;
        if (cur.poseBasis.size() > 0) {
            newPose.resize(3 * (n + numEdges), cur.poseBasis.cols());
            newPose.topRows(3 * n) = cur.poseBasis;
        }

        for (int e = 0; e < numEdges; ++e) {
            const int a = topo.edges[e].a;
            const int b = topo.edges[e].b;
            const int v = n + e;

            cur.restVertices.push_back(0.5 * (cur.restVertices[a] + cur.restVertices[b]));

            InsertedVertex iv;
            iv.parentA = a;
            iv.parentB = b;
            iv.level = s;
            Vec3 ne = normals[a] + normals[b];
            iv.edgeNormal = ne.norm() > 1e-12 ? Vec3(ne.normalized())
                                              : Vec3(normals[a]);
            model.inserted.push_back(iv);

            // Affine expansion: average the parents, then add s_e * n_e.
            std::map<int, double> coarseRow;
            for (const auto& [ci, w] : model.coarseSupport[a])
                coarseRow[ci] += 0.5 * w;
            for (const auto& [ci, w] : model.coarseSupport[b])
                coarseRow[ci] += 0.5 * w;
            std::map<int, Vec3> offsetRow;
            auto addOffset = [&offsetRow](int oi, const Vec3& c) {
                offsetRow.try_emplace(oi, Vec3::Zero()).first->second += c;
            };
            for (const auto& [oi, c] : model.offsetSupport[a])
                addOffset(oi, 0.5 * c);
            for (const auto& [oi, c] : model.offsetSupport[b])
                addOffset(oi, 0.5 * c);
            addOffset(static_cast<int>(model.inserted.size()) - 1, iv.edgeNormal);

            model.coarseSupport.emplace_back(coarseRow.begin(), coarseRow.end());
            model.offsetSupport.emplace_back(offsetRow.begin(), offsetRow.end());

            if (newShape.size() > 0)
                newShape.middleRows<3>(3 * v) =
                    0.5 * (cur.shapeBasis.middleRows<3>(3 * a) +
                           cur.shapeBasis.middleRows<3>(3 * b));
            if (newPose.size() > 0)
                newPose.middleRows<3>(3 * v) =
                    0.5 * (cur.poseBasis.middleRows<3>(3 * a) +
                           cur.poseBasis.middleRows<3>(3 * b));
        }

        // Averaged skinning weights via a dense pass over parent rows.
        {
            MatX dense = MatX(cur.skinWeights);
            for (int e = 0; e < numEdges; ++e) {
                const VecX row = 0.5 * (dense.row(topo.edges[e].a) +
                                        dense.row(topo.edges[e].b));
                for (int q = 0; q < j; ++q)
                    if (row[q] != 0.0)
                        weightTriplets.emplace_back(n + e, q, row[q]);
            }
        }

        SparseMat newWeights(n + numEdges, j);
        newWeights.setFromTriplets(weightTriplets.begin(), weightTriplets.end());
        cur.skinWeights = std::move(newWeights);

        SparseMat newRegressor(j, n + numEdges);
        std::vector<Triplet> regTriplets;
        for (int k = 0; k < cur.jointRegressor.outerSize(); ++k)
            for (SparseMat::InnerIterator it(cur.jointRegressor, k); it; ++it)
                regTriplets.emplace_back(it.row(), it.col(), it.value());
        newRegressor.setFromTriplets(regTriplets.begin(), regTriplets.end());
        cur.jointRegressor = std::move(newRegressor);

        cur.shapeBasis = std::move(newShape);
        cur.poseBasis = std::move(newPose);
        cur.faces = std::move(topo.newFaces);
        cur.cornerUVs = std::move(topo.newUVs);
    }
    return model;
}

std::vector<Vec3> SubdividedModel::liftUnposed(
    const std::vector<Vec3>& coarseUnposed, const VecX& normalOffsets) const {
    if (static_cast<int>(coarseUnposed.size()) != coarseVertexCount)
        throw Error("liftUnposed: coarse vertex count mismatch");
    if (normalOffsets.size() != offsetCount())
        throw Error("liftUnposed: offset count mismatch");

    std::vector<Vec3> out(fineVertexCount());
    for (int i = 0; i < coarseVertexCount; ++i)
        out[i] = coarseUnposed[i];
    for (int k = 0; k < offsetCount(); ++k) {
        const int v = coarseVertexCount + k;
        const InsertedVertex& iv = inserted[k];
        out[v] = 0.5 * (out[iv.parentA] + out[iv.parentB]) +
                 normalOffsets[k] * iv.edgeNormal;
    }
    return out;
}

std::vector<Vec3> SubdividedModel::unposedVertices(
    const ShapeParams& shape, const PoseParams& posePar,
    const DisplacementField& displacements, const VecX& normalOffsets) const {
    // Coarse unposed uses the coarse rows of the fine template's bases,
    // which are identical to the coarse template's.
    RiggedTemplate coarseView;
    coarseView.restVertices.assign(fine.restVertices.begin(),
                                   fine.restVertices.begin() + coarseVertexCount);
    coarseView.parents = fine.parents;
    if (fine.shapeBasis.size() > 0)
        coarseView.shapeBasis = fine.shapeBasis.topRows(3 * coarseVertexCount);
    if (fine.poseBasis.size() > 0)
        coarseView.poseBasis = fine.poseBasis.topRows(3 * coarseVertexCount);
    std::vector<Vec3> coarseUnposed =
        unposedRestVertices(coarseView, shape, posePar, displacements);
    return liftUnposed(coarseUnposed, normalOffsets);
}

OffsetFitResult fitInitialOffsets(const SubdividedModel& model) {
    const int n = model.fineVertexCount();
    const int m = model.offsetCount();

    core::TriMesh rest = model.fine.restMesh();
    const core::CotanLaplacian L = core::cotanLaplacian(rest);

    // Per-coordinate design columns: d v / d s_e from the offset expansion.
    std::vector<Triplet> tx, ty, tz;
    for (int v = 0; v < n; ++v)
        for (const auto& [e, coef] : model.offsetSupport[v]) {
            tx.emplace_back(v, e, coef.x());
            ty.emplace_back(v, e, coef.y());
            tz.emplace_back(v, e, coef.z());
        }
    SparseMat Nx(n, m), Ny(n, m), Nz(n, m);
    Nx.setFromTriplets(tx.begin(), tx.end());
    Ny.setFromTriplets(ty.begin(), ty.end());
    Nz.setFromTriplets(tz.begin(), tz.end());

    VecX vx(n), vy(n), vz(n);
    for (int v = 0; v < n; ++v) {
        vx[v] = rest.vertices[v].x();
        vy[v] = rest.vertices[v].y();
        vz[v] = rest.vertices[v].z();
    }

    const SparseMat Ax = L.matrix * Nx;
    const SparseMat Ay = L.matrix * Ny;
    const SparseMat Az = L.matrix * Nz;
    const VecX bx = L.matrix * vx, by = L.matrix * vy, bz = L.matrix * vz;

    OffsetFitResult result;
    result.smoothnessBefore =
        std::sqrt(bx.squaredNorm() + by.squaredNorm() + bz.squaredNorm());

    SparseMat H = SparseMat(Ax.transpose()) * Ax + SparseMat(Ay.transpose()) * Ay +
                  SparseMat(Az.transpose()) * Az;
    const VecX rhs = -(Ax.transpose() * bx + Ay.transpose() * by + Az.transpose() * bz);

    Eigen::SimplicialLDLT<SparseMat> ldlt;
    ldlt.compute(H);
    if (ldlt.info() != Eigen::Success) {
        // Minimum-norm fallback via light Tikhonov damping.
        std::cerr << "fitInitialOffsets: rank-deficient system, damping\n";
        result.rankDeficient = true;
        SparseMat I(m, m);
        I.setIdentity();
        ldlt.compute(SparseMat(H + 1e-10 * I));
        if (ldlt.info() != Eigen::Success)
            throw Error("fitInitialOffsets: factorization failed");
    }
    result.offsets = ldlt.solve(rhs);

    result.smoothnessAfter = std::sqrt((Ax * result.offsets + bx).squaredNorm() +
                                       (Ay * result.offsets + by).squaredNorm() +
                                       (Az * result.offsets + bz).squaredNorm());
    return result;
}

}  // namespace avatar::body
