#pragma once

#include <limits>
#include <memory>
#include <queue>
#include <vector>

#include "grid.hpp"

namespace boundedgeo {

template <int M>
struct DistanceField {
    std::shared_ptr<const StructuredGrid<M>> grid;
    std::vector<double> d;
    bool source_bottom = false;
    bool source_top = false;
    double h = 0.0;

    bool has_source() const { return source_bottom || source_top; }
    // Multilinear interpolation; nullopt outside the slab, +inf near unreachable nodes.
    std::optional<double> at(const Vec<M>& p, double tol = 1e-9) const { return grid->interpolate(d, p, tol); }
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Neighbor offsets of the stencil and its boundary simplices (index lists into
// the offsets). M = 2: the 8-ring and its 8 edges. M = 3: the 26 points of the
// cube shell and 48 triangles, every shell square split through its face centre.
template <int M>
struct Stencil {
    std::vector<std::array<int, M>> offsets;
    std::vector<std::vector<int>> simplices;
    std::vector<std::vector<int>> containing;  // simplices containing each offset

    Stencil() {
        auto find = [&](const std::array<int, M>& o) {
            for (std::size_t i = 0; i < offsets.size(); ++i)
                if (offsets[i] == o) return static_cast<int>(i);
            throw Error("stencil offset missing");
        };
        if constexpr (M == 2) {
            const int ring[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
            for (auto& r : ring) offsets.push_back({r[0], r[1]});
            for (int i = 0; i < 8; ++i) simplices.push_back({i, (i + 1) % 8});
        } else {
            for (int z = -1; z <= 1; ++z)
                for (int y = -1; y <= 1; ++y)
                    for (int x = -1; x <= 1; ++x)
                        if (x || y || z) offsets.push_back({x, y, z});
            for (int axis = 0; axis < 3; ++axis)
                for (int side : {-1, 1}) {
                    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
                    auto pt = [&](int a, int b) {
                        std::array<int, 3> o{};
                        o[static_cast<std::size_t>(axis)] = side;
                        o[static_cast<std::size_t>(u)] = a;
                        o[static_cast<std::size_t>(v)] = b;
                        return find(o);
                    };
                    const int c = pt(0, 0);
                    for (int a : {-1, 1})
                        for (int b : {-1, 1}) {
                            simplices.push_back({c, pt(a, 0), pt(a, b)});
                            simplices.push_back({c, pt(0, b), pt(a, b)});
                        }
                }
        }
        containing.resize(offsets.size());
        for (std::size_t s = 0; s < simplices.size(); ++s)
            for (int i : simplices[s]) containing[static_cast<std::size_t>(i)].push_back(static_cast<int>(s));
    }
};

// min over the simplex conv{e_i} of d(lambda) + |sum lambda_i e_i|_G, interior
// stationary point only (faces are handled by the caller's sub-simplices).
template <int M>
double simplex_update(const Mat<M>& G, const std::vector<Vec<M>>& e, const std::vector<double>& val) {
    const int k = static_cast<int>(e.size()) - 1;
    if (k == 0) return val[0] + std::sqrt(e[0].dot(G * e[0]));
    Eigen::MatrixXd E(M, k);
    Eigen::VectorXd delta(k);
    for (int i = 0; i < k; ++i) {
        E.col(i) = e[static_cast<std::size_t>(i + 1)] - e[0];
        delta[i] = val[static_cast<std::size_t>(i + 1)] - val[0];
    }
    const Eigen::MatrixXd A = E.transpose() * G * E;
    const Eigen::VectorXd b = E.transpose() * G * e[0];
    const double c = e[0].dot(G * e[0]);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::VectorXd Ainv_delta = ldlt.solve(delta), Ainv_b = ldlt.solve(b);
    const double denom = 1.0 - delta.dot(Ainv_delta);
    const double num = c - b.dot(Ainv_b);
    if (!(denom > 0) || !(num > 0)) return kInf;
    const double w = std::sqrt(num / denom);
    const Eigen::VectorXd lambda = -(Ainv_b + w * Ainv_delta);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        if (lambda[i] < 0) return kInf;
        sum += lambda[i];
    }
    if (sum > 1) return kInf;
    return val[0] + delta.dot(lambda) + w;
}

}  // namespace detail

// First-order fast marching: nodes are accepted in increasing order; a trial
// node is updated from every stencil simplex containing the newly accepted
// node whose vertices are all accepted. Metric at the updated node, physical
// displacements (periodic seams unwrapped).
template <int M>
DistanceField<M> eikonal_distance(std::shared_ptr<const StructuredGrid<M>> grid, bool source_bottom,
                                  bool source_top) {
    const auto& G = *grid;
    static const detail::Stencil<M> stencil;
    DistanceField<M> out;
    out.grid = grid;
    out.source_bottom = source_bottom;
    out.source_top = source_top;
    out.h = G.spacing();
    const std::size_t N = G.node_count();
    out.d.assign(N, detail::kInf);
    std::vector<char> accepted(N, 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (std::size_t i = 0; i < N; ++i)
        if ((source_bottom && G.on_face(i, Face::bottom)) || (source_top && G.on_face(i, Face::top))) {
            out.d[i] = 0.0;
            heap.push({0.0, i});
        }
    std::vector<Mat<M>> metric(N);
    for (std::size_t i = 0; i < N; ++i) metric[i] = G.domain().ambient->value(G.position(i));

    const std::size_t S = stencil.offsets.size();
    while (!heap.empty()) {
        const auto [val, a] = heap.top();
        heap.pop();
        if (accepted[a] || val > out.d[a]) continue;
        accepted[a] = 1;
        for (std::size_t oi = 0; oi < S; ++oi) {
            const auto& o = stencil.offsets[oi];
            const auto bopt = G.neighbor(a, o);
            if (!bopt || accepted[*bopt]) continue;
            const std::size_t b = *bopt;
            // In b's stencil, a sits at offset -o.
            std::array<int, M> back;
            for (int k = 0; k < M; ++k) back[static_cast<std::size_t>(k)] = -o[static_cast<std::size_t>(k)];
            std::size_t ai = 0;
            while (stencil.offsets[ai] != back) ++ai;
            double best = out.d[b];
            auto vertex = [&](std::size_t si, Vec<M>& e, double& v) {
                const auto n = G.neighbor(b, stencil.offsets[si], &e);
                if (!n || !accepted[*n]) return false;
                v = out.d[*n];
                return true;
            };
            Vec<M> ea;
            double va = 0.0;
            vertex(ai, ea, va);
            best = std::min(best, detail::simplex_update<M>(metric[b], {ea}, {va}));
            for (int si : stencil.containing[ai]) {
                const auto& simplex = stencil.simplices[static_cast<std::size_t>(si)];
                std::vector<Vec<M>> es;
                std::vector<double> vs;
                bool ok = true;
                for (int vi : simplex) {
                    Vec<M> e;
                    double v;
                    if (!vertex(static_cast<std::size_t>(vi), e, v)) {
                        ok = false;
                        break;
                    }
                    es.push_back(e);
                    vs.push_back(v);
                }
                if (!ok) continue;
                best = std::min(best, detail::simplex_update<M>(metric[b], es, vs));
                if (es.size() == 3) {
                    // Edges of the triangle through a.
                    for (std::size_t j = 0; j < 3; ++j) {
                        if (static_cast<std::size_t>(simplex[j]) == ai) continue;
                        std::size_t ia = 0;
                        while (static_cast<std::size_t>(simplex[ia]) != ai) ++ia;
                        best = std::min(best, detail::simplex_update<M>(metric[b], {es[ia], es[j]}, {vs[ia], vs[j]}));
                    }
                }
            }
            if (best < out.d[b]) {
                out.d[b] = best;
                heap.push({best, b});
            }
        }
    }
    return out;
}

template <int M>
DistanceField<M> eikonal_distance(const DomainSpec<M>& d, int n) {
    if (n < 16) throw ArgumentError("eikonal_distance needs n >= 16 nodes per axis");
    std::array<int, M> cells;
    cells.fill(n);
    auto grid = std::make_shared<const StructuredGrid<M>>(d, cells);
    return eikonal_distance<M>(grid, d.dirichlet_bottom, d.dirichlet_top);
}

}  // namespace boundedgeo
