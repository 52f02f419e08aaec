#pragma once

#include <array>
#include <vector>

#include "grid.hpp"

namespace boundedgeo {

// Tensor Gauss rule on [0,1]^M; weights sum to 1.
template <int M>
struct QuadPoint {
    Vec<M> local;
    double weight = 0.0;
};

template <int M>
std::vector<QuadPoint<M>> gauss_rule(int per_axis) {
    std::vector<double> x, w;
    if (per_axis == 2) {
        const double a = 0.5 / std::sqrt(3.0);
        x = {0.5 - a, 0.5 + a};
        w = {0.5, 0.5};
    } else if (per_axis == 3) {
        const double a = 0.5 * std::sqrt(0.6);
        x = {0.5 - a, 0.5, 0.5 + a};
        w = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    } else {
        throw ArgumentError("gauss_rule supports 2 or 3 points per axis");
    }
    std::vector<QuadPoint<M>> out;
    std::size_t total = 1;
    for (int a = 0; a < M; ++a) total *= x.size();
    for (std::size_t i = 0; i < total; ++i) {
        QuadPoint<M> q;
        q.weight = 1.0;
        std::size_t r = i;
        for (int a = 0; a < M; ++a) {
            q.local[a] = x[r % x.size()];
            q.weight *= w[r % x.size()];
            r /= x.size();
        }
        out.push_back(q);
    }
    return out;
}

// Multilinear shape functions of one mapped cell at one quadrature point.
// grad holds physical-coordinate gradients; dx is the coordinate volume
// element (weight * cell volume * |det J|), dvol = dx * sqrt(det g).
template <int M>
struct ElementSample {
    static constexpr int K = 1 << M;
    Vec<M> point;
    std::array<double, K> N{};
    std::array<Vec<M>, K> grad{};
    Mat<M> ginv;
    double dx = 0.0;
    double dvol = 0.0;
};

template <int M>
ElementSample<M> element_sample(const StructuredGrid<M>& G, const typename StructuredGrid<M>::Index& cell,
                                const QuadPoint<M>& q) {
    constexpr int K = 1 << M;
    ElementSample<M> e;
    Vec<M> step, xi = G.cell_origin(cell);
    double cellvol = 1.0;
    for (int a = 0; a < M; ++a) {
        step[a] = G.logical_step(a);
        xi[a] += q.local[a] * step[a];
        cellvol *= step[a];
    }
    e.point = G.map(xi);
    const Mat<M> J = G.map_jacobian(xi);
    const double detJ = J.determinant();
    if (!(detJ > 0)) throw DegenerateSlab("degenerate slab: non-positive map Jacobian at " + format_point<M>(e.point));
    const Mat<M> JinvT = J.inverse().transpose();
    const Mat<M> g = eval_metric<M>(*G.domain().ambient, e.point);
    e.ginv = g.inverse();
    e.dx = q.weight * cellvol * detJ;
    e.dvol = e.dx * std::sqrt(g.determinant());
    for (int c = 0; c < K; ++c) {
        double n = 1.0;
        Vec<M> dn;
        for (int a = 0; a < M; ++a) {
            const bool hi = (c >> a) & 1;
            n *= hi ? q.local[a] : 1.0 - q.local[a];
            double d = hi ? 1.0 : -1.0;
            for (int b = 0; b < M; ++b)
                if (b != a) d *= ((c >> b) & 1) ? q.local[b] : 1.0 - q.local[b];
            dn[a] = d / step[a];
        }
        e.N[static_cast<std::size_t>(c)] = n;
        e.grad[static_cast<std::size_t>(c)] = JinvT * dn;
    }
    return e;
}

// Value and physical gradient of the multilinear interpolant at a sample.
template <int M>
std::pair<double, Vec<M>> interpolant_at(const ElementSample<M>& e, const std::array<std::size_t, (1 << M)>& nodes,
                                         const std::vector<double>& u) {
    double v = 0.0;
    Vec<M> g = Vec<M>::Zero();
    for (std::size_t c = 0; c < nodes.size(); ++c) {
        v += e.N[c] * u[nodes[c]];
        g += e.grad[c] * u[nodes[c]];
    }
    return {v, g};
}

// Tensor Gauss quadrature over one face of the slab, parametrized by the base
// coordinates with the induced area element. body(face corner nodes, shape
// values, dA) is called per point, cells in grid order.
template <int M, class Body>
void face_quadrature(const StructuredGrid<M>& G, Face f, int per_axis, Body&& body) {
    constexpr int B = M - 1, NF = 1 << B;
    const auto rule = gauss_rule<B>(per_axis);
    const auto& d = G.domain();
    const int layer = f == Face::bottom ? 0 : G.cells(B) - 1;
    const std::size_t lift = f == Face::top ? NF : 0;  // corner bit B set on the top layer
    double area = 1.0;
    for (int a = 0; a < B; ++a) area *= G.logical_step(a);
    for (std::size_t c = 0; c < G.cell_count(); ++c) {
        const auto cell = G.cell_index(c);
        if (cell[static_cast<std::size_t>(B)] != layer) continue;
        const auto all = G.cell_nodes(cell);
        std::array<std::size_t, NF> nodes{};
        for (std::size_t k = 0; k < NF; ++k) nodes[k] = all[k + lift];
        const Vec<M> origin = G.cell_origin(cell);
        for (const auto& q : rule) {
            Vec<B> x;
            for (int a = 0; a < B; ++a) x[a] = origin[a] + q.local[a] * G.logical_step(a);
            const double dA = q.weight * area * std::sqrt(d.induced_metric(f, x).determinant());
            std::array<double, NF> N{};
            for (int k = 0; k < NF; ++k) {
                double v = 1.0;
                for (int a = 0; a < B; ++a) v *= ((k >> a) & 1) ? q.local[a] : 1.0 - q.local[a];
                N[static_cast<std::size_t>(k)] = v;
            }
            body(nodes, N, dA);
        }
    }
}

// ||u||^2_{L2} and |du|^2_{L2} of the multilinear interpolant, metric g.
template <int M>
std::pair<double, double> h1_parts(const StructuredGrid<M>& G, const std::vector<double>& u, int per_axis = 2) {
    const auto rule = gauss_rule<M>(per_axis);
    double l2 = 0.0, semi = 0.0;
    for (std::size_t c = 0; c < G.cell_count(); ++c) {
        const auto cell = G.cell_index(c);
        const auto nodes = G.cell_nodes(cell);
        for (const auto& q : rule) {
            const auto e = element_sample<M>(G, cell, q);
            const auto [v, g] = interpolant_at<M>(e, nodes, u);
            l2 += v * v * e.dvol;
            semi += g.dot(e.ginv * g) * e.dvol;
        }
    }
    return {l2, semi};
}

}  // namespace boundedgeo
