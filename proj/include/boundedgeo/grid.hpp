#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "domain.hpp"

namespace boundedgeo {

// Logically rectangular grid on Omega(top, bot), mapped by
// (x, s) -> (x, bot(x) + s (top(x) - bot(x))). Axis M-1 is the vertical s in [0, 1].
// Periodic base axes carry n nodes, box axes n + 1.
template <int M>
class StructuredGrid {
public:
    static constexpr int B = M - 1;
    static constexpr int kCorners = 1 << M;
    using Index = std::array<int, M>;

    StructuredGrid(const DomainSpec<M>& domain, const std::array<int, M>& cells) : domain_(domain), cells_(cells) {
        for (int a = 0; a < M; ++a)
            if (cells_[static_cast<std::size_t>(a)] < 1) throw ArgumentError("grid needs at least one cell per axis");
        total_ = 1;
        for (int a = 0; a < M; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            nodes_[ua] = (a < B && domain.periodic(a)) ? cells_[ua] : cells_[ua] + 1;
            stride_[ua] = total_;
            total_ *= static_cast<std::size_t>(nodes_[ua]);
        }
        positions_.resize(total_);
        for (std::size_t i = 0; i < total_; ++i) positions_[i] = map(logical(index(i)));
        for (std::size_t i = 0; i < total_; ++i) {
            for (int a = 0; a < M; ++a) {
                Index o{};
                o[static_cast<std::size_t>(a)] = 1;
                Vec<M> disp;
                if (neighbor(i, o, &disp)) h_ = std::max(h_, edge_length(i, disp));
            }
        }
    }

    const DomainSpec<M>& domain() const { return domain_; }
    int cells(int axis) const { return cells_[static_cast<std::size_t>(axis)]; }
    int nodes(int axis) const { return nodes_[static_cast<std::size_t>(axis)]; }
    std::size_t node_count() const { return total_; }
    std::size_t cell_count() const {
        std::size_t c = 1;
        for (int a = 0; a < M; ++a) c *= static_cast<std::size_t>(cells_[static_cast<std::size_t>(a)]);
        return c;
    }
    // Largest metric length of an axis-aligned grid edge.
    double spacing() const { return h_; }
    double logical_step(int axis) const {
        if (axis == B) return 1.0 / cells_[static_cast<std::size_t>(B)];
        return domain_.extent[static_cast<std::size_t>(axis)].length() / cells_[static_cast<std::size_t>(axis)];
    }

    std::size_t flat(const Index& id) const {
        std::size_t f = 0;
        for (int a = 0; a < M; ++a) f += static_cast<std::size_t>(id[static_cast<std::size_t>(a)]) * stride_[static_cast<std::size_t>(a)];
        return f;
    }
    Index index(std::size_t f) const {
        Index id;
        for (int a = 0; a < M; ++a) {
            id[static_cast<std::size_t>(a)] = static_cast<int>(f % static_cast<std::size_t>(nodes_[static_cast<std::size_t>(a)]));
            f /= static_cast<std::size_t>(nodes_[static_cast<std::size_t>(a)]);
        }
        return id;
    }

    Vec<M> logical(const Index& id) const {
        Vec<M> xi;
        for (int a = 0; a < B; ++a)
            xi[a] = domain_.extent[static_cast<std::size_t>(a)].lo + id[static_cast<std::size_t>(a)] * logical_step(a);
        xi[B] = static_cast<double>(id[static_cast<std::size_t>(B)]) / cells_[static_cast<std::size_t>(B)];
        return xi;
    }

    Vec<M> map(const Vec<M>& xi) const {
        const Vec<B> x = xi.template head<B>();
        const double b = domain_.height(Face::bottom, x), t = domain_.height(Face::top, x);
        Vec<M> p;
        p.template head<B>() = x;
        p[B] = b + xi[B] * (t - b);
        return p;
    }
    // J(a, b) = d X_a / d xi_b.
    Mat<M> map_jacobian(const Vec<M>& xi) const {
        const Vec<B> x = xi.template head<B>();
        const auto bj = domain_.face_jet(Face::bottom, x), tj = domain_.face_jet(Face::top, x);
        Mat<M> J = Mat<M>::Identity();
        for (int a = 0; a < B; ++a)
            J(B, a) = bj.d[static_cast<std::size_t>(a)] + xi[B] * (tj.d[static_cast<std::size_t>(a)] - bj.d[static_cast<std::size_t>(a)]);
        J(B, B) = tj.v - bj.v;
        return J;
    }

    const Vec<M>& position(std::size_t f) const { return positions_[f]; }

    bool on_face(std::size_t f, Face which) const {
        const int j = index(f)[static_cast<std::size_t>(B)];
        return which == Face::bottom ? j == 0 : j == cells_[static_cast<std::size_t>(B)];
    }

    // Neighbor at integer offset; disp receives its physical displacement,
    // unwrapped across periodic seams.
    std::optional<std::size_t> neighbor(std::size_t f, const Index& offset, Vec<M>* disp = nullptr) const {
        Index id = index(f);
        Vec<M> shift = Vec<M>::Zero();
        for (int a = 0; a < M; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            int k = id[ua] + offset[ua];
            if (a < B && domain_.periodic(a)) {
                const double period = domain_.extent[ua].length();
                while (k < 0) { k += nodes_[ua]; shift[a] -= period; }
                while (k >= nodes_[ua]) { k -= nodes_[ua]; shift[a] += period; }
            } else if (k < 0 || k >= nodes_[ua]) {
                return std::nullopt;
            }
            id[ua] = k;
        }
        const std::size_t g = flat(id);
        if (disp) *disp = positions_[g] + shift - positions_[f];
        return g;
    }

    double edge_length(std::size_t f, const Vec<M>& disp) const {
        const Mat<M> g = domain_.ambient->value(positions_[f] + 0.5 * disp);
        return std::sqrt(disp.dot(g * disp));
    }

    // Cell corners in lexicographic order of the corner bits (bit a = +1 along axis a).
    std::array<std::size_t, kCorners> cell_nodes(const Index& cell) const {
        std::array<std::size_t, kCorners> out{};
        for (int c = 0; c < kCorners; ++c) {
            Index id = cell;
            for (int a = 0; a < M; ++a) {
                const auto ua = static_cast<std::size_t>(a);
                id[ua] += (c >> a) & 1;
                if (id[ua] >= nodes_[ua]) id[ua] -= nodes_[ua];  // periodic seam
            }
            out[static_cast<std::size_t>(c)] = flat(id);
        }
        return out;
    }
    Index cell_index(std::size_t c) const {
        Index id;
        for (int a = 0; a < M; ++a) {
            id[static_cast<std::size_t>(a)] = static_cast<int>(c % static_cast<std::size_t>(cells_[static_cast<std::size_t>(a)]));
            c /= static_cast<std::size_t>(cells_[static_cast<std::size_t>(a)]);
        }
        return id;
    }
    // Logical coordinates of the lower corner of a cell (unwrapped).
    Vec<M> cell_origin(const Index& cell) const { return logical(cell); }

    // Logical coordinates of a physical point; periodic axes wrapped into range,
    // s clamped to [0, 1] after a tolerance check.
    std::optional<Vec<M>> to_logical(const Vec<M>& p, double tol = 1e-9) const {
        const Vec<M> q = domain_.wrap(p);
        Vec<M> xi;
        for (int a = 0; a < B; ++a) {
            const auto& e = domain_.extent[static_cast<std::size_t>(a)];
            if (!e.periodic && (q[a] < e.lo - tol || q[a] > e.hi + tol)) return std::nullopt;
            xi[a] = std::clamp(q[a], e.lo, e.hi);
        }
        const Vec<B> x = xi.template head<B>();
        const double b = domain_.height(Face::bottom, x), t = domain_.height(Face::top, x);
        const double s = (q[B] - b) / (t - b);
        if (s < -tol || s > 1 + tol) return std::nullopt;
        xi[B] = std::clamp(s, 0.0, 1.0);
        return xi;
    }

    // Multilinear interpolation of nodal values in logical coordinates.
    double interpolate_logical(const std::vector<double>& values, const Vec<M>& xi) const {
        Index cell;
        Vec<M> w;
        for (int a = 0; a < M; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            const double lo = a < B ? domain_.extent[ua].lo : 0.0;
            const double u = (xi[a] - lo) / logical_step(a);
            int k = static_cast<int>(std::floor(u));
            k = std::clamp(k, 0, cells_[ua] - 1);
            cell[ua] = k;
            w[a] = std::clamp(u - k, 0.0, 1.0);
        }
        const auto corners = cell_nodes(cell);
        double acc = 0.0;
        for (int c = 0; c < kCorners; ++c) {
            double wt = 1.0;
            for (int a = 0; a < M; ++a) wt *= ((c >> a) & 1) ? w[a] : 1.0 - w[a];
            if (wt == 0.0) continue;
            const double v = values[corners[static_cast<std::size_t>(c)]];
            if (!std::isfinite(v)) return v;
            acc += wt * v;
        }
        return acc;
    }

    std::optional<double> interpolate(const std::vector<double>& values, const Vec<M>& p, double tol = 1e-9) const {
        const auto xi = to_logical(p, tol);
        if (!xi) return std::nullopt;
        return interpolate_logical(values, *xi);
    }

    // Lumped (row-sum) volume weights of the nodes: sum of sqrt(det g) |det J|
    // over cell corners at the corner points, times cell volume / 2^M.
    std::vector<double> lumped_volume() const {
        std::vector<double> w(total_, 0.0);
        double cellvol = 1.0;
        for (int a = 0; a < M; ++a) cellvol *= logical_step(a);
        for (std::size_t c = 0; c < cell_count(); ++c) {
            const Index cell = cell_index(c);
            const auto corners = cell_nodes(cell);
            for (int k = 0; k < kCorners; ++k) {
                Vec<M> xi = cell_origin(cell);
                for (int a = 0; a < M; ++a)
                    if ((k >> a) & 1) xi[a] += logical_step(a);
                const double jac = std::abs(map_jacobian(xi).determinant());
                const double vol = std::sqrt(domain_.ambient->value(map(xi)).determinant());
                w[corners[static_cast<std::size_t>(k)]] += jac * vol * cellvol / kCorners;
            }
        }
        return w;
    }

private:
    DomainSpec<M> domain_;
    std::array<int, M> cells_;
    std::array<int, M> nodes_{};
    std::array<std::size_t, M> stride_{};
    std::size_t total_ = 0;
    std::vector<Vec<M>> positions_;
    double h_ = 0.0;
};

}  // namespace boundedgeo
