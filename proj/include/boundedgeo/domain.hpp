#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "metric.hpp"

namespace boundedgeo {

enum class Face { bottom, top };

inline const char* face_name(Face f) { return f == Face::bottom ? "bottom" : "top"; }
inline Face parse_face(const std::string& s) {
    if (s == "bottom") return Face::bottom;
    if (s == "top") return Face::top;
    throw ArgumentError("unknown face '" + s + "' (expected 'bottom' or 'top')");
}

struct AxisExtent {
    double lo = 0.0;
    double hi = 1.0;
    bool periodic = false;
    double length() const { return hi - lo; }
};

// Plain description of a slab, as read from a run configuration.
struct DomainConfig {
    int dimension = 2;
    std::string base_family = "flat";  // "flat" or "conformal"
    std::string phi;                   // conformal factor of the base metric
    ParameterMap parameters;
    std::string top = "1";
    std::string bot = "0";
    std::vector<AxisExtent> extent;  // one per base axis; default [0, 2 pi) periodic
    std::vector<std::string> dirichlet{"bottom"};
    int sample_resolution = 256;
};

// Omega(top, bot) = {(x, t) : bot(x) <= t <= top(x)} inside M0 x R, with the
// boundary split into Dirichlet and Neumann faces. Ambient coordinates are
// (x_1, ..., x_{M-1}, t).
template <int M>
struct DomainSpec {
    static constexpr int B = M - 1;

    MetricPtr<B> base;
    MetricPtr<M> ambient;
    Expression top;
    Expression bot;
    std::vector<std::string> base_names;
    ParameterMap parameters;
    std::array<AxisExtent, B> extent{};
    bool dirichlet_bottom = true;
    bool dirichlet_top = false;
    double epsilon = 0.0;          // sampled min(top - bot)
    double max_height = 0.0;       // sampled max(top - bot)
    int epsilon_resolution = 0;

    bool is_dirichlet(Face f) const { return f == Face::bottom ? dirichlet_bottom : dirichlet_top; }
    bool has_dirichlet() const { return dirichlet_bottom || dirichlet_top; }
    bool periodic(int axis) const { return extent[static_cast<std::size_t>(axis)].periodic; }

    const Expression& face_expr(Face f) const { return f == Face::bottom ? bot : top; }

    double height(Face f, const Vec<B>& x) const {
        return face_expr(f)(std::span<const double>(x.data(), B));
    }
    HyperDual<B> face_jet(Face f, const Vec<B>& x) const {
        return face_expr(f).template jet<B>(std::span<const double>(x.data(), B));
    }
    Vec<M> face_point(Face f, const Vec<B>& x) const {
        Vec<M> p;
        p.template head<B>() = x;
        p[B] = height(f, x);
        return p;
    }

    // Maps periodic coordinates into [lo, hi).
    Vec<M> wrap(Vec<M> p) const {
        for (int a = 0; a < B; ++a) {
            const auto& e = extent[static_cast<std::size_t>(a)];
            if (e.periodic) {
                double u = std::fmod(p[a] - e.lo, e.length());
                if (u < 0) u += e.length();
                p[a] = e.lo + u;
            }
        }
        return p;
    }

    bool contains(const Vec<M>& p, double tol = 0.0) const {
        const Vec<M> q = wrap(p);
        for (int a = 0; a < B; ++a) {
            const auto& e = extent[static_cast<std::size_t>(a)];
            if (!e.periodic && (q[a] < e.lo - tol || q[a] > e.hi + tol)) return false;
        }
        const Vec<B> x = q.template head<B>();
        return q[B] >= height(Face::bottom, x) - tol && q[B] <= height(Face::top, x) + tol;
    }

    // Coordinate tangent vectors X_i = e_i + d_i f e_t of a face.
    std::array<Vec<M>, B> face_tangents(Face f, const Vec<B>& x) const {
        const auto j = face_jet(f, x);
        std::array<Vec<M>, B> X;
        for (int i = 0; i < B; ++i) {
            X[static_cast<std::size_t>(i)] = Vec<M>::Zero();
            X[static_cast<std::size_t>(i)][i] = 1.0;
            X[static_cast<std::size_t>(i)][B] = j.d[static_cast<std::size_t>(i)];
        }
        return X;
    }

    // Induced metric on a face in base coordinates.
    Mat<B> induced_metric(Face f, const Vec<B>& x) const {
        const auto X = face_tangents(f, x);
        const Mat<M> g = ambient->value(face_point(f, x));
        Mat<B> h;
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j) h(i, j) = X[static_cast<std::size_t>(i)].dot(g * X[static_cast<std::size_t>(j)]);
        return h;
    }
};

namespace detail {

template <int B>
std::vector<Vec<B>> base_samples(const std::array<AxisExtent, B>& extent, int n) {
    std::array<int, B> count{};
    std::size_t total = 1;
    for (int a = 0; a < B; ++a) {
        count[static_cast<std::size_t>(a)] = extent[static_cast<std::size_t>(a)].periodic ? n : n + 1;
        total *= static_cast<std::size_t>(count[static_cast<std::size_t>(a)]);
    }
    std::vector<Vec<B>> out;
    out.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t r = flat;
        Vec<B> x;
        for (int a = 0; a < B; ++a) {
            const auto c = static_cast<std::size_t>(count[static_cast<std::size_t>(a)]);
            const auto k = r % c;
            r /= c;
            const auto& e = extent[static_cast<std::size_t>(a)];
            x[a] = e.lo + e.length() * static_cast<double>(k) / n;
        }
        out.push_back(x);
    }
    return out;
}

template <int B>
MetricPtr<B> make_base_metric(const DomainConfig& cfg, const std::vector<std::string>& names) {
    if (cfg.base_family == "flat") return std::make_shared<FlatMetric<B>>();
    if (cfg.base_family == "conformal")
        return std::make_shared<ConformalMetric<B>>(Expression::parse(cfg.phi, names, cfg.parameters));
    throw ArgumentError("unknown base family '" + cfg.base_family + "'");
}

}  // namespace detail

template <int M>
std::vector<Vec<M - 1>> base_samples(const DomainSpec<M>& d, int n) {
    return detail::base_samples<M - 1>(d.extent, n);
}

// Validates a slab description and records epsilon = sampled min(top - bot).
template <int M>
DomainSpec<M> build_domain(const DomainConfig& cfg, bool require_dirichlet = false) {
    constexpr int B = M - 1;
    if (cfg.dimension != M)
        throw ArgumentError("domain dimension " + std::to_string(cfg.dimension) + " does not match " +
                            std::to_string(M));
    DomainSpec<M> d;
    d.base_names = default_coordinate_names(B);
    d.parameters = cfg.parameters;
    std::vector<std::string> names = d.base_names;
    d.top = Expression::parse(cfg.top, names, cfg.parameters);
    d.bot = Expression::parse(cfg.bot, names, cfg.parameters);
    d.base = detail::make_base_metric<B>(cfg, names);
    d.ambient = std::make_shared<ProductMetric<M>>(d.base);
    if (!cfg.extent.empty() && cfg.extent.size() != static_cast<std::size_t>(B))
        throw ArgumentError("extent must list " + std::to_string(B) + " base axes");
    for (int a = 0; a < B; ++a) {
        if (cfg.extent.empty())
            d.extent[static_cast<std::size_t>(a)] = AxisExtent{0.0, 2.0 * std::numbers::pi, true};
        else
            d.extent[static_cast<std::size_t>(a)] = cfg.extent[static_cast<std::size_t>(a)];
        if (!(d.extent[static_cast<std::size_t>(a)].length() > 0))
            throw ArgumentError("extent of axis " + std::to_string(a) + " is empty");
    }
    d.dirichlet_bottom = d.dirichlet_top = false;
    for (const auto& f : cfg.dirichlet) (parse_face(f) == Face::bottom ? d.dirichlet_bottom : d.dirichlet_top) = true;
    if (require_dirichlet && !d.has_dirichlet()) throw NoDirichletFace("no Dirichlet face");

    d.epsilon_resolution = cfg.sample_resolution;
    d.epsilon = std::numeric_limits<double>::infinity();
    d.max_height = 0.0;
    for (const auto& x : detail::base_samples<B>(d.extent, cfg.sample_resolution)) {
        const double w = d.height(Face::top, x) - d.height(Face::bottom, x);
        if (!(w > 0.0)) throw DegenerateSlab("degenerate slab: top - bot = " + std::to_string(w) + " at x = " +
                                             format_point<B>(x));
        d.epsilon = std::min(d.epsilon, w);
        d.max_height = std::max(d.max_height, w);
    }
    for (const auto& x : detail::base_samples<B>(d.extent, 8)) (void)eval_metric<M>(*d.ambient, d.face_point(Face::bottom, x));
    return d;
}

// b - a, nearest periodic image.
template <int M>
Vec<M> periodic_delta(const DomainSpec<M>& d, const Vec<M>& a, const Vec<M>& b) {
    Vec<M> diff = b - a;
    for (int k = 0; k < M - 1; ++k)
        if (d.periodic(k)) {
            const double L = d.extent[static_cast<std::size_t>(k)].length();
            diff[k] -= L * std::round(diff[k] / L);
        }
    return diff;
}

// Metric length of the coordinate segment, metric at its midpoint.
template <int M>
double chord_distance(const DomainSpec<M>& d, const Vec<M>& a, const Vec<M>& b) {
    const Vec<M> diff = periodic_delta<M>(d, a, b);
    return std::sqrt(diff.dot(d.ambient->value(a + 0.5 * diff) * diff));
}

template <int M>
struct BoundaryPoint {
    Face which = Face::bottom;
    Vec<M - 1> x;
    Vec<M> point;
    Vec<M> nu;  // outward unit normal
};

// Outward unit normal: the g-dual of +-(dt - df), normalised.
template <int M>
BoundaryPoint<M> unit_normal(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which) {
    constexpr int B = M - 1;
    BoundaryPoint<M> bp;
    bp.which = which;
    bp.x = x;
    bp.point = d.face_point(which, x);
    const auto f = d.face_jet(which, x);
    Vec<M> n;
    for (int i = 0; i < B; ++i) n[i] = -f.d[static_cast<std::size_t>(i)];
    n[B] = 1.0;
    if (which == Face::bottom) n = -n;
    const Mat<M> g = eval_metric<M>(*d.ambient, bp.point);
    const Vec<M> raised = g.ldlt().solve(n);
    bp.nu = raised / std::sqrt(n.dot(raised));
    return bp;
}

template <int M>
struct ShapeReport {
    Face which = Face::bottom;
    Vec<M - 1> x;
    Mat<M - 1> induced;  // h_ij
    Mat<M - 1> II;       // II_ij = g(nabla_{X_i} X_j, nu) with nu outward
    double mean_curvature = 0.0;  // tr(h^{-1} II)
    // Sampled over the face: "II", "nabla II", "nabla^2 II" (norms w.r.t. h).
    std::map<std::string, double> sup_norms;
};

namespace detail {

template <int M>
Mat<M - 1> second_fundamental_form(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which) {
    constexpr int B = M - 1;
    const auto bp = unit_normal<M>(d, x, which);
    const auto f = d.face_jet(which, x);
    const auto X = d.face_tangents(which, x);
    const auto G = christoffel<M>(d.ambient->jet(bp.point, 1));
    const Mat<M> g = d.ambient->value(bp.point);
    Mat<B> II;
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j) {
            Vec<M> acc = Vec<M>::Zero();
            acc[B] = f.dd[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            for (int k = 0; k < M; ++k)
                acc[k] += X[static_cast<std::size_t>(i)].dot(G[k] * X[static_cast<std::size_t>(j)]);
            II(i, j) = acc.dot(g * bp.nu);
        }
    return 0.5 * (II + II.transpose());
}

template <int B>
ChristoffelSymbols<B> christoffel_of(const std::function<Mat<B>(const Vec<B>&)>& h, const Vec<B>& x, double step) {
    MetricJet<B> j = finite_difference_jet<B>(h, x, 1, step);
    return christoffel<B>(j);
}

}  // namespace detail

template <int M>
Tensor<M - 1> second_fundamental_tensor(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which) {
    constexpr int B = M - 1;
    const Mat<B> II = detail::second_fundamental_form<M>(d, x, which);
    Tensor<B> t(2);
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j) t(i, j) = II(i, j);
    return t;
}

// Pointwise II and mean curvature; when sup_resolution > 0 also samples the
// face for sup norms of II and of its first two tangential covariant
// derivatives (central differences with induced-metric Christoffel corrections).
template <int M>
ShapeReport<M> shape_report(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, int sup_resolution = 0,
                            double fd_step = 1e-3) {
    constexpr int B = M - 1;
    ShapeReport<M> rep;
    rep.which = which;
    rep.x = x;
    rep.induced = d.induced_metric(which, x);
    rep.II = detail::second_fundamental_form<M>(d, x, which);
    rep.mean_curvature = (rep.induced.inverse() * rep.II).trace();
    if (sup_resolution <= 0) return rep;

    std::function<Mat<B>(const Vec<B>&)> h = [&](const Vec<B>& y) { return d.induced_metric(which, y); };
    std::function<Tensor<B>(const Vec<B>&)> IIf = [&](const Vec<B>& y) {
        return second_fundamental_tensor<M>(d, y, which);
    };
    std::function<Tensor<B>(const Vec<B>&)> dIIf = [&](const Vec<B>& y) {
        return covariant_derivative<B>(IIf, y, detail::christoffel_of<B>(h, y, 1e-5), fd_step);
    };
    double s0 = 0, s1 = 0, s2 = 0;
    for (const auto& y : base_samples<M>(d, sup_resolution)) {
        const Mat<B> hy = h(y);
        const auto Gy = detail::christoffel_of<B>(h, y, 1e-5);
        s0 = std::max(s0, tensor_norm<B>(IIf(y), hy));
        s1 = std::max(s1, tensor_norm<B>(covariant_derivative<B>(IIf, y, Gy, fd_step), hy));
        s2 = std::max(s2, tensor_norm<B>(covariant_derivative<B>(dIIf, y, Gy, fd_step), hy));
    }
    rep.sup_norms["II"] = s0;
    rep.sup_norms["nabla II"] = s1;
    rep.sup_norms["nabla^2 II"] = s2;
    return rep;
}

}  // namespace boundedgeo
