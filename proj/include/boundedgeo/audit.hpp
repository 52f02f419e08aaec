#pragma once

#include <limits>

#include "bounds.hpp"
#include "fiber.hpp"

namespace boundedgeo {

struct FiniteWidthReport {
    double R = 0.0;              // max over nodes of dist(., boundary_D)
    bool infinite = false;       // some node unreachable from the Dirichlet part
    double h = 0.0;
    std::size_t nodes = 0;
    std::size_t unreachable = 0;
};

template <int M>
FiniteWidthReport finite_width_report(const DistanceField<M>& field) {
    FiniteWidthReport r;
    r.h = field.h;
    r.nodes = field.d.size();
    for (double v : field.d) {
        if (std::isfinite(v))
            r.R = std::max(r.R, v);
        else
            ++r.unreachable;
    }
    r.infinite = !field.has_source() || r.unreachable > 0;
    if (r.infinite) r.R = std::numeric_limits<double>::infinity();
    return r;
}

// Induced metric of a face as a metric field on the base coordinates.
// h_ij = X_i^T g(x, f(x)) X_j with X_i = e_i + f_i e_t; first derivatives in
// closed form, second derivatives by central differences.
template <int M>
class FaceMetric final : public MetricField<M - 1> {
public:
    static constexpr int B = M - 1;
    FaceMetric(const DomainSpec<M>& d, Face which) : d_(d), which_(which) {}
    MetricJet<B> jet(const Vec<B>& x, int order = 2) const override {
        if (order >= 2)
            return finite_difference_jet<B>([&](const Vec<B>& y) { return value(y); }, x, order);
        const auto f = d_.face_jet(which_, x);
        const auto gj = d_.ambient->jet(d_.face_point(which_, x), order);
        std::array<Vec<M>, B> X;
        for (int i = 0; i < B; ++i) {
            X[static_cast<std::size_t>(i)] = Vec<M>::Unit(i);
            X[static_cast<std::size_t>(i)][B] = f.d[static_cast<std::size_t>(i)];
        }
        MetricJet<B> j;
        j.order = order;
        for (int a = 0; a < B; ++a)
            for (int b = 0; b < B; ++b) j.g(a, b) = X[static_cast<std::size_t>(a)].dot(gj.g * X[static_cast<std::size_t>(b)]);
        if (order >= 1) {
            const Vec<M> et = Vec<M>::Unit(B);
            for (int k = 0; k < B; ++k) {
                const Mat<M> dg = gj.dg[k] + f.d[static_cast<std::size_t>(k)] * gj.dg[B];
                for (int a = 0; a < B; ++a)
                    for (int b = 0; b < B; ++b) {
                        const auto& Xa = X[static_cast<std::size_t>(a)];
                        const auto& Xb = X[static_cast<std::size_t>(b)];
                        j.dg[k](a, b) = Xa.dot(dg * Xb) +
                                        f.dd[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] * et.dot(gj.g * Xb) +
                                        f.dd[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] * Xa.dot(gj.g * et);
                    }
            }
        }
        return j;
    }
    Mat<B> value(const Vec<B>& x) const override { return d_.induced_metric(which_, x); }
    bool is_euclidean() const override { return d_.ambient->is_euclidean() && d_.face_expr(which_).is_constant(); }
    std::string family() const override { return std::string("face:") + face_name(which_); }

private:
    const DomainSpec<M>& d_;
    Face which_;
};

struct AuditOptions {
    int n = 32;                    // distance-field nodes per axis
    int boundary_samples = 16;     // fibers per base axis per face
    int interior_samples = 4;      // interior geodesic starts per axis
    int bounds_resolution = 12;    // curvature / II samples per axis
    double conjugate_length = 10.0;
    double injectivity_cap = 10.0;  // stands in for infinite injectivity radii
};

struct GeometryAudit {
    double epsilon = 0.0;
    int epsilon_resolution = 0;
    // (N)
    double r_boundary = 0.0;
    double r_boundary_tol = 0.0;
    std::size_t fold_hits = 0;
    // (I)
    double conjugate_min = std::numeric_limits<double>::infinity();  // inf: none up to conjugate_length
    double loop_min = std::numeric_limits<double>::infinity();       // shortest sampled periodic coordinate loop
    double inj_interior = 0.0;
    double inj_boundary = 0.0;
    double r_fc = 0.0;
    // (B)
    std::map<std::string, double> curvature_norms;
    double ricci_lower = 0.0;
    std::map<std::string, double> shape_norms;  // "<face> II", ...
    AuditOptions options;
};

namespace detail {

// Half the shortest sampled coordinate loop along periodic axes, metric g on base coords.
template <int B>
double loop_length(const std::array<AxisExtent, B>& ext, const std::function<Mat<B>(const Vec<B>&)>& g, int samples) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < B; ++a) {
        if (!ext[static_cast<std::size_t>(a)].periodic) continue;
        for (const auto& x0 : base_samples<B>(ext, std::max(2, samples / 2))) {
            const int K = 256;
            double len = 0.0;
            for (int k = 0; k < K; ++k) {
                Vec<B> x = x0;
                x[a] = ext[static_cast<std::size_t>(a)].lo + ext[static_cast<std::size_t>(a)].length() * (k + 0.5) / K;
                len += std::sqrt(g(x)(a, a)) * ext[static_cast<std::size_t>(a)].length() / K;
            }
            best = std::min(best, len);
        }
    }
    return best;
}

}  // namespace detail

// Bounding box of the slab in ambient coordinates, sampled per base axis at
// `resolution` and vertically at `vertical` (default half of `resolution`).
template <int M>
Region<M> slab_region(const DomainSpec<M>& d, int resolution, int vertical = 0) {
    constexpr int B = M - 1;
    Region<M> region;
    double tlo = std::numeric_limits<double>::infinity(), thi = -tlo;
    for (const auto& x : base_samples<M>(d, resolution)) {
        tlo = std::min(tlo, d.height(Face::bottom, x));
        thi = std::max(thi, d.height(Face::top, x));
    }
    for (int a = 0; a < B; ++a) {
        region.lo[a] = d.extent[static_cast<std::size_t>(a)].lo;
        region.hi[a] = d.extent[static_cast<std::size_t>(a)].hi;
        region.n[static_cast<std::size_t>(a)] = resolution;
    }
    region.lo[B] = tlo;
    region.hi[B] = thi;
    region.n[static_cast<std::size_t>(B)] = vertical > 0 ? vertical : std::max(2, resolution / 2);
    return region;
}

template <int M>
GeometryAudit bounded_geometry_audit(const DomainSpec<M>& d, const AuditOptions& opt = {}) {
    constexpr int B = M - 1;
    GeometryAudit rep;
    rep.options = opt;
    rep.epsilon = d.epsilon;
    rep.epsilon_resolution = d.epsilon_resolution;

    // (N): cut distance of normal fibers relative to the whole boundary, and folds.
    std::array<int, M> cells;
    cells.fill(opt.n);
    auto grid = std::make_shared<const StructuredGrid<M>>(d, cells);
    const auto whole = eikonal_distance<M>(grid, true, true);
    rep.r_boundary_tol = cut_tolerance(whole.h);
    std::vector<std::pair<Face, Vec<B>>> starts;
    for (Face f : {Face::bottom, Face::top})
        for (const auto& x : base_samples<M>(d, opt.boundary_samples)) starts.push_back({f, x});
    std::vector<double> reach(starts.size());
    std::vector<char> folded(starts.size(), 0);
    parallel_for(starts.size(), [&](std::size_t i) {
        const auto fd = cut_function<M>(d, starts[i].second, starts[i].first, whole);
        double r = fd.L;
        for (std::size_t k = 0; k <= fd.cut_index; ++k)
            if (fd.samples[k].past_fold || !(fd.samples[k].v > 0)) {
                r = fd.samples[k].t;
                folded[i] = 1;
                break;
            }
        reach[i] = r;
    });
    rep.r_boundary = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < starts.size(); ++i) {
        rep.r_boundary = std::min(rep.r_boundary, reach[i]);
        rep.fold_hits += static_cast<std::size_t>(folded[i]);
    }

    // (I): conjugate points along interior geodesics in coordinate and diagonal directions.
    std::vector<GeodesicState<M>> probes;
    for (const auto& x : base_samples<M>(d, opt.interior_samples))
        for (double s : {0.25, 0.5, 0.75}) {
            Vec<M> p;
            p.template head<B>() = x;
            p[B] = d.height(Face::bottom, x) + s * (d.height(Face::top, x) - d.height(Face::bottom, x));
            const Mat<M> g = eval_metric<M>(*d.ambient, p);
            std::vector<Vec<M>> dirs;
            for (int a = 0; a < M; ++a) dirs.push_back(Vec<M>::Unit(a));
            dirs.push_back(Vec<M>::Ones());
            for (auto v : dirs) probes.push_back(GeodesicState<M>{p, v / std::sqrt(v.dot(g * v)), 0.0});
        }
    std::vector<double> conj(probes.size(), std::numeric_limits<double>::infinity());
    parallel_for(probes.size(), [&](std::size_t i) {
        if (auto c = conjugate_scan<M>(*d.ambient, probes[i], opt.conjugate_length, 2e-2)) conj[i] = *c;
    });
    for (double c : conj) rep.conjugate_min = std::min(rep.conjugate_min, c);

    std::function<Mat<B>(const Vec<B>&)> base_g = [&](const Vec<B>& x) {
        Vec<M> p;
        p.template head<B>() = x;
        p[B] = d.height(Face::bottom, x);
        return Mat<B>(d.ambient->value(p).template topLeftCorner<B, B>());
    };
    rep.loop_min = detail::loop_length<B>(d.extent, base_g, opt.boundary_samples);
    rep.inj_interior = std::min({rep.conjugate_min, 0.5 * rep.loop_min, opt.injectivity_cap});

    double face_inj = opt.injectivity_cap;
    for (Face f : {Face::bottom, Face::top}) {
        std::function<Mat<B>(const Vec<B>&)> hf = [&](const Vec<B>& x) { return d.induced_metric(f, x); };
        face_inj = std::min(face_inj, 0.5 * detail::loop_length<B>(d.extent, hf, opt.boundary_samples));
        if constexpr (B >= 2) {
            FaceMetric<M> fm(d, f);
            for (const auto& x : base_samples<M>(d, opt.interior_samples)) {
                const Mat<B> h = fm.value(x);
                for (int a = 0; a < B; ++a) {
                    Vec<B> v = Vec<B>::Unit(a);
                    v /= std::sqrt(v.dot(h * v));
                    if (auto c = conjugate_scan<B>(fm, GeodesicState<B>{x, v, 0.0}, opt.conjugate_length, 2e-2))
                        face_inj = std::min(face_inj, *c);
                }
            }
        }
    }
    rep.inj_boundary = face_inj;
    rep.r_fc = std::min({0.5 * rep.inj_boundary, 0.25 * rep.inj_interior, 0.5 * rep.r_boundary});

    // (B): ambient curvature over the bounding box of the slab, and face II norms.
    const auto region = slab_region<M>(d, opt.bounds_resolution);
    const auto br = bounds_report<M>(*d.ambient, region, 2);
    rep.curvature_norms = br.sup_norms;
    rep.ricci_lower = br.ricci_lower;
    for (Face f : {Face::bottom, Face::top}) {
        const auto s = shape_report<M>(d, base_samples<M>(d, 1).front(), f, opt.bounds_resolution);
        for (const auto& [k, v] : s.sup_norms) rep.shape_norms[std::string(face_name(f)) + " " + k] = v;
    }
    return rep;
}

}  // namespace boundedgeo
