#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>

#include "metric.hpp"

namespace boundedgeo {

// Axis-aligned sampling box: n[i] points per axis at lo + k (hi - lo) / n, k < n.
// Halving the spacing therefore always produces a superset of the samples.
template <int M>
struct Region {
    Vec<M> lo = Vec<M>::Zero();
    Vec<M> hi = Vec<M>::Ones();
    std::array<int, M> n{};

    std::size_t count() const {
        std::size_t c = 1;
        for (int v : n) c *= static_cast<std::size_t>(v);
        return c;
    }
    Vec<M> point(std::size_t flat) const {
        Vec<M> p;
        for (int i = 0; i < M; ++i) {
            const auto ni = static_cast<std::size_t>(n[static_cast<std::size_t>(i)]);
            const auto k = flat % ni;
            flat /= ni;
            p[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) / static_cast<double>(ni);
        }
        return p;
    }
};

template <int M>
struct BoundsReport {
    Region<M> region;
    // "R", "nabla R", "nabla^2 R": sampled sup of |nabla^k Rm|_g / 2.
    std::map<std::string, double> sup_norms;
    // Sampled minimum Ricci eigenvalue, i.e. (m-1)c.
    double ricci_lower = 0.0;
};

// Covariant derivative of a covariant tensor field known pointwise:
// (nabla_e T)_{a...} = d_e T_{a...} - sum over slots Gamma^p_{e a_s} T_{..p..}.
// d_e is a central difference with step h.
template <int M>
Tensor<M> covariant_derivative(const std::function<Tensor<M>(const Vec<M>&)>& field, const Vec<M>& p,
                               const ChristoffelSymbols<M>& gamma, double h) {
    const Tensor<M> center = field(p);
    const int r = center.rank();
    Tensor<M> out(r + 1);
    std::array<Tensor<M>, M> partial;
    for (int e = 0; e < M; ++e) {
        Vec<M> d = Vec<M>::Zero();
        d[e] = h;
        Tensor<M> plus = field(p + d), minus = field(p - d);
        partial[static_cast<std::size_t>(e)] = Tensor<M>(r);
        for (std::size_t i = 0; i < center.size(); ++i)
            partial[static_cast<std::size_t>(e)][i] = (plus[i] - minus[i]) / (2.0 * h);
    }
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        auto idx = out.unflatten(flat);
        const int e = idx[0];
        std::array<int, 8> sub{};
        for (int s = 0; s < r; ++s) sub[static_cast<std::size_t>(s)] = idx[static_cast<std::size_t>(s + 1)];
        double v = partial[static_cast<std::size_t>(e)][center.flatten(sub)];
        for (int s = 0; s < r; ++s) {
            auto moved = sub;
            const int a = sub[static_cast<std::size_t>(s)];
            for (int q = 0; q < M; ++q) {
                moved[static_cast<std::size_t>(s)] = q;
                v -= gamma[q](e, a) * center[center.flatten(moved)];
            }
        }
        out[flat] = v;
    }
    return out;
}

// Sampled sup norms of nabla^k Rm for k <= k_max and the minimum Ricci eigenvalue.
template <int M>
BoundsReport<M> bounds_report(const MetricField<M>& field, const Region<M>& region, int k_max,
                              double fd_step = 1e-3) {
    if (region.count() == 0) throw ArgumentError("bounds_report: empty region");
    if (k_max < 0 || k_max > 2) throw ArgumentError("bounds_report: k_max must be 0, 1 or 2");
    for (int i = 0; i < M; ++i)
        if (!(region.hi[i] >= region.lo[i])) throw ArgumentError("bounds_report: empty region");

    using Field = std::function<Tensor<M>(const Vec<M>&)>;
    Field riemann = [&](const Vec<M>& q) { return curvature_at<M>(field, q).riemann; };
    Field nabla_riemann = [&](const Vec<M>& q) {
        const auto c = curvature_at<M>(field, q);
        return covariant_derivative<M>(riemann, q, c.christoffel, fd_step);
    };

    BoundsReport<M> rep;
    rep.region = region;
    rep.ricci_lower = std::numeric_limits<double>::infinity();
    double supR = 0.0, supDR = 0.0, supD2R = 0.0;
    for (std::size_t s = 0; s < region.count(); ++s) {
        const Vec<M> p = region.point(s);
        const auto c = curvature_at<M>(field, p);
        supR = std::max(supR, c.riemann_norm());
        rep.ricci_lower = std::min(rep.ricci_lower, c.ricci_min());
        if (k_max >= 1) {
            const auto dR = covariant_derivative<M>(riemann, p, c.christoffel, fd_step);
            supDR = std::max(supDR, 0.5 * tensor_norm<M>(dR, c.metric));
        }
        if (k_max >= 2) {
            const auto d2R = covariant_derivative<M>(nabla_riemann, p, c.christoffel, fd_step);
            supD2R = std::max(supD2R, 0.5 * tensor_norm<M>(d2R, c.metric));
        }
    }
    rep.sup_norms["R"] = supR;
    if (k_max >= 1) rep.sup_norms["nabla R"] = supDR;
    if (k_max >= 2) rep.sup_norms["nabla^2 R"] = supD2R;
    return rep;
}

}  // namespace boundedgeo
