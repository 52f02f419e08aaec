#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "domain.hpp"

namespace boundedgeo {

template <int M>
struct GeodesicState {
    Vec<M> position = Vec<M>::Zero();
    Vec<M> velocity = Vec<M>::Zero();
    double s = 0.0;  // curve parameter (arclength for unit-speed starts)
};

template <int M>
struct GeodesicPath {
    std::vector<GeodesicState<M>> states;
    bool exited = false;  // stopped on leaving the region
};

template <int M>
using InsideFn = std::function<bool(const Vec<M>&)>;

template <int M>
Vec<M> geodesic_acceleration(const MetricField<M>& field, const Vec<M>& x, const Vec<M>& v) {
    Vec<M> a = Vec<M>::Zero();
    if (field.is_euclidean()) return a;
    const auto G = christoffel<M>(field.jet(x, 1));
    for (int k = 0; k < M; ++k) a[k] = -v.dot(G[k] * v);
    return a;
}

template <int M>
GeodesicState<M> rk4_step(const MetricField<M>& field, const GeodesicState<M>& s0, double h) {
    const Vec<M>& x = s0.position;
    const Vec<M>& v = s0.velocity;
    const Vec<M> k1x = v, k1v = geodesic_acceleration<M>(field, x, v);
    const Vec<M> k2x = v + 0.5 * h * k1v, k2v = geodesic_acceleration<M>(field, x + 0.5 * h * k1x, k2x);
    const Vec<M> k3x = v + 0.5 * h * k2v, k3v = geodesic_acceleration<M>(field, x + 0.5 * h * k2x, k3x);
    const Vec<M> k4x = v + h * k3v, k4v = geodesic_acceleration<M>(field, x + h * k3x, k4x);
    GeodesicState<M> out;
    out.position = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    out.velocity = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    out.s = s0.s + h;
    return out;
}

// Advances by `length` in equal RK4 steps no longer than max_step. On leaving
// the region the last step is bisected and the boundary state returned with
// exited = true.
template <int M>
std::pair<GeodesicState<M>, bool> advance(const MetricField<M>& field, GeodesicState<M> state, double length,
                                          double max_step, const InsideFn<M>& inside = {}) {
    if (!(max_step > 0)) throw ArgumentError("geodesic step must be positive");
    if (length <= 0) return {state, false};
    const int n = std::max(1, static_cast<int>(std::ceil(length / max_step - 1e-12)));
    const double h = length / n;
    for (int i = 0; i < n; ++i) {
        GeodesicState<M> next = rk4_step<M>(field, state, h);
        if (inside && !inside(next.position)) {
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (inside(rk4_step<M>(field, state, mid * h).position) ? lo : hi) = mid;
            }
            return {rk4_step<M>(field, state, lo * h), true};
        }
        state = next;
    }
    return {state, false};
}

template <int M>
GeodesicPath<M> integrate_geodesic(const MetricField<M>& field, const GeodesicState<M>& start, double length,
                                   double step, const InsideFn<M>& inside = {}) {
    if (!(step > 0)) throw ArgumentError("geodesic step must be positive");
    if (inside && !inside(start.position))
        throw ArgumentError("geodesic start " + format_point<M>(start.position) + " lies outside the domain");
    GeodesicPath<M> path;
    path.states.push_back(start);
    const int n = std::max(1, static_cast<int>(std::ceil(length / step - 1e-12)));
    const double h = length / n;
    GeodesicState<M> cur = start;
    for (int i = 0; i < n; ++i) {
        auto [next, out] = advance<M>(field, cur, h, h, inside);
        path.states.push_back(next);
        if (out) {
            path.exited = true;
            break;
        }
        cur = next;
    }
    return path;
}

// Membership in bot <= t <= top (up to tol); box lateral truncations are ignored
// because the faces extend past them.
template <int M>
InsideFn<M> slab_inside(const DomainSpec<M>& d, double tol = 1e-12) {
    return [&d, tol](const Vec<M>& p) {
        const Vec<M> q = d.wrap(p);
        const Vec<M - 1> x = q.template head<M - 1>();
        return q[M - 1] >= d.height(Face::bottom, x) - tol && q[M - 1] <= d.height(Face::top, x) + tol;
    };
}

template <int M>
struct NormalExp {
    Vec<M> point;
    Vec<M> velocity;
    double t = 0.0;        // parameter reached
    bool exited = false;   // left the slab before the requested t
};

namespace detail {

template <int M>
bool closed_form_fiber(const DomainSpec<M>& d, Face which) {
    return d.ambient->is_product() && d.face_expr(which).is_constant();
}

// Unclamped point of the vertical fiber, valid past the opposite face.
template <int M>
Vec<M> vertical_point(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, double t) {
    Vec<M> p;
    p.template head<M - 1>() = x;
    p[M - 1] = d.height(which, x) + (which == Face::bottom ? t : -t);
    return p;
}

template <int M>
NormalExp<M> vertical_fiber(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, double t) {
    NormalExp<M> r;
    const double f = d.height(which, x);
    const double dir = which == Face::bottom ? 1.0 : -1.0;
    const double room = which == Face::bottom ? d.height(Face::top, x) - f : f - d.height(Face::bottom, x);
    r.exited = t > room;
    r.t = std::min(t, room);
    r.point.template head<M - 1>() = x;
    r.point[M - 1] = f + dir * r.t;
    r.velocity = Vec<M>::Zero();
    r.velocity[M - 1] = dir;
    return r;
}

}  // namespace detail

template <int M>
GeodesicState<M> normal_start(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which) {
    const auto bp = unit_normal<M>(d, x, which);
    return GeodesicState<M>{bp.point, -bp.nu, 0.0};
}

// exp_x(t nu_in): the inward unit-normal geodesic from a boundary point.
template <int M>
NormalExp<M> normal_exp(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, double t, double step = 1e-2) {
    if (t < 0) throw ArgumentError("normal_exp: t must be non-negative");
    if (detail::closed_form_fiber<M>(d, which)) return detail::vertical_fiber<M>(d, x, which, t);
    auto [st, out] = advance<M>(*d.ambient, normal_start<M>(d, x, which), t, step, slab_inside<M>(d));
    return NormalExp<M>{st.position, st.velocity, st.s, out};
}

template <int M>
struct DistortionSample {
    double t = 0.0;
    Vec<M> point;
    double v = 1.0;
    bool past_fold = false;  // det d exp^perp changed sign
};

namespace detail {

// v = sqrt(det g(q)) |det [dq/dx_1 .. dq/dx_B, dq/dt]| / sqrt(det h(x)).
template <int M>
DistortionSample<M> distortion_from(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, double t,
                                    const Vec<M>& q, const Vec<M>& qdot, const std::array<Vec<M>, M - 1>& dq) {
    constexpr int B = M - 1;
    Mat<M> J;
    for (int i = 0; i < B; ++i) J.col(i) = dq[static_cast<std::size_t>(i)];
    J.col(B) = qdot;
    Mat<M> J0;
    const auto X = d.face_tangents(which, x);
    for (int i = 0; i < B; ++i) J0.col(i) = X[static_cast<std::size_t>(i)];
    J0.col(B) = -unit_normal<M>(d, x, which).nu;
    const double det = J.determinant();
    DistortionSample<M> s;
    s.t = t;
    s.point = q;
    s.v = std::sqrt(d.ambient->value(q).determinant()) * std::abs(det) /
          std::sqrt(d.induced_metric(which, x).determinant());
    s.past_fold = det * J0.determinant() < 0;
    return s;
}

}  // namespace detail

// Samples of exp^perp(x, k dt) and v(x, k dt) for k = 0, 1, ... up to the
// horizon or the exit from the slab (the exit point is the last sample).
// Base-direction columns of d exp^perp come from central differences with
// step fd_step; the t column is the geodesic velocity.
template <int M>
std::pair<std::vector<DistortionSample<M>>, bool> fiber_samples(const DomainSpec<M>& d, const Vec<M - 1>& x,
                                                                 Face which, double dt, double horizon,
                                                                 double fd_step = 1e-4, double max_step = 1e-2) {
    constexpr int B = M - 1;
    if (!(dt > 0)) throw ArgumentError("fiber sample step must be positive");
    std::vector<DistortionSample<M>> out;
    const bool closed = detail::closed_form_fiber<M>(d, which);
    const std::size_t nfib = 1 + 2 * B;
    std::vector<GeodesicState<M>> state(nfib);
    std::vector<Vec<M - 1>> xs(nfib, x);
    for (int i = 0; i < B; ++i) {
        xs[static_cast<std::size_t>(1 + 2 * i)][i] += fd_step;
        xs[static_cast<std::size_t>(2 + 2 * i)][i] -= fd_step;
    }
    for (std::size_t f = 0; f < nfib; ++f) state[f] = normal_start<M>(d, xs[f], which);
    const auto inside = slab_inside<M>(d);
    auto record = [&](double t) {
        std::array<Vec<M>, B> dq;
        for (int i = 0; i < B; ++i)
            dq[static_cast<std::size_t>(i)] = (state[static_cast<std::size_t>(1 + 2 * i)].position -
                                               state[static_cast<std::size_t>(2 + 2 * i)].position) /
                                              (2 * fd_step);
        out.push_back(detail::distortion_from<M>(d, x, which, t, state[0].position, state[0].velocity, dq));
    };
    record(0.0);
    const int K = static_cast<int>(std::floor(horizon / dt + 1e-9));
    bool exited = false;
    for (int k = 1; k <= K && !exited; ++k) {
        if (closed) {
            // Flat faces over a product metric: vertical lines, exact.
            auto e = detail::vertical_fiber<M>(d, x, which, k * dt);
            for (std::size_t f = 0; f < nfib; ++f)
                state[f] = GeodesicState<M>{detail::vertical_point<M>(d, xs[f], which, e.t), e.velocity, e.t};
            exited = e.exited;
            record(e.t);
            continue;
        }
        auto prev = state;
        auto [c, out0] = advance<M>(*d.ambient, state[0], dt, max_step, inside);
        const double seg = c.s - prev[0].s;
        state[0] = c;
        for (std::size_t f = 1; f < nfib; ++f) state[f] = advance<M>(*d.ambient, prev[f], seg, max_step).first;
        exited = out0;
        record(c.s);
    }
    return {out, exited};
}

template <int M>
DistortionSample<M> volume_distortion(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, double t,
                                      double fd_step = 1e-4, double max_step = 1e-2) {
    constexpr int B = M - 1;
    if (t < 0) throw ArgumentError("volume_distortion: t must be non-negative");
    const auto c = normal_exp<M>(d, x, which, t, max_step);
    std::array<Vec<M>, B> dq;
    for (int i = 0; i < B; ++i) {
        Vec<B> xp = x, xm = x;
        xp[i] += fd_step;
        xm[i] -= fd_step;
        const GeodesicState<M> sp = normal_start<M>(d, xp, which), sm = normal_start<M>(d, xm, which);
        Vec<M> qp, qm;
        if (detail::closed_form_fiber<M>(d, which)) {
            qp = detail::vertical_point<M>(d, xp, which, c.t);
            qm = detail::vertical_point<M>(d, xm, which, c.t);
        } else {
            qp = advance<M>(*d.ambient, sp, c.t, max_step).first.position;
            qm = advance<M>(*d.ambient, sm, c.t, max_step).first.position;
        }
        dq[static_cast<std::size_t>(i)] = (qp - qm) / (2 * fd_step);
    }
    return detail::distortion_from<M>(d, x, which, c.t, c.point, c.velocity, dq);
}

// Geodesic together with a family of variations (dx_j, dv_j) solving the
// linearised geodesic equation
//   dx' = dv,  dv'^k = -d_m Gamma^k_ab v^a v^b dx^m - 2 Gamma^k_ab v^a dv^b.
template <int M, int K>
struct VariationalState {
    GeodesicState<M> geo;
    std::array<Vec<M>, K> dx;
    std::array<Vec<M>, K> dv;
};

template <int M, int K>
VariationalState<M, K> variational_step(const MetricField<M>& field, const VariationalState<M, K>& s0, double h) {
    struct D {
        Vec<M> x, v;
        std::array<Vec<M>, K> dx, dv;
    };
    auto rhs = [&](const D& y) {
        D r;
        r.x = y.v;
        r.v.setZero();
        for (int j = 0; j < K; ++j) {
            r.dx[static_cast<std::size_t>(j)] = y.dv[static_cast<std::size_t>(j)];
            r.dv[static_cast<std::size_t>(j)].setZero();
        }
        if (field.is_euclidean()) return r;
        const auto jet = field.jet(y.x, 2);
        const auto G = christoffel<M>(jet);
        const auto dG = christoffel_derivatives<M>(jet);
        for (int k = 0; k < M; ++k) r.v[k] = -y.v.dot(G[k] * y.v);
        for (int j = 0; j < K; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            for (int k = 0; k < M; ++k) {
                double acc = 0.0;
                for (int m = 0; m < M; ++m) acc -= y.v.dot(dG[m][k] * y.v) * y.dx[uj][m];
                acc -= 2.0 * y.v.dot(G[k] * y.dv[uj]);
                r.dv[uj][k] = acc;
            }
        }
        return r;
    };
    auto axpy = [](const D& a, double c, const D& b) {
        D r;
        r.x = a.x + c * b.x;
        r.v = a.v + c * b.v;
        for (std::size_t j = 0; j < static_cast<std::size_t>(K); ++j) {
            r.dx[j] = a.dx[j] + c * b.dx[j];
            r.dv[j] = a.dv[j] + c * b.dv[j];
        }
        return r;
    };
    D y{s0.geo.position, s0.geo.velocity, s0.dx, s0.dv};
    const D k1 = rhs(y);
    const D k2 = rhs(axpy(y, 0.5 * h, k1));
    const D k3 = rhs(axpy(y, 0.5 * h, k2));
    const D k4 = rhs(axpy(y, h, k3));
    D sum = axpy(axpy(axpy(k1, 2.0, k2), 2.0, k3), 1.0, k4);
    D n = axpy(y, h / 6.0, sum);
    VariationalState<M, K> out;
    out.geo = GeodesicState<M>{n.x, n.v, s0.geo.s + h};
    out.dx = n.dx;
    out.dv = n.dv;
    return out;
}

template <int M, int K>
VariationalState<M, K> integrate_variational(const MetricField<M>& field, VariationalState<M, K> s, double length,
                                             double step = 1e-2) {
    const int n = std::max(1, static_cast<int>(std::ceil(length / step - 1e-12)));
    for (int i = 0; i < n; ++i) s = variational_step<M, K>(field, s, length / n);
    return s;
}

// First s in (0, length] where the Jacobi fields J_1 .. J_{M-1} with J(0) = 0
// and J'(0) spanning the g-orthogonal complement of the velocity become
// linearly dependent. Odd-multiplicity zeros show as a sign change of
// det[J_1 .. J_{M-1}, gamma'] (located by linear interpolation); even ones as a
// V-shaped touch-down of the smallest singular value sigma of J in the metric,
// accepted when sigma at the sampled minimum is below its drop from a neighbor.
template <int M>
std::optional<double> conjugate_scan(const MetricField<M>& field, const GeodesicState<M>& start, double length,
                                     double step = 1e-2) {
    constexpr int K = M - 1;
    const Mat<M> g = eval_metric<M>(field, start.position);
    const Vec<M> v = start.velocity;
    if (!(v.dot(g * v) > 0)) throw ArgumentError("conjugate_scan: zero initial velocity");
    VariationalState<M, K> s;
    s.geo = start;
    std::vector<Vec<M>> basis{v};
    int j = 0;
    for (int c = 0; c < M && j < K; ++c) {
        Vec<M> e = Vec<M>::Zero();
        e[c] = 1.0;
        for (const auto& b : basis) e -= (b.dot(g * e) / b.dot(g * b)) * b;
        if (std::sqrt(e.dot(g * e)) < 1e-8) continue;
        e /= std::sqrt(e.dot(g * e));
        basis.push_back(e);
        s.dx[static_cast<std::size_t>(j)] = Vec<M>::Zero();
        s.dv[static_cast<std::size_t>(j)] = e;
        ++j;
    }
    auto det_of = [](const std::array<Vec<M>, K>& cols, const Vec<M>& last) {
        Mat<M> A;
        for (int i = 0; i < K; ++i) A.col(i) = cols[static_cast<std::size_t>(i)];
        A.col(K) = last;
        return A.determinant();
    };
    auto sigma_of = [&](const VariationalState<M, K>& st) {
        const Mat<M> gq = field.value(st.geo.position);
        Eigen::Matrix<double, K, K> gram;
        for (int a = 0; a < K; ++a)
            for (int b = 0; b < K; ++b)
                gram(a, b) = st.dx[static_cast<std::size_t>(a)].dot(gq * st.dx[static_cast<std::size_t>(b)]);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, K, K>> es(gram);
        return std::sqrt(std::max(0.0, es.eigenvalues()[0]));
    };
    const double orient = det_of(s.dv, v) > 0 ? 1.0 : -1.0;
    const int n = std::max(1, static_cast<int>(std::ceil(length / step - 1e-12)));
    const double h = length / n;
    double prevD = 0.0;
    double sig2 = -1.0, sig1 = -1.0;  // sigma two steps back, one step back
    for (int i = 0; i < n; ++i) {
        auto next = variational_step<M, K>(field, s, h);
        const double D = orient * det_of(next.dx, next.geo.velocity);
        if (D <= 0) {
            if (i == 0) return next.geo.s;
            return s.geo.s + h * prevD / (prevD - D);
        }
        const double sig = sigma_of(next);
        if (sig2 >= 0 && sig1 <= sig2 && sig1 <= sig && sig1 <= std::max(sig2 - sig1, sig - sig1)) return s.geo.s;
        sig2 = sig1;
        sig1 = sig;
        prevD = D;
        s = next;
    }
    return std::nullopt;
}

}  // namespace boundedgeo
