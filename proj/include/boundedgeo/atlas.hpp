#pragma once

#include <memory>
#include <random>

#include "audit.hpp"
#include "bump.hpp"
#include "quadrature.hpp"

namespace boundedgeo {

template <int M>
struct CoveringPoint {
    Vec<M> point;
    bool boundary = false;
    Face face = Face::bottom;  // boundary points only
    Vec<M - 1> x;              // base coordinates
};

// kappa(y, tau) = exp^perp(exp^dM_p(y), tau) on a boundary point, or
// kappa(xi) = exp_p(xi) on an interior one; y and xi in frames orthonormal at p.
// Integration uses a fixed step count per chart so the map is smooth in its
// argument. tau < 0 continues the normal geodesic outward.
template <int M>
class Chart {
public:
    static constexpr int B = M - 1;

    Chart(std::shared_ptr<const DomainSpec<M>> d, const CoveringPoint<M>& c, double r)
        : d_(std::move(d)), c_(c), r_(r), steps_(std::max(4, static_cast<int>(std::ceil(r / 1e-2)))) {
        if (c_.boundary) {
            face_ = std::make_shared<const FaceMetric<M>>(*d_, c_.face);
            Eigen::LLT<Mat<B>> llt(d_->induced_metric(c_.face, c_.x));
            frame_b_ = Mat<B>(llt.matrixL()).inverse().transpose();
        } else {
            Eigen::LLT<Mat<M>> llt(eval_metric<M>(*d_->ambient, c_.point));
            frame_ = Mat<M>(llt.matrixL()).inverse().transpose();
        }
    }

    bool boundary() const { return c_.boundary; }
    const CoveringPoint<M>& center() const { return c_; }
    double radius() const { return r_; }

    // Base point on the face reached by the boundary geodesic.
    Vec<B> boundary_geodesic(const Vec<B>& y) const {
        const Vec<B> v = frame_b_ * y;
        if (face_->is_euclidean()) return c_.x + v;
        GeodesicState<B> s{c_.x, v, 0.0};
        for (int i = 0; i < steps_; ++i) s = rk4_step<B>(*face_, s, 1.0 / steps_);
        return s.position;
    }

    Vec<M> forward(const Vec<M>& xi) const {
        if (!c_.boundary) {
            const Vec<M> v = frame_ * xi;
            if (d_->ambient->is_euclidean()) return c_.point + v;
            GeodesicState<M> s{c_.point, v, 0.0};
            for (int i = 0; i < steps_; ++i) s = rk4_step<M>(*d_->ambient, s, 1.0 / steps_);
            return s.position;
        }
        const Vec<B> x = boundary_geodesic(xi.template head<B>());
        const double tau = xi[B];
        if (detail::closed_form_fiber<M>(*d_, c_.face)) return detail::vertical_point<M>(*d_, x, c_.face, tau);
        GeodesicState<M> s = normal_start<M>(*d_, x, c_.face);
        for (int i = 0; i < steps_; ++i) s = rk4_step<M>(*d_->ambient, s, tau / steps_);
        return s.position;
    }

    // Central differences; h balances O(h^2) truncation against ~1e-14 position
    // roundoff accumulated over the integration steps.
    Mat<M> jacobian(const Vec<M>& xi, double h = 1e-5) const {
        Mat<M> J;
        for (int a = 0; a < M; ++a) {
            Vec<M> e = Vec<M>::Zero();
            e[a] = h;
            J.col(a) = periodic_delta<M>(*d_, forward(xi - e), forward(xi + e)) / (2 * h);
        }
        return J;
    }

    // Chart metric G = J^T g J.
    Mat<M> chart_metric(const Vec<M>& xi) const {
        const Mat<M> J = jacobian(xi);
        return J.transpose() * d_->ambient->value(forward(xi)) * J;
    }

    Vec<M> initial_guess(const Vec<M>& q) const {
        const Vec<M> diff = periodic_delta<M>(*d_, c_.point, q);
        if (!c_.boundary) return frame_.inverse() * diff;
        Vec<M> xi;
        xi.template head<B>() = frame_b_.inverse() * diff.template head<B>();
        const Vec<M> qq = c_.point + diff;
        const double f = d_->height(c_.face, qq.template head<B>());
        xi[B] = c_.face == Face::bottom ? qq[B] - f : f - qq[B];
        return xi;
    }

    // Damped Newton on kappa(xi) = q with a difference Jacobian.
    Vec<M> inverse(const Vec<M>& q) const {
        Vec<M> xi = initial_guess(q);
        Vec<M> F = periodic_delta<M>(*d_, q, forward(xi));
        double res = F.norm();
        for (int it = 0; it < 50; ++it) {
            if (res <= 1e-12) return xi;
            const Vec<M> step = jacobian(xi).partialPivLu().solve(F);
            if (!step.allFinite()) break;
            double alpha = 1.0;
            bool improved = false;
            for (int k = 0; k < 30; ++k, alpha *= 0.5) {
                const Vec<M> trial = xi - alpha * step;
                const Vec<M> Ft = periodic_delta<M>(*d_, q, forward(trial));
                if (Ft.norm() < res) {
                    xi = trial;
                    F = Ft;
                    res = Ft.norm();
                    improved = true;
                    break;
                }
            }
            if (!improved) {
                if (res <= 1e-10) return xi;  // stalled at roundoff
                break;
            }
        }
        if (res <= 1e-12) return xi;
        throw ChartInversionFailure("chart inversion failure at " + format_point<M>(q));
    }

    bool in_window(const Vec<M>& xi) const {
        if (!c_.boundary) return xi.norm() < r_;
        return xi.template head<B>().norm() < r_ && xi[B] > -kTauSlack && xi[B] < r_;
    }

    // Unnormalized bump; zero outside the window.
    double bump(const Vec<M>& xi) const {
        if (!in_window(xi)) return 0.0;
        if (!c_.boundary) return bump_profile(xi.norm() / r_);
        return bump_profile(xi.template head<B>().norm() / r_) * bump_profile(std::max(0.0, xi[B]) / r_);
    }

    // Roundoff allowance for tau on the face itself.
    static constexpr double kTauSlack = 1e-9;

private:
    std::shared_ptr<const DomainSpec<M>> d_;
    std::shared_ptr<const FaceMetric<M>> face_;
    CoveringPoint<M> c_;
    double r_;
    int steps_;
    Mat<B> frame_b_ = Mat<B>::Identity();
    Mat<M> frame_ = Mat<M>::Identity();
};

template <int M>
struct ChartHit {
    std::size_t chart = 0;
    Vec<M> xi;
    double value = 0.0;  // bump, or partition function after normalization
};

template <int M>
class FermiAtlas {
public:
    FermiAtlas(const DomainSpec<M>& d, double r, std::vector<CoveringPoint<M>> points)
        : d_(std::make_shared<const DomainSpec<M>>(d)), r_(r), points_(std::move(points)) {
        if (!(r > 0)) throw ArgumentError("atlas radius must be positive");
        for (const auto& p : points_) {
            charts_.emplace_back(d_, p, r);
            const Mat<M> g = eval_metric<M>(*d_->ambient, p.point);
            Eigen::SelfAdjointEigenSolver<Mat<M>> es(g);
            coord_scale_ = std::max(coord_scale_, 1.0 / std::sqrt(es.eigenvalues()[0]));
        }
    }

    const DomainSpec<M>& domain() const { return *d_; }
    double radius() const { return r_; }
    std::size_t size() const { return charts_.size(); }
    const Chart<M>& chart(std::size_t i) const { return charts_[i]; }
    const std::vector<CoveringPoint<M>>& points() const { return points_; }

    // Charts whose centres lie within chord distance R of q.
    std::vector<std::size_t> near(const Vec<M>& q, double R) const {
        std::vector<std::size_t> out;
        const double coarse = 2.0 * R * coord_scale_;
        for (std::size_t i = 0; i < charts_.size(); ++i) {
            const Vec<M> diff = periodic_delta<M>(*d_, points_[i].point, q);
            if (diff.norm() > coarse) continue;
            if (chord_distance<M>(*d_, points_[i].point, q) <= R) out.push_back(i);
        }
        return out;
    }

    // Every chart whose window contains q, with its bump value (> 0 or 0 at the rim).
    std::vector<ChartHit<M>> windows(const Vec<M>& q) const {
        std::vector<ChartHit<M>> hits;
        for (std::size_t i : near(q, 2.0 * r_)) {
            const Vec<M> xi = charts_[i].inverse(q);
            if (charts_[i].in_window(xi)) hits.push_back({i, xi, charts_[i].bump(xi)});
        }
        return hits;
    }

    // phi_gamma(q) = psi_gamma / sum psi for every window containing q.
    std::vector<ChartHit<M>> partition(const Vec<M>& q) const {
        auto hits = windows(q);
        double sum = 0.0;
        for (const auto& h : hits) sum += h.value;
        if (!(sum > 0)) throw CoverageGap("coverage gap at " + format_point<M>(q));
        for (auto& h : hits) h.value /= sum;
        return hits;
    }

    double phi(std::size_t chart, const Vec<M>& q) const {
        for (const auto& h : partition(q))
            if (h.chart == chart) return h.value;
        return 0.0;
    }

private:
    std::shared_ptr<const DomainSpec<M>> d_;
    double r_;
    std::vector<CoveringPoint<M>> points_;
    std::vector<Chart<M>> charts_;
    double coord_scale_ = 0.0;  // coordinate length per unit metric length at the centres
};

struct AtlasOptions {
    double r = 0.25;
    double r_fc = 0.0;  // <= 0: taken from bounded_geometry_audit
    int n = 32;         // probe grid cells per axis
    AuditOptions audit;
};

// Greedy maximal (r/2)-separated set over grid nodes: boundary nodes (bottom,
// then top) first, then nodes at distance >= r from the boundary.
template <int M>
std::vector<CoveringPoint<M>> build_covering(const DomainSpec<M>& d, const AtlasOptions& opt, double* r_fc_out = nullptr) {
    constexpr int B = M - 1;
    if (!(opt.r > 0)) throw ArgumentError("covering radius must be positive");
    const double r_fc = opt.r_fc > 0 ? opt.r_fc : bounded_geometry_audit<M>(d, opt.audit).r_fc;
    if (r_fc_out) *r_fc_out = r_fc;
    if (opt.r > r_fc * (1 + 1e-12))
        throw ArgumentError("covering radius r = " + fmt17(opt.r) + " exceeds r_FC = " + fmt17(r_fc));
    std::array<int, M> cells;
    cells.fill(opt.n);
    auto grid = std::make_shared<const StructuredGrid<M>>(d, cells);
    const auto dist = eikonal_distance<M>(grid, true, true);
    std::vector<CoveringPoint<M>> pts;
    auto try_add = [&](const CoveringPoint<M>& c) {
        for (const auto& p : pts)
            if (chord_distance<M>(d, p.point, c.point) < 0.5 * opt.r) return;
        pts.push_back(c);
    };
    for (Face f : {Face::bottom, Face::top})
        for (std::size_t i = 0; i < grid->node_count(); ++i)
            if (grid->on_face(i, f)) {
                CoveringPoint<M> c;
                c.point = grid->position(i);
                c.boundary = true;
                c.face = f;
                c.x = c.point.template head<B>();
                try_add(c);
            }
    for (std::size_t i = 0; i < grid->node_count(); ++i) {
        if (grid->on_face(i, Face::bottom) || grid->on_face(i, Face::top) || !(dist.d[i] >= opt.r)) continue;
        CoveringPoint<M> c;
        c.point = grid->position(i);
        c.x = c.point.template head<B>();
        try_add(c);
    }
    return pts;
}

template <int M>
FermiAtlas<M> build_atlas(const DomainSpec<M>& d, const AtlasOptions& opt) {
    return FermiAtlas<M>(d, opt.r, build_covering<M>(d, opt));
}

struct AtlasAudit {
    std::size_t charts = 0, boundary_charts = 0, interior_charts = 0;
    std::size_t nodes = 0;
    double min_separation = 0.0;        // >= r/2
    double min_interior_depth = 0.0;    // distance to the boundary of interior centres, >= r
    std::size_t max_windows = 0;        // N_0
    std::array<double, 3> radii{};      // r, 2r, 4r
    std::array<std::size_t, 3> multiplicity{};  // N_R
    double partition_sum_error = 0.0;
    std::size_t support_violations = 0;
    double roundtrip_max = 0.0;
    double gauge_max = 0.0;
    std::array<double, 3> C_alpha{};            // |alpha| = 0, 1, 2
    std::array<double, 3> chart_metric_bound{};
    std::size_t derivative_charts = 0;
};

struct AtlasAuditOptions {
    int n = 32;                  // probe grid cells per axis
    int roundtrip_samples = 100;
    std::uint64_t seed = 0;
    int derivative_charts = 8;   // charts sampled for C_alpha and metric bounds
    int lattice = 3;             // sample points per axis in each sampled window
};

namespace detail {

// Lattice of chart points whose difference stencil of step h stays in the
// window's interior part inside the slab.
template <int M>
std::vector<Vec<M>> window_lattice(const FermiAtlas<M>& A, const Chart<M>& C, int L, double h) {
    constexpr int B = M - 1;
    const double r = A.radius();
    std::vector<Vec<M>> out;
    std::size_t total = 1;
    for (int a = 0; a < M; ++a) total *= static_cast<std::size_t>(L);
    for (std::size_t i = 0; i < total; ++i) {
        Vec<M> xi;
        std::size_t k = i;
        for (int a = 0; a < M; ++a) {
            const double u = L == 1 ? 0.5 : static_cast<double>(k % static_cast<std::size_t>(L)) / (L - 1);
            k /= static_cast<std::size_t>(L);
            if (C.boundary() && a == B)
                xi[a] = 2 * h + u * (0.9 * r - 2 * h);
            else
                xi[a] = (-0.6 + 1.2 * u) * r;
        }
        bool ok = C.in_window(xi);
        for (int a = 0; a < M && ok; ++a)
            for (int b = 0; b < M && ok; ++b)
                for (double sa : {-1.0, 1.0})
                    for (double sb : {-1.0, 1.0}) {
                        Vec<M> z = xi;
                        z[a] += sa * h;
                        z[b] += sb * h;
                        if (!A.domain().contains(C.forward(z), 1e-12)) ok = false;
                    }
        if (ok) out.push_back(xi);
    }
    return out;
}

// Max |w|, max |d_a w|, max |d_a d_b w| by central differences of step h.
template <int M, class Fn>
std::array<double, 3> derivative_bounds(const Fn& w, const Vec<M>& xi, double h) {
    std::array<double, 3> out{};
    const double w0 = w(xi);
    out[0] = std::abs(w0);
    for (int a = 0; a < M; ++a) {
        Vec<M> ea = Vec<M>::Zero();
        ea[a] = h;
        const double wp = w(xi + ea), wm = w(xi - ea);
        out[1] = std::max(out[1], std::abs(wp - wm) / (2 * h));
        out[2] = std::max(out[2], std::abs(wp - 2 * w0 + wm) / (h * h));
        for (int b = a + 1; b < M; ++b) {
            Vec<M> eb = Vec<M>::Zero();
            eb[b] = h;
            const double m = (w(xi + ea + eb) - w(xi + ea - eb) - w(xi - ea + eb) + w(xi - ea - eb)) / (4 * h * h);
            out[2] = std::max(out[2], std::abs(m));
        }
    }
    return out;
}

}  // namespace detail

template <int M>
AtlasAudit audit_atlas(const FermiAtlas<M>& A, const AtlasAuditOptions& opt = {}) {
    constexpr int B = M - 1;
    const auto& d = A.domain();
    const double r = A.radius();
    AtlasAudit rep;
    rep.charts = A.size();
    for (const auto& p : A.points()) (p.boundary ? rep.boundary_charts : rep.interior_charts)++;

    rep.min_separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = i + 1; j < A.size(); ++j)
            rep.min_separation = std::min(rep.min_separation, chord_distance<M>(d, A.points()[i].point, A.points()[j].point));

    std::array<int, M> cells;
    cells.fill(opt.n);
    auto grid = std::make_shared<const StructuredGrid<M>>(d, cells);
    const auto dist = eikonal_distance<M>(grid, true, true);
    rep.min_interior_depth = std::numeric_limits<double>::infinity();
    for (const auto& p : A.points())
        if (!p.boundary) rep.min_interior_depth = std::min(rep.min_interior_depth, *dist.at(p.point, 1e-9));

    // Per-node coverage, normalization, support and multiplicity.
    const std::size_t N = grid->node_count();
    rep.nodes = N;
    rep.radii = {r, 2 * r, 4 * r};
    std::vector<std::size_t> windows(N), violations(N);
    std::vector<double> sum_err(N);
    std::vector<std::array<std::size_t, 3>> mult(N);
    parallel_for(N, [&](std::size_t i) {
        const Vec<M> q = grid->position(i);
        const auto hits = A.partition(q);
        double s = 0.0;
        for (const auto& h : hits) {
            s += h.value;
            if (h.value > 0 && !A.chart(h.chart).in_window(h.xi)) ++violations[i];
        }
        // Bumps outside the window must vanish: probe every nearby chart.
        for (std::size_t c : A.near(q, 2 * r)) {
            const Vec<M> xi = A.chart(c).inverse(q);
            if (!A.chart(c).in_window(xi) && A.chart(c).bump(xi) != 0.0) ++violations[i];
        }
        windows[i] = hits.size();
        sum_err[i] = std::abs(s - 1.0);
        for (std::size_t k = 0; k < 3; ++k) mult[i][k] = A.near(q, rep.radii[k]).size();
    });
    for (std::size_t i = 0; i < N; ++i) {
        rep.max_windows = std::max(rep.max_windows, windows[i]);
        rep.support_violations += violations[i];
        rep.partition_sum_error = std::max(rep.partition_sum_error, sum_err[i]);
        for (std::size_t k = 0; k < 3; ++k) rep.multiplicity[k] = std::max(rep.multiplicity[k], mult[i][k]);
    }

    // Round trips at seeded window points.
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, A.size() - 1);
    for (int s = 0; s < opt.roundtrip_samples; ++s) {
        const auto& C = A.chart(pick(rng));
        Vec<M> xi;
        do {
            for (int a = 0; a < M; ++a) xi[a] = U(rng) * r;
            if (C.boundary()) xi[B] = 0.5 * (xi[B] + 1.0 * r);
        } while (!C.in_window(xi));
        rep.roundtrip_max = std::max(rep.roundtrip_max, (C.inverse(C.forward(xi)) - xi).norm());
    }

    // Fermi gauge on the face: G_tt = 1, G_it = 0.
    for (std::size_t c = 0; c < A.size(); ++c) {
        const auto& C = A.chart(c);
        if (!C.boundary()) continue;
        for (double u : {-0.5, 0.0, 0.5}) {
            Vec<M> xi = Vec<M>::Zero();
            for (int a = 0; a < B; ++a) xi[a] = u * r / std::sqrt(static_cast<double>(B));
            const Mat<M> G = C.chart_metric(xi);
            rep.gauge_max = std::max(rep.gauge_max, std::abs(G(B, B) - 1.0));
            for (int a = 0; a < B; ++a) rep.gauge_max = std::max(rep.gauge_max, std::abs(G(a, B)));
        }
    }

    // Derivative bounds of phi o kappa and of the chart metric on evenly spread charts.
    const std::size_t K = std::min<std::size_t>(A.size(), static_cast<std::size_t>(std::max(1, opt.derivative_charts)));
    rep.derivative_charts = K;
    const double h = r / 20;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t c = k * A.size() / K;
        const auto& C = A.chart(c);
        for (const auto& xi : detail::window_lattice<M>(A, C, opt.lattice, h)) {
            const auto b = detail::derivative_bounds<M>([&](const Vec<M>& z) { return A.phi(c, C.forward(z)); }, xi, h);
            for (std::size_t o = 0; o < 3; ++o) rep.C_alpha[o] = std::max(rep.C_alpha[o], b[o]);
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j) {
                    const auto g = detail::derivative_bounds<M>([&](const Vec<M>& z) { return C.chart_metric(z)(i, j); }, xi, h);
                    for (std::size_t o = 0; o < 3; ++o) rep.chart_metric_bound[o] = std::max(rep.chart_metric_bound[o], g[o]);
                }
        }
    }
    return rep;
}

// |||u|||^2 = sum_gamma ||(phi_gamma u) o kappa_gamma||^2_{H^k}, integrated over
// the solver grid: at each Gauss point q the chart derivatives follow from
// physical-coordinate differences through d kappa, and d xi = dx / |det d kappa|.
// Everything except u is precomputed, so many u share one sampler. The grid
// must resolve the bump scale r for the quadrature to be meaningful.
template <int M>
class PartitionNorm {
public:
    PartitionNorm(const FermiAtlas<M>& A, std::shared_ptr<const StructuredGrid<M>> grid, int k)
        : grid_(std::move(grid)), k_(k) {
        if (k < 0 || k > 2) throw ArgumentError("partition_sobolev_norm supports k in {0, 1, 2}, got " + std::to_string(k));
        h_ = k == 2 ? 1e-2 * grid_->spacing() : 1e-5;
        offsets_.push_back(Vec<M>::Zero());
        if (k >= 1)
            for (int a = 0; a < M; ++a)
                for (double s : {1.0, -1.0}) offsets_.push_back(s * h_ * Vec<M>::Unit(a));
        if (k >= 2)
            for (int a = 0; a < M; ++a)
                for (int b = a + 1; b < M; ++b)
                    for (double sa : {1.0, -1.0})
                        for (double sb : {1.0, -1.0}) offsets_.push_back(h_ * (sa * Vec<M>::Unit(a) + sb * Vec<M>::Unit(b)));

        const auto rule = gauss_rule<M>(2);
        const auto& G = *grid_;
        for (std::size_t c = 0; c < G.cell_count(); ++c)
            for (const auto& q : rule) samples_.push_back({c, q});
        terms_.resize(samples_.size());
        direct_.resize(samples_.size());
        parallel_for(samples_.size(), [&](std::size_t s) {
            const auto cell = G.cell_index(samples_[s].first);
            const auto e = element_sample<M>(G, cell, samples_[s].second);
            direct_[s] = e;
            std::vector<std::vector<ChartHit<M>>> parts;
            for (const auto& o : offsets_) parts.push_back(A.partition(e.point + o));
            for (const auto& hit : parts[0]) {
                Term t;
                t.phi.resize(offsets_.size(), 0.0);
                for (std::size_t o = 0; o < offsets_.size(); ++o)
                    for (const auto& h2 : parts[o])
                        if (h2.chart == hit.chart) t.phi[o] = h2.value;
                const auto& C = A.chart(hit.chart);
                t.J = C.jacobian(hit.xi);
                t.weight = e.dx / std::abs(t.J.determinant());
                if (k_ >= 2) {
                    const double hk = 1e-4;
                    for (int a = 0; a < M; ++a)
                        for (int b = 0; b < M; ++b) {
                            Vec<M> ea = hk * Vec<M>::Unit(a), eb = hk * Vec<M>::Unit(b);
                            const auto fp = [&](const Vec<M>& z) { return C.forward(z); };
                            t.D2[static_cast<std::size_t>(a * M + b)] =
                                (periodic_delta<M>(A.domain(), fp(hit.xi + ea - eb), fp(hit.xi + ea + eb)) -
                                 periodic_delta<M>(A.domain(), fp(hit.xi - ea - eb), fp(hit.xi - ea + eb))) /
                                (4 * hk * hk);
                        }
                }
                terms_[s].push_back(std::move(t));
            }
        });
    }

    int order() const { return k_; }

    double norm_squared(const std::vector<double>& u) const {
        double total = 0.0;
        for (std::size_t s = 0; s < samples_.size(); ++s) {
            const auto uv = values(s, u);
            for (const auto& t : terms_[s]) {
                std::vector<double> w(uv.size());
                for (std::size_t o = 0; o < w.size(); ++o) w[o] = t.phi[o] * uv[o];
                total += t.weight * chart_integrand(w, t);
            }
        }
        return total;
    }

    // The usual norm on the same samples: |u|^2 + |du|_g^2 (+ |coordinate Hessian|^2 for k = 2).
    double direct_squared(const std::vector<double>& u) const {
        double total = 0.0;
        for (std::size_t s = 0; s < samples_.size(); ++s) {
            const auto uv = values(s, u);
            const auto& e = direct_[s];
            double v = uv[0] * uv[0];
            if (k_ >= 1) {
                const Vec<M> g = gradient(uv);
                v += g.dot(e.ginv * g);
            }
            if (k_ >= 2) v += hessian(uv).squaredNorm();
            total += v * e.dvol;
        }
        return total;
    }

private:
    struct Term {
        std::vector<double> phi;  // phi_gamma at the stencil points
        Mat<M> J;
        std::array<Vec<M>, M * M> D2{};  // d^2 kappa / d xi_a d xi_b
        double weight = 0.0;
    };

    std::vector<double> values(std::size_t s, const std::vector<double>& u) const {
        const auto& e = direct_[s];
        const auto cell = grid_->cell_index(samples_[s].first);
        const auto nodes = grid_->cell_nodes(cell);
        std::vector<double> out(offsets_.size());
        const auto [v0, g0] = interpolant_at<M>(e, nodes, u);
        // The stencil stays inside the cell, where the interpolant is multilinear
        // in logical coordinates; evaluate it through the grid.
        out[0] = v0;
        for (std::size_t o = 1; o < offsets_.size(); ++o) {
            const auto v = grid_->interpolate(u, e.point + offsets_[o], 1e-9);
            out[o] = v ? *v : v0 + g0.dot(offsets_[o]);
        }
        return out;
    }

    Vec<M> gradient(const std::vector<double>& w) const {
        Vec<M> g;
        for (int a = 0; a < M; ++a) g[a] = (w[static_cast<std::size_t>(1 + 2 * a)] - w[static_cast<std::size_t>(2 + 2 * a)]) / (2 * h_);
        return g;
    }

    Mat<M> hessian(const std::vector<double>& w) const {
        Mat<M> H;
        for (int a = 0; a < M; ++a)
            H(a, a) = (w[static_cast<std::size_t>(1 + 2 * a)] - 2 * w[0] + w[static_cast<std::size_t>(2 + 2 * a)]) / (h_ * h_);
        std::size_t o = 1 + 2 * M;
        for (int a = 0; a < M; ++a)
            for (int b = a + 1; b < M; ++b) {
                const double m = (w[o] - w[o + 1] - w[o + 2] + w[o + 3]) / (4 * h_ * h_);
                H(a, b) = H(b, a) = m;
                o += 4;
            }
        return H;
    }

    double chart_integrand(const std::vector<double>& w, const Term& t) const {
        double v = w[0] * w[0];
        if (k_ >= 1) {
            const Vec<M> gq = gradient(w);
            const Vec<M> gx = t.J.transpose() * gq;
            v += gx.squaredNorm();
            if (k_ >= 2) {
                Mat<M> Hx = t.J.transpose() * hessian(w) * t.J;
                for (int a = 0; a < M; ++a)
                    for (int b = 0; b < M; ++b) Hx(a, b) += gq.dot(t.D2[static_cast<std::size_t>(a * M + b)]);
                v += Hx.squaredNorm();
            }
        }
        return v;
    }

    std::shared_ptr<const StructuredGrid<M>> grid_;
    int k_;
    double h_ = 1e-5;
    std::vector<Vec<M>> offsets_;
    std::vector<std::pair<std::size_t, QuadPoint<M>>> samples_;
    std::vector<std::vector<Term>> terms_;
    std::vector<ElementSample<M>> direct_;
};

template <int M>
double partition_sobolev_norm(const std::vector<double>& u, const FermiAtlas<M>& A,
                              std::shared_ptr<const StructuredGrid<M>> grid, int k) {
    return std::sqrt(PartitionNorm<M>(A, std::move(grid), k).norm_squared(u));
}

}  // namespace boundedgeo
