#pragma once

#include <memory>
#include <random>

#include "audit.hpp"
#include "bump.hpp"

namespace boundedgeo {

// eta = 0 on [0, r'], 1 on [2r', 3r'] and beyond.
inline double collar_cutoff(double t, double r_prime) { return smooth_step((t - r_prime) / r_prime); }

inline std::function<double(double)> build_cutoff(double r_prime) {
    if (!(r_prime > 0)) throw ArgumentError("cutoff needs r' > 0");
    return [r_prime](double t) { return collar_cutoff(t, r_prime); };
}

// Collar coordinates (x', tau) of a face: Phi(x', tau) = exp^perp(x', tau),
// integrated with a fixed step count so that Phi is smooth; tau < 0 continues
// the normal geodesic outward.
template <int M>
class CollarMap {
public:
    static constexpr int B = M - 1;

    CollarMap(const DomainSpec<M>& d, Face which, double depth)
        : d_(d), which_(which), steps_(std::max(4, static_cast<int>(std::ceil(depth / 2e-2)))),
          vertical_(detail::closed_form_fiber<M>(d, which)) {}

    bool vertical() const { return vertical_; }

    GeodesicState<M> forward(const Vec<M>& c) const {
        const Vec<B> x = c.template head<B>();
        if (vertical_) {
            GeodesicState<M> s;
            s.position = detail::vertical_point<M>(d_, x, which_, c[B]);
            s.velocity = Vec<M>::Unit(B) * (which_ == Face::bottom ? 1.0 : -1.0);
            return s;
        }
        GeodesicState<M> s = normal_start<M>(d_, x, which_);
        for (int i = 0; i < steps_; ++i) s = rk4_step<M>(*d_.ambient, s, c[B] / steps_);
        return s;
    }

    // dPhi: base columns by central differences, tau column the fiber velocity.
    Mat<M> jacobian(const Vec<M>& c, const GeodesicState<M>& at) const {
        Mat<M> J;
        for (int a = 0; a < B; ++a) {
            if (vertical_) {
                J.col(a) = Vec<M>::Unit(a);
                continue;
            }
            Vec<M> e = Vec<M>::Zero();
            e[a] = 1e-5;
            J.col(a) = periodic_delta<M>(d_, forward(c - e).position, forward(c + e).position) / 2e-5;
        }
        J.col(B) = at.velocity;
        return J;
    }

    // Newton on Phi(c) = p from c0 = (x, signed vertical offset).
    Vec<M> inverse(const Vec<M>& p) const {
        Vec<M> c;
        c.template head<B>() = p.template head<B>();
        const double f = d_.height(which_, c.template head<B>());
        c[B] = which_ == Face::bottom ? p[B] - f : f - p[B];
        if (vertical_) return c;
        Vec<M> F = periodic_delta<M>(d_, p, forward(c).position);
        double res = F.norm();
        for (int it = 0; it < 50 && res > 1e-13; ++it) {
            const auto st = forward(c);
            const Vec<M> step = jacobian(c, st).partialPivLu().solve(F);
            double alpha = 1.0;
            bool improved = false;
            for (int k = 0; k < 30; ++k, alpha *= 0.5) {
                const Vec<M> trial = c - alpha * step;
                const Vec<M> Ft = periodic_delta<M>(d_, p, forward(trial).position);
                if (Ft.norm() < res) {
                    c = trial;
                    F = Ft;
                    res = Ft.norm();
                    improved = true;
                    break;
                }
            }
            if (!improved) break;
        }
        if (!(res <= 1e-10)) throw ChartInversionFailure("collar inversion failure at " + format_point<M>(p));
        return c;
    }

    Face face() const { return which_; }

private:
    const DomainSpec<M>& d_;
    Face which_;
    int steps_;
    bool vertical_;
};

// g' = eta(tau) g + (1 - eta(tau)) Phi_*(h(x') + dtau^2) on the collars of both
// faces, g elsewhere. Jets by central differences of values.
template <int M>
class DeformedMetric final : public MetricField<M> {
public:
    static constexpr int B = M - 1;

    DeformedMetric(const DomainSpec<M>& reference, double r_prime)
        : ref_(std::make_shared<const DomainSpec<M>>(reference)), r_(r_prime) {
        for (Face f : {Face::bottom, Face::top}) collars_.emplace_back(*ref_, f, 3 * r_prime);
    }

    double r_prime() const { return r_; }
    const MetricField<M>& reference() const { return *ref_->ambient; }

    struct CollarPoint {
        bool inside = false;  // tau < 3 r' for some face
        Face face = Face::bottom;
        Vec<M> c;             // (x', tau)
    };

    CollarPoint locate(const Vec<M>& p) const {
        CollarPoint best;
        double tau_best = 3 * r_;
        for (const auto& col : collars_) {
            const Vec<B> x = p.template head<B>();
            const auto f = ref_->face_jet(col.face(), x);
            double slope = 0.0;
            for (int a = 0; a < B; ++a) slope += f.d[static_cast<std::size_t>(a)] * f.d[static_cast<std::size_t>(a)];
            // Flat estimate of tau from the vertical gap; far points skip the inversion.
            const double est = (col.face() == Face::bottom ? p[B] - f.v : f.v - p[B]) / std::sqrt(1 + slope);
            if (est > 6 * r_) continue;
            Vec<M> c;
            try {
                c = col.inverse(p);
            } catch (const ChartInversionFailure&) {
                if (est > 3 * r_) continue;
                throw;
            }
            if (c[B] < tau_best) {
                tau_best = c[B];
                best = CollarPoint{true, col.face(), c};
            }
        }
        return best;
    }

    // Phi_*(h(x') + dtau^2) at a collar point.
    Mat<M> product_part(const CollarPoint& cp) const {
        const auto& col = collars_[cp.face == Face::bottom ? 0 : 1];
        const auto st = col.forward(cp.c);
        const Mat<M> Jinv = col.jacobian(cp.c, st).inverse();
        Mat<M> P = Mat<M>::Zero();
        P.template topLeftCorner<B, B>() = ref_->induced_metric(cp.face, cp.c.template head<B>());
        P(B, B) = 1.0;
        return Jinv.transpose() * P * Jinv;
    }

    Mat<M> value(const Vec<M>& p) const override {
        const Mat<M> g = ref_->ambient->value(p);
        const auto cp = locate(p);
        if (!cp.inside) return g;
        const double eta = collar_cutoff(cp.c[B], r_);
        if (eta == 1.0) return g;
        const Mat<M> P = product_part(cp);
        if (eta == 0.0) return P;
        return eta * g + (1 - eta) * P;
    }

    MetricJet<M> jet(const Vec<M>& p, int order = 2) const override {
        return finite_difference_jet<M>([&](const Vec<M>& q) { return value(q); }, p, order, 1e-4, 1e-3);
    }
    std::string family() const override { return "deformed"; }
    std::string describe() const override {
        return "deformed(" + ref_->ambient->describe() + ", r'=" + fmt17(r_) + ")";
    }

    const CollarMap<M>& collar(Face f) const { return collars_[f == Face::bottom ? 0 : 1]; }

private:
    std::shared_ptr<const DomainSpec<M>> ref_;
    double r_;
    std::vector<CollarMap<M>> collars_;
};

// min(r_boundary / 6, 0.1 * epsilon).
inline double default_r_prime(double r_boundary, double epsilon) { return std::min(r_boundary / 6, 0.1 * epsilon); }

// The same slab with ambient metric g'. r_boundary is the collar depth from the
// geometry audit; 3 r' must stay below it.
template <int M>
DomainSpec<M> deform_metric(const DomainSpec<M>& d, double r_prime, double r_boundary) {
    if (!(r_prime > 0)) throw ArgumentError("deform_metric needs r' > 0");
    if (!(3 * r_prime < r_boundary))
        throw ArgumentError("collar too shallow: 3r' = " + fmt17(3 * r_prime) + " is not below r_boundary = " +
                            fmt17(r_boundary) + " from the geometry audit");
    DomainSpec<M> out = d;
    out.ambient = std::make_shared<DeformedMetric<M>>(d, r_prime);
    return out;
}

// max over samples of max(lambda_max(g^-1 g'), lambda_max(g'^-1 g)).
template <int M>
double equivalence_constant(const MetricField<M>& g, const MetricField<M>& gp, const std::vector<Vec<M>>& samples) {
    double C = 1.0;
    for (const auto& p : samples) {
        const Mat<M> a = eval_metric<M>(g, p), b = eval_metric<M>(gp, p);
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat<M>> es(b, a);
        if (es.info() != Eigen::Success) throw DegenerateMetric("generalized eigenproblem failed at " + format_point<M>(p));
        const auto& l = es.eigenvalues();
        C = std::max({C, l[M - 1], 1.0 / l[0]});
    }
    return C;
}

struct DeformationReport {
    double r_prime = 0.0;
    double r_boundary = 0.0;
    double C = 1.0;
    double volume_log_max = 0.0;       // max |log(det g' / det g)|, bounded by m log C
    double covector_violation = 0.0;   // max excess over the C-bounds for random one-forms
    double product_defect = 0.0;       // max |G'_tt - 1|, |G'_it|, |G'_ij - h_ij| in collar coords, tau <= r'
    double far_defect = 0.0;           // max |g' - g| at tau >= 3r' or outside the collars
    std::size_t samples = 0;
    std::size_t inner_samples = 0;
    std::size_t far_samples = 0;
};

// Samples: n base points per axis times n heights across the slab.
template <int M>
DeformationReport deformation_audit(const DomainSpec<M>& d, const DomainSpec<M>& deformed, double r_boundary, int n = 16,
                                    std::uint64_t seed = 0) {
    constexpr int B = M - 1;
    const auto& gp = dynamic_cast<const DeformedMetric<M>&>(*deformed.ambient);
    DeformationReport rep;
    rep.r_prime = gp.r_prime();
    rep.r_boundary = r_boundary;
    std::vector<Vec<M>> pts;
    for (const auto& x : base_samples<M>(d, n)) {
        const double b = d.height(Face::bottom, x), t = d.height(Face::top, x);
        for (int k = 0; k <= n; ++k) {
            Vec<M> p;
            p.template head<B>() = x;
            p[B] = b + (t - b) * k / n;
            pts.push_back(p);
        }
        // Extra samples inside the inner collars.
        for (Face f : {Face::bottom, Face::top})
            for (double s : {0.25, 0.5, 0.9}) pts.push_back(gp.collar(f).forward([&] {
                Vec<M> c;
                c.template head<B>() = x;
                c[B] = s * rep.r_prime;
                return c;
            }()).position);
    }
    rep.samples = pts.size();
    rep.C = equivalence_constant<M>(*d.ambient, gp, pts);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    for (const auto& p : pts) {
        const Mat<M> g = d.ambient->value(p), g2 = gp.value(p);
        rep.volume_log_max = std::max(rep.volume_log_max, std::abs(std::log(g2.determinant() / g.determinant())));
        const Mat<M> gi = g.inverse(), g2i = g2.inverse();
        Vec<M> alpha;
        for (int a = 0; a < M; ++a) alpha[a] = N(rng);
        const double n1 = alpha.dot(gi * alpha), n2 = alpha.dot(g2i * alpha);
        rep.covector_violation = std::max({rep.covector_violation, n2 - rep.C * n1, n1 / rep.C - n2});
        const auto cp = gp.locate(p);
        if (!cp.inside || cp.c[B] >= 3 * rep.r_prime) {
            ++rep.far_samples;
            rep.far_defect = std::max(rep.far_defect, (g2 - g).cwiseAbs().maxCoeff());
        } else if (cp.c[B] <= rep.r_prime) {
            ++rep.inner_samples;
            const auto& col = gp.collar(cp.face);
            const Mat<M> J = col.jacobian(cp.c, col.forward(cp.c));
            const Mat<M> G = J.transpose() * g2 * J;
            Mat<M> target = Mat<M>::Zero();
            target.template topLeftCorner<B, B>() = d.induced_metric(cp.face, cp.c.template head<B>());
            target(B, B) = 1.0;
            rep.product_defect = std::max(rep.product_defect, (G - target).cwiseAbs().maxCoeff());
        }
    }
    return rep;
}

}  // namespace boundedgeo
