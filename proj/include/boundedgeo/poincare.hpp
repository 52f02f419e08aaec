#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "audit.hpp"
#include "fem.hpp"

namespace boundedgeo {

// Constants of the fiberwise chain with C = 2^{p-1} C_HK, C_HK = e^{(m-1) R sqrt|c|},
// ricci_lower = (m-1) c. For p < inf, c_proof = max((C R)^{1/p}, R C^{1/p});
// for p = inf the sup chain |f(t)| <= |f(0)| + R |df|_inf gives C = 1, c_proof = max(1, R).
struct ProofConstant {
    double p = 2.0;
    double R = 0.0;
    double ricci_lower = 0.0;
    int m = 2;
    double C_HK = 1.0;
    double C = 1.0;
    double c_proof = 0.0;
    std::string formula;
};

inline ProofConstant proof_constant(double R, double ricci_lower, int m, double p) {
    if (!(R > 0)) throw ArgumentError("proof_constant needs R > 0");
    if (!(p >= 1)) throw ArgumentError("proof_constant needs p >= 1");
    if (m < 2) throw ArgumentError("proof_constant needs m >= 2");
    ProofConstant k;
    k.p = p;
    k.R = R;
    k.ricci_lower = ricci_lower;
    k.m = m;
    const double c = ricci_lower / (m - 1);
    k.C_HK = std::exp((m - 1) * R * std::sqrt(std::abs(c)));
    if (std::isinf(p)) {
        k.C = 1.0;
        k.c_proof = std::max(1.0, R);
        k.formula = "C = 1; c_proof = max(1, R)";
    } else {
        k.C = std::pow(2.0, p - 1) * k.C_HK;
        k.c_proof = std::max(std::pow(k.C * R, 1 / p), R * std::pow(k.C, 1 / p));
        k.formula = "C = 2^(p-1) exp((m-1) R sqrt|c|); c_proof = max((C R)^(1/p), R C^(1/p))";
    }
    return k;
}

struct HkAudit {
    double max_ratio = 1.0;  // max v(x,t) / v(x,s) over 0 <= s <= t <= L(x)
    double bound = 1.0;
    double tolerance = 0.02;
    std::size_t fibers = 0;
    std::size_t samples = 0;
    std::size_t skipped = 0;  // fibers without a minimizing segment
    bool pass = true;
};

template <int M>
HkAudit hk_ratio_audit(const std::vector<FiberData<M>>& fibers, double C_HK, double tolerance = 0.02) {
    HkAudit a;
    a.bound = C_HK;
    a.tolerance = tolerance;
    for (const auto& fd : fibers) {
        if (fd.samples.empty() || fd.minimizing.empty() || !fd.minimizing[0]) {
            ++a.skipped;
            continue;
        }
        ++a.fibers;
        double vmin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= fd.cut_index; ++k) {
            const double v = fd.samples[k].v;
            vmin = std::min(vmin, v);
            a.max_ratio = std::max(a.max_ratio, v / vmin);
            ++a.samples;
        }
    }
    a.pass = a.max_ratio <= C_HK * (1 + tolerance);
    return a;
}

struct FiberCheck {
    double p = 2.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double allowance = 0.0;  // trapezoid error estimate (full versus every other sample)
    bool pass = true;
};

namespace detail {

inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y, std::size_t stride) {
    double s = 0.0;
    std::size_t i = 0;
    for (; i + stride < t.size(); i += stride) s += 0.5 * (y[i] + y[i + stride]) * (t[i + stride] - t[i]);
    if (i + 1 < t.size()) {  // remainder interval
        const std::size_t j = t.size() - 1;
        s += 0.5 * (y[i] + y[j]) * (t[j] - t[i]);
    }
    return s;
}

}  // namespace detail

// Checks  int_0^L |f|^p v dt <= C R |f(0)|^p + C R^p int_0^L |f'|^p v dt  with
// C = 2^{p-1} C_HK, trapezoid quadrature and difference derivatives. For
// p = inf it checks max|f| <= |f(0)| + R max|f'|.
inline FiberCheck fiber_poincare_check(const std::vector<double>& t, const std::vector<double>& f,
                                       const std::vector<double>& v, double p, double C_HK, double R,
                                       double slack = 0.01) {
    if (!(p >= 1)) throw ArgumentError("fiber_poincare_check needs p >= 1, got " + fmt17(p));
    if (t.size() != f.size() || t.size() != v.size()) throw ArgumentError("fiber_poincare_check: sample sizes differ");
    FiberCheck r;
    r.p = p;
    if (t.size() < 2) return r;
    const std::size_t n = t.size();
    std::vector<double> df(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1, b = i + 1 == n ? i : i + 1;
        df[i] = (f[b] - f[a]) / (t[b] - t[a]);
    }
    if (std::isinf(p)) {
        double fmax = 0.0, dmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            fmax = std::max(fmax, std::abs(f[i]));
            dmax = std::max(dmax, std::abs(df[i]));
        }
        r.lhs = fmax;
        r.rhs = std::abs(f[0]) + R * dmax;
        r.pass = r.lhs <= r.rhs * (1 + slack);
        return r;
    }
    const double C = std::pow(2.0, p - 1) * C_HK;
    std::vector<double> lhs_y(n), rhs_y(n);
    for (std::size_t i = 0; i < n; ++i) {
        lhs_y[i] = std::pow(std::abs(f[i]), p) * v[i];
        rhs_y[i] = std::pow(std::abs(df[i]), p) * v[i];
    }
    const double I = detail::trapezoid(t, lhs_y, 1), J = detail::trapezoid(t, rhs_y, 1);
    r.lhs = I;
    r.rhs = C * R * std::pow(std::abs(f[0]), p) + C * std::pow(R, p) * J;
    r.allowance = std::abs(I - detail::trapezoid(t, lhs_y, 2)) +
                  C * std::pow(R, p) * std::abs(J - detail::trapezoid(t, rhs_y, 2));
    r.pass = r.lhs <= r.rhs * (1 + slack) + r.allowance;
    return r;
}

// The minimizing segment [0, L(x)] of a fiber.
template <int M>
FiberCheck fiber_poincare_check(const FiberData<M>& fd, const std::function<double(double)>& f, double p,
                                double C_HK, double R, double slack = 0.01) {
    std::vector<double> t, fv, v;
    for (std::size_t k = 0; k <= fd.cut_index && k < fd.samples.size(); ++k) {
        t.push_back(fd.samples[k].t);
        fv.push_back(f(fd.samples[k].t));
        v.push_back(fd.samples[k].v);
    }
    return fiber_poincare_check(t, fv, v, p, C_HK, R, slack);
}

// dirichlet: trial functions vanish on the Dirichlet faces and the ratio is
// ||f||_p / ||df||_p. general: ||f||_p / (||f||_{L^p(D faces)} + ||df||_p).
enum class PoincareVariant { dirichlet, general };

inline const char* variant_name(PoincareVariant v) { return v == PoincareVariant::dirichlet ? "dirichlet" : "general"; }

struct EmpiricalPoincare {
    double p = 2.0;
    PoincareVariant variant = PoincareVariant::dirichlet;
    double c_hat = 0.0;          // max ratio: a lower bound for the true constant
    std::vector<double> ratios;  // per trial, NaN when discarded
    std::size_t discarded = 0;   // denominator below 1e-14
    int n = 0;
};

struct LpNorms {
    double f = 0.0, df = 0.0, boundary = 0.0;
};

// L^p norms of the multilinear interpolant: 2x2 Gauss inside, face Gauss on the
// Dirichlet faces; p = inf takes maxima over nodes and quadrature points.
template <int M>
LpNorms lp_norms(const StructuredGrid<M>& G, const std::vector<double>& u, double p) {
    constexpr std::size_t NF = 1 << (M - 1);
    const auto rule = gauss_rule<M>(2);
    const bool sup = std::isinf(p);
    const auto& d = G.domain();
    LpNorms r;
    for (std::size_t c = 0; c < G.cell_count(); ++c) {
        const auto cell = G.cell_index(c);
        const auto nodes = G.cell_nodes(cell);
        for (const auto& q : rule) {
            const auto e = element_sample<M>(G, cell, q);
            const auto [v, g] = interpolant_at<M>(e, nodes, u);
            const double dg = std::sqrt(g.dot(e.ginv * g));
            if (sup) {
                r.df = std::max(r.df, dg);
            } else {
                r.f += std::pow(std::abs(v), p) * e.dvol;
                r.df += std::pow(dg, p) * e.dvol;
            }
        }
    }
    for (Face f : {Face::bottom, Face::top}) {
        if (!d.is_dirichlet(f)) continue;
        if (sup) {
            for (std::size_t i = 0; i < G.node_count(); ++i)
                if (G.on_face(i, f)) r.boundary = std::max(r.boundary, std::abs(u[i]));
            continue;
        }
        face_quadrature<M>(G, f, 2, [&](const std::array<std::size_t, NF>& nodes, const std::array<double, NF>& N,
                                        double dA) {
            double v = 0.0;
            for (std::size_t k = 0; k < NF; ++k) v += N[k] * u[nodes[k]];
            r.boundary += std::pow(std::abs(v), p) * dA;
        });
    }
    if (sup) {
        for (double v : u) r.f = std::max(r.f, std::abs(v));
    } else {
        r.f = std::pow(r.f, 1 / p);
        r.df = std::pow(r.df, 1 / p);
        r.boundary = std::pow(r.boundary, 1 / p);
    }
    return r;
}

namespace detail {

// Seeded sum of at most 8 Fourier modes in the base coordinates times a sum of
// at most 3 Gaussian bumps in normalized logical coordinates.
template <int M>
struct TrialFunction {
    static constexpr int B = M - 1;
    struct Mode {
        double a;
        std::array<int, B> k;
        std::array<char, B> sine;
    };
    struct Bump {
        double a, width;
        Vec<M> centre;
    };
    std::vector<Mode> modes;
    std::vector<Bump> bumps;

    static TrialFunction draw(std::mt19937_64& rng) {
        std::normal_distribution<double> N(0.0, 1.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        std::uniform_int_distribution<int> count_modes(1, 8), count_bumps(1, 3), K(0, 3);
        TrialFunction tf;
        tf.modes.resize(static_cast<std::size_t>(count_modes(rng)));
        for (auto& m : tf.modes) {
            int k2 = 0;
            for (int a = 0; a < B; ++a) {
                m.k[static_cast<std::size_t>(a)] = K(rng);
                m.sine[static_cast<std::size_t>(a)] = static_cast<char>(rng() & 1);
                k2 += m.k[static_cast<std::size_t>(a)] * m.k[static_cast<std::size_t>(a)];
            }
            m.a = N(rng) / (1.0 + k2);
        }
        tf.bumps.resize(static_cast<std::size_t>(count_bumps(rng)));
        for (auto& b : tf.bumps) {
            b.a = N(rng);
            b.width = 0.3 + 1.2 * U(rng);
            for (int a = 0; a < M; ++a) b.centre[a] = U(rng);
        }
        return tf;
    }

    // z: logical coordinates normalized to [0, 1] per axis.
    double operator()(const DomainSpec<M>& d, const Vec<M>& z) const {
        double fourier = 0.0;
        for (const auto& m : modes) {
            double v = m.a;
            for (int a = 0; a < B; ++a) {
                const double period = d.periodic(a) ? 1.0 : 2.0;
                const double theta = 2 * std::numbers::pi * m.k[static_cast<std::size_t>(a)] * z[a] / period;
                v *= m.sine[static_cast<std::size_t>(a)] ? std::sin(theta) : std::cos(theta);
            }
            fourier += v;
        }
        double bump = 0.0;
        for (const auto& b : bumps) {
            double r2 = 0.0;
            for (int a = 0; a < M; ++a) {
                double dz = z[a] - b.centre[a];
                if (a < B && d.periodic(a)) dz -= std::round(dz);
                r2 += dz * dz;
            }
            bump += b.a * std::exp(-r2 / (b.width * b.width));
        }
        return fourier * bump;
    }
};

}  // namespace detail

// Max over seeded trial functions of the Poincare ratio on an n^M grid. The
// dirichlet variant multiplies each trial by s (1 - s) factors that vanish on
// the Dirichlet faces.
template <int M>
EmpiricalPoincare empirical_poincare(const DomainSpec<M>& d, double p, int trials, std::uint64_t seed = 0, int n = 64,
                                     PoincareVariant variant = PoincareVariant::dirichlet) {
    constexpr int B = M - 1;
    if (!(p >= 1)) throw ArgumentError("empirical_poincare needs p >= 1");
    if (trials < 50) throw ArgumentError("empirical_poincare needs at least 50 trials, got " + std::to_string(trials));
    if (variant == PoincareVariant::dirichlet && !d.has_dirichlet())
        throw NoDirichletFace("no Dirichlet face: the dirichlet variant needs a nonempty Dirichlet part");
    std::array<int, M> cells;
    cells.fill(n);
    const StructuredGrid<M> G(d, cells);
    std::vector<Vec<M>> z(G.node_count());
    for (std::size_t i = 0; i < G.node_count(); ++i) {
        z[i] = G.logical(G.index(i));
        for (int a = 0; a < B; ++a)
            z[i][a] = (z[i][a] - d.extent[static_cast<std::size_t>(a)].lo) / d.extent[static_cast<std::size_t>(a)].length();
    }
    std::mt19937_64 rng(seed);
    std::vector<detail::TrialFunction<M>> fns;
    for (int t = 0; t < trials; ++t) fns.push_back(detail::TrialFunction<M>::draw(rng));
    EmpiricalPoincare out;
    out.p = p;
    out.variant = variant;
    out.n = n;
    out.ratios.assign(static_cast<std::size_t>(trials), std::numeric_limits<double>::quiet_NaN());
    parallel_for(fns.size(), [&](std::size_t t) {
        std::vector<double> u(G.node_count());
        for (std::size_t i = 0; i < u.size(); ++i) {
            double w = 1.0;
            if (variant == PoincareVariant::dirichlet) {
                const double s = z[i][B];
                w = (d.dirichlet_bottom ? s : 1.0) * (d.dirichlet_top ? 1.0 - s : 1.0);
            }
            u[i] = w * fns[t](d, z[i]);
        }
        const auto nr = lp_norms<M>(G, u, p);
        const double den = (variant == PoincareVariant::general ? nr.boundary : 0.0) + nr.df;
        if (den >= 1e-14) out.ratios[t] = nr.f / den;
    });
    for (double r : out.ratios) {
        if (std::isnan(r))
            ++out.discarded;
        else
            out.c_hat = std::max(out.c_hat, r);
    }
    return out;
}

// Sampled min Ricci eigenvalue over the slab's bounding box; vertical spacing
// at most `dt` so thin blending layers (deformed collars) are resolved.
template <int M>
double ricci_lower_bound(const DomainSpec<M>& d, int resolution = 12, double dt = 0.02) {
    const auto coarse = slab_region<M>(d, resolution);
    const int vertical = std::max(2, static_cast<int>(std::ceil((coarse.hi[M - 1] - coarse.lo[M - 1]) / dt)));
    return bounds_report<M>(*d.ambient, slab_region<M>(d, resolution, vertical), 0).ricci_lower;
}

struct PoincareReport {
    double p = 2.0;
    double R = 0.0;
    bool infinite_width = false;
    ProofConstant proof;
    EmpiricalPoincare empirical;          // dirichlet variant
    EmpiricalPoincare empirical_general;  // boundary-term variant
    double c_eigen = std::numeric_limits<double>::quiet_NaN();  // p = 2 only
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double lambda_min = std::numeric_limits<double>::quiet_NaN();
};

// Width from the Dirichlet distance field, Ricci bound from sampled curvature,
// empirical constants and (p = 2) the eigenvalue constant, all on n^M grids.
template <int M>
PoincareReport poincare_report(const DomainSpec<M>& d, double p, int trials, std::uint64_t seed = 0, int n = 64) {
    PoincareReport r;
    r.p = p;
    const auto w = finite_width_report<M>(eikonal_distance<M>(d, n));
    r.R = w.R;
    r.infinite_width = w.infinite;
    if (r.infinite_width) return r;
    r.proof = proof_constant(r.R, ricci_lower_bound<M>(d), M, p);
    r.empirical = empirical_poincare<M>(d, p, trials, seed, n, PoincareVariant::dirichlet);
    r.empirical_general = empirical_poincare<M>(d, p, trials, seed, n, PoincareVariant::general);
    if (p == 2) {
        const auto s = smallest_eigenvalue<M>(discretize<M>(d, n));
        r.lambda_min = s.lambda_min;
        r.c_eigen = s.c;
        r.gamma = s.gamma;
    }
    return r;
}

struct FamilyMember {
    std::size_t index = 0;
    double R = 0.0;
    bool infinite_width = false;
    double ricci_lower = 0.0;
    double c_hat = std::numeric_limits<double>::quiet_NaN();
    double c_eigen = std::numeric_limits<double>::quiet_NaN();  // p = 2 only
};

struct FamilyAudit {
    std::vector<FamilyMember> members;
    double max_c_hat = 0.0;  // constant of the disjoint union
    std::size_t argmax = 0;
    ProofConstant worst;     // largest R with the lowest Ricci bound
    bool pass = true;
    std::string finding;
};

// Per-component empirical constants (dirichlet variant) and their max, checked
// against the proof constant of the worst component.
template <int M>
FamilyAudit uniform_family_audit(const std::vector<DomainSpec<M>>& domains, double p, int trials,
                                 std::uint64_t seed = 0, int n = 64) {
    if (domains.empty()) throw ArgumentError("uniform_family_audit needs at least one domain");
    FamilyAudit a;
    double R = 0.0, ricci = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < domains.size(); ++i) {
        FamilyMember m;
        m.index = i;
        const auto w = finite_width_report<M>(eikonal_distance<M>(domains[i], n));
        m.R = w.R;
        m.infinite_width = w.infinite;
        if (m.infinite_width) {
            a.pass = false;
            if (a.finding.empty()) a.finding = "infinite width: component " + std::to_string(i);
            a.members.push_back(m);
            continue;
        }
        m.ricci_lower = ricci_lower_bound<M>(domains[i]);
        m.c_hat = empirical_poincare<M>(domains[i], p, trials, seed, n).c_hat;
        if (p == 2) m.c_eigen = smallest_eigenvalue<M>(discretize<M>(domains[i], n)).c;
        if (m.c_hat > a.max_c_hat) {
            a.max_c_hat = m.c_hat;
            a.argmax = i;
        }
        R = std::max(R, m.R);
        ricci = std::min(ricci, m.ricci_lower);
        a.members.push_back(m);
    }
    if (!a.pass) return a;
    a.worst = proof_constant(R, ricci, M, p);
    a.pass = a.max_c_hat <= a.worst.c_proof;
    a.finding = a.pass ? "uniform constant within the proof bound" : "uniform constant exceeds the proof bound";
    return a;
}

}  // namespace boundedgeo
