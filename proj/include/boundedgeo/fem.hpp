#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "parallel.hpp"
#include "quadrature.hpp"
#include "sparse.hpp"

namespace boundedgeo {

// Bilinear (trilinear) Galerkin system for Delta = d*d on the mapped slab grid.
// Full-node operators K, M and the Neumann surface mass S share one pattern;
// the *_free operators act on nodes off the Dirichlet faces.
template <int M>
struct DiscreteSystem {
    std::shared_ptr<const StructuredGrid<M>> grid;
    CsrMatrix K, Mass, S;
    std::vector<char> dirichlet, neumann;
    std::vector<std::size_t> free_nodes;
    std::vector<long> free_index;  // -1 on Dirichlet nodes
    CsrMatrix K_free, M_free;

    std::size_t node_count() const { return grid->node_count(); }
    std::size_t free_count() const { return free_nodes.size(); }
    bool has_dirichlet() const { return free_nodes.size() < node_count(); }

    Vector restrict_free(const Vector& full) const {
        Vector x(static_cast<Eigen::Index>(free_count()));
        for (std::size_t i = 0; i < free_count(); ++i)
            x[static_cast<Eigen::Index>(i)] = full[static_cast<Eigen::Index>(free_nodes[i])];
        return x;
    }
    // Free values scattered into a full vector that is zero on Dirichlet nodes.
    Vector extend(const Vector& x) const {
        Vector full = Vector::Zero(static_cast<Eigen::Index>(node_count()));
        for (std::size_t i = 0; i < free_count(); ++i)
            full[static_cast<Eigen::Index>(free_nodes[i])] = x[static_cast<Eigen::Index>(i)];
        return full;
    }
};

namespace detail {

template <int M>
CsrMatrix cell_pattern(const StructuredGrid<M>& G) {
    std::vector<std::vector<std::size_t>> rows(G.node_count());
    for (std::size_t c = 0; c < G.cell_count(); ++c) {
        const auto nodes = G.cell_nodes(G.cell_index(c));
        for (auto a : nodes)
            for (auto b : nodes) rows[a].push_back(b);
    }
    return CsrMatrix::from_pattern(G.node_count(), std::move(rows));
}

// Element matrices are computed in parallel per block and scattered in cell
// order, so the summation order per entry is fixed.
template <int M>
void assemble_volume(const StructuredGrid<M>& G, CsrMatrix& K, CsrMatrix& Mass) {
    constexpr int NC = 1 << M;
    const auto rule = gauss_rule<M>(2);
    const std::size_t cells = G.cell_count(), block = 4096;
    std::vector<std::array<double, 2 * NC * NC>> local;
    for (std::size_t start = 0; start < cells; start += block) {
        const std::size_t count = std::min(block, cells - start);
        local.assign(count, {});
        parallel_for(count, [&](std::size_t k) {
            auto& e = local[k];
            const auto cell = G.cell_index(start + k);
            for (const auto& q : rule) {
                const auto s = element_sample<M>(G, cell, q);
                for (int a = 0; a < NC; ++a)
                    for (int b = 0; b < NC; ++b) {
                        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
                        e[ua * NC + ub] += s.grad[ua].dot(s.ginv * s.grad[ub]) * s.dvol;
                        e[NC * NC + ua * NC + ub] += s.N[ua] * s.N[ub] * s.dvol;
                    }
            }
        });
        for (std::size_t k = 0; k < count; ++k) {
            const auto nodes = G.cell_nodes(G.cell_index(start + k));
            for (int a = 0; a < NC; ++a)
                for (int b = 0; b < NC; ++b) {
                    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
                    const std::size_t slot = K.slot(nodes[ua], nodes[ub]);
                    K.val[slot] += local[k][ua * NC + ub];
                    Mass.val[slot] += local[k][NC * NC + ua * NC + ub];
                }
        }
    }
    // Exact symmetry regardless of rounding in the element loops.
    for (CsrMatrix* A : {&K, &Mass})
        for (std::size_t i = 0; i < A->rows; ++i)
            for (std::size_t k = A->row_ptr[i]; k < A->row_ptr[i + 1]; ++k)
                if (A->col[k] > i) A->val[A->slot(A->col[k], i)] = A->val[k];
}

// Surface mass of the faces flagged in `faces`, with the induced face metric.
template <int M>
void assemble_surface(const StructuredGrid<M>& G, const std::array<bool, 2>& faces, CsrMatrix& S) {
    constexpr std::size_t NF = 1 << (M - 1);
    for (Face f : {Face::bottom, Face::top}) {
        if (!faces[f == Face::bottom ? 0 : 1]) continue;
        face_quadrature<M>(G, f, 2, [&](const std::array<std::size_t, NF>& nodes, const std::array<double, NF>& N,
                                        double dA) {
            for (std::size_t a = 0; a < NF; ++a)
                for (std::size_t b = 0; b < NF; ++b) S.add(nodes[a], nodes[b], N[a] * N[b] * dA);
        });
    }
}

}  // namespace detail

// Grid with the given cell counts; no minimum resolution.
template <int M>
DiscreteSystem<M> discretize(const DomainSpec<M>& d, const std::array<int, M>& cells) {
    DiscreteSystem<M> sys;
    sys.grid = std::make_shared<const StructuredGrid<M>>(d, cells);
    const auto& G = *sys.grid;
    sys.K = detail::cell_pattern<M>(G);
    sys.Mass = sys.K;
    sys.S = sys.K;
    detail::assemble_volume<M>(G, sys.K, sys.Mass);
    detail::assemble_surface<M>(G, {!d.dirichlet_bottom, !d.dirichlet_top}, sys.S);
    const std::size_t n = G.node_count();
    sys.dirichlet.assign(n, 0);
    sys.neumann.assign(n, 0);
    sys.free_index.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        for (Face f : {Face::bottom, Face::top})
            if (G.on_face(i, f)) (d.is_dirichlet(f) ? sys.dirichlet[i] : sys.neumann[i]) = 1;
        if (sys.dirichlet[i]) sys.neumann[i] = 0;
        if (!sys.dirichlet[i]) {
            sys.free_index[i] = static_cast<long>(sys.free_nodes.size());
            sys.free_nodes.push_back(i);
        }
    }
    sys.K_free = restrict_matrix(sys.K, sys.free_nodes, sys.free_nodes);
    sys.M_free = restrict_matrix(sys.Mass, sys.free_nodes, sys.free_nodes);
    return sys;
}

// n cells along every axis, n >= 8.
template <int M>
DiscreteSystem<M> discretize(const DomainSpec<M>& d, int n) {
    if (n < 8) throw ArgumentError("discretize needs n >= 8 cells per axis, got " + std::to_string(n));
    std::array<int, M> cells;
    cells.fill(n);
    return discretize<M>(d, cells);
}

template <int M>
Vector nodal_values(const StructuredGrid<M>& G, const std::function<double(const Vec<M>&)>& f) {
    Vector v(static_cast<Eigen::Index>(G.node_count()));
    for (std::size_t i = 0; i < G.node_count(); ++i) v[static_cast<Eigen::Index>(i)] = f ? f(G.position(i)) : 0.0;
    return v;
}

struct SpectralReport {
    double lambda_min = 0.0;
    double c = std::numeric_limits<double>::infinity();  // lambda_min^{-1/2}
    double gamma = 0.0;                                  // (1 + c^2)^{-1}
    int iterations = 0;
    int cg_iterations = 0;
    double increment = 0.0;  // last |d lambda| / lambda
    double residual = 0.0;   // ||K x - lambda M x|| / ||K x||
    bool poincare_fails = false;
    Vector mode;  // M-normalized ground mode on the free nodes
};

// Inverse power iteration K x_{k+1} = M x_k with Rayleigh quotients.
template <int M>
SpectralReport smallest_eigenvalue(const DiscreteSystem<M>& sys, double tol = 1e-8, int maxiter = 1000) {
    SpectralReport r;
    const auto n = static_cast<Eigen::Index>(sys.free_count());
    if (!sys.has_dirichlet()) {
        // Constants are in the kernel: no Poincare inequality.
        r.poincare_fails = true;
        r.mode = Vector::Ones(n);
        r.mode /= std::sqrt(r.mode.dot(sys.M_free * r.mode));
        return r;
    }
    Vector x = Vector::Ones(n);
    x /= std::sqrt(x.dot(sys.M_free * x));
    double lambda = x.dot(sys.K_free * x);
    for (int it = 1; it <= maxiter; ++it) {
        const auto cg = cg_solve(sys.K_free, sys.M_free * x, 1e-12);
        r.cg_iterations += cg.iterations;
        x = cg.x / std::sqrt(cg.x.dot(sys.M_free * cg.x));
        const double next = x.dot(sys.K_free * x);
        r.increment = std::abs(next - lambda) / next;
        lambda = next;
        r.iterations = it;
        if (r.increment <= tol) break;
    }
    if (r.increment > tol)
        throw NonConvergence("inverse iteration did not converge, increment " + fmt17(r.increment), r.increment);
    if (x.sum() < 0) x = -x;
    const Vector Kx = sys.K_free * x;
    r.residual = (Kx - lambda * (sys.M_free * x)).norm() / Kx.norm();
    r.lambda_min = lambda;
    r.c = 1.0 / std::sqrt(lambda);
    r.gamma = 1.0 / (1.0 + r.c * r.c);
    r.mode = x;
    return r;
}

struct ResolventOptions {
    double tol = 1e-10;
    bool probe = true;  // seeded random right-hand side exercising the definiteness detector
    std::uint64_t seed = 0;
    const SpectralReport* spectrum = nullptr;
};

// Weak normal derivative on Neumann nodes: g solves S_NN g = r_N for the
// residual functional r = (K - lambda M) u - volume_load. Zero elsewhere.
template <int M>
Vector weak_flux(const DiscreteSystem<M>& sys, const CsrMatrix& A, const Vector& u, const Vector& volume_load) {
    Vector flux = Vector::Zero(static_cast<Eigen::Index>(sys.node_count()));
    std::vector<std::size_t> nn;
    for (std::size_t i = 0; i < sys.node_count(); ++i)
        if (sys.neumann[i]) nn.push_back(i);
    if (nn.empty()) return flux;
    const Vector r = A * u - volume_load;
    Vector rN(static_cast<Eigen::Index>(nn.size()));
    for (std::size_t k = 0; k < nn.size(); ++k) rN[static_cast<Eigen::Index>(k)] = r[static_cast<Eigen::Index>(nn[k])];
    const auto g = cg_solve(restrict_matrix(sys.S, nn, nn), rN, 1e-12);
    for (std::size_t k = 0; k < nn.size(); ++k) flux[static_cast<Eigen::Index>(nn[k])] = g.x[static_cast<Eigen::Index>(k)];
    return flux;
}

template <int M>
Vector weak_flux(const DiscreteSystem<M>& sys, double lambda, const Vector& u, const Vector& volume_load) {
    return weak_flux<M>(sys, combine(1.0, sys.K, -lambda, sys.Mass), u, volume_load);
}

struct MixedSolution {
    Vector u;               // all nodes
    Vector dirichlet_trace;  // u on Dirichlet nodes, zero elsewhere
    Vector flux;            // weak normal derivative on Neumann nodes, zero elsewhere
    double residual = 0.0;   // relative residual of the free system
    double dirichlet_error = 0.0;
    int cg_iterations = 0;
    std::string band = "unchecked";
};

// Solves (K - lambda M) u = volume_load + neumann_load on the free nodes with
// u = gD on Dirichlet nodes. Neumann nodes are unknowns, so the weak flux of
// the solution reproduces the Neumann data up to the solver tolerance.
template <int M>
MixedSolution resolvent_solve_loads(const DiscreteSystem<M>& sys, double lambda, const Vector& volume_load,
                                    const Vector& neumann_load, const Vector& gD, const ResolventOptions& opt = {}) {
    const auto n = static_cast<Eigen::Index>(sys.node_count());
    if (volume_load.size() != n || neumann_load.size() != n || gD.size() != n)
        throw ArgumentError("resolvent_solve: data sizes must equal the node count " + std::to_string(n));
    MixedSolution out;
    if (opt.spectrum && !opt.spectrum->poincare_fails) {
        if (lambda >= opt.spectrum->lambda_min)
            throw NotPositiveDefinite("λ not below spectrum: λ = " + fmt17(lambda) + " >= λ_min = " +
                                      fmt17(opt.spectrum->lambda_min));
        out.band = lambda < opt.spectrum->gamma ? "guaranteed" : "outside the guaranteed band, numerically SPD";
    }
    const CsrMatrix A = combine(1.0, sys.K, -lambda, sys.Mass);
    const CsrMatrix A_free = restrict_matrix(A, sys.free_nodes, sys.free_nodes);
    Vector lift = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (sys.dirichlet[static_cast<std::size_t>(i)]) lift[i] = gD[i];
    const Vector rhs_full = volume_load + neumann_load - A * lift;
    const Vector rhs = sys.restrict_free(rhs_full);
    try {
        if (opt.probe && sys.free_count() > 0) {
            std::mt19937_64 rng(opt.seed);
            std::normal_distribution<double> N(0.0, 1.0);
            Vector b(static_cast<Eigen::Index>(sys.free_count()));
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = N(rng);
            out.cg_iterations += cg_solve(A_free, b, 1e-8).iterations;
        }
        const auto cg = cg_solve(A_free, rhs, opt.tol);
        out.cg_iterations += cg.iterations;
        out.residual = cg.residual;
        out.u = sys.extend(cg.x) + lift;
    } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite(std::string("λ not below spectrum: ") + e.what());
    }
    out.dirichlet_trace = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (sys.dirichlet[static_cast<std::size_t>(i)]) {
            out.dirichlet_trace[i] = out.u[i];
            out.dirichlet_error = std::max(out.dirichlet_error, std::abs(out.u[i] - gD[i]));
        }
    out.flux = weak_flux<M>(sys, A, out.u, volume_load);
    return out;
}

// Nodal data: f on all nodes, gD read on Dirichlet nodes, gN on Neumann nodes.
// Empty vectors mean zero data.
template <int M>
MixedSolution resolvent_solve(const DiscreteSystem<M>& sys, double lambda, const Vector& f, const Vector& gD = {},
                              const Vector& gN = {}, const ResolventOptions& opt = {}) {
    const auto n = static_cast<Eigen::Index>(sys.node_count());
    const auto or_zero = [&](const Vector& v, const char* what) {
        if (v.size() == 0) return Vector(Vector::Zero(n));
        if (v.size() != n)
            throw ArgumentError(std::string("resolvent_solve: ") + what + " has " + std::to_string(v.size()) +
                                " values, expected " + std::to_string(n));
        return Vector(v);
    };
    const Vector F = or_zero(f, "f"), D = or_zero(gD, "dirichlet data");
    Vector Ndata = or_zero(gN, "neumann data");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!sys.neumann[static_cast<std::size_t>(i)]) Ndata[i] = 0.0;
    return resolvent_solve_loads<M>(sys, lambda, sys.Mass * F, sys.S * Ndata, D, opt);
}

// Seeded trial vectors on the free nodes. Even trials are smooth random fields
// vanishing on Dirichlet faces; odd trials are white noise.
template <int M>
Vector random_free_vector(const DiscreteSystem<M>& sys, std::mt19937_64& rng, int trial) {
    constexpr int B = M - 1;
    const auto& G = *sys.grid;
    const auto& d = G.domain();
    std::normal_distribution<double> N(0.0, 1.0);
    Vector x(static_cast<Eigen::Index>(sys.free_count()));
    if (trial % 2 == 1) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = N(rng);
        return x;
    }
    std::uniform_int_distribution<int> K(0, 3), J(0, 3);
    struct Term {
        double a;
        std::array<int, B> k;
        std::array<int, B> sine;
        int j;
    };
    std::vector<Term> terms(12);
    for (auto& t : terms) {
        for (int a = 0; a < B; ++a) {
            t.k[static_cast<std::size_t>(a)] = K(rng);
            t.sine[static_cast<std::size_t>(a)] = static_cast<int>(rng() & 1);
        }
        t.j = J(rng);
        int k2 = 0;
        for (int k : t.k) k2 += k * k;
        t.a = N(rng) / (1.0 + k2);
    }
    for (std::size_t i = 0; i < sys.free_count(); ++i) {
        const Vec<M> xi = G.logical(G.index(sys.free_nodes[i]));
        const double s = xi[B];
        const double w = (d.dirichlet_bottom ? s : 1.0) * (d.dirichlet_top ? 1.0 - s : 1.0);
        double v = 0.0;
        for (const auto& t : terms) {
            double m = t.a * std::pow(s, t.j);
            for (int a = 0; a < B; ++a) {
                const auto& e = d.extent[static_cast<std::size_t>(a)];
                const double theta = (xi[a] - e.lo) / e.length() * (e.periodic ? 2.0 : 1.0) * std::numbers::pi *
                                     t.k[static_cast<std::size_t>(a)];
                m *= t.sine[static_cast<std::size_t>(a)] && e.periodic ? std::sin(theta) : std::cos(theta);
            }
            v += m;
        }
        x[static_cast<Eigen::Index>(i)] = w * v;
    }
    return x;
}

struct QuotientAudit {
    double value = 0.0;  // extreme quotient over the trials
    int trials = 0;
    int worst_trial = -1;
};

// (x^T (K - lambda M) x) / (x^T (K + M) x) on free vectors.
template <int M>
double coercivity_quotient(const DiscreteSystem<M>& sys, double lambda, const Vector& x) {
    const double k = x.dot(sys.K_free * x), m = x.dot(sys.M_free * x);
    return (k - lambda * m) / (k + m);
}

template <int M>
QuotientAudit coercivity_audit(const DiscreteSystem<M>& sys, double lambda, int trials, std::uint64_t seed = 0) {
    if (trials < 1) throw ArgumentError("coercivity_audit needs at least one trial");
    std::mt19937_64 rng(seed);
    QuotientAudit a;
    a.value = std::numeric_limits<double>::infinity();
    a.trials = trials;
    for (int t = 0; t < trials; ++t) {
        const double q = coercivity_quotient<M>(sys, lambda, random_free_vector<M>(sys, rng, t));
        if (q < a.value) {
            a.value = q;
            a.worst_trial = t;
        }
    }
    return a;
}

// ||x||^2_{H1} / |x|^2_{H1} = (x^T (K + M) x) / (x^T K x).
template <int M>
double norm_ratio(const DiscreteSystem<M>& sys, const Vector& x) {
    const double k = x.dot(sys.K_free * x), m = x.dot(sys.M_free * x);
    return k > 0 ? (k + m) / k : std::numeric_limits<double>::infinity();
}

template <int M>
QuotientAudit norm_equivalence_audit(const DiscreteSystem<M>& sys, int trials, std::uint64_t seed = 0) {
    if (trials < 1) throw ArgumentError("norm_equivalence_audit needs at least one trial");
    std::mt19937_64 rng(seed);
    QuotientAudit a;
    a.trials = trials;
    for (int t = 0; t < trials; ++t) {
        const double q = norm_ratio<M>(sys, random_free_vector<M>(sys, rng, t));
        if (q > a.value) {
            a.value = q;
            a.worst_trial = t;
        }
    }
    return a;
}

// Manufactured problem (Delta - lambda) u = f. With f empty the load is the
// weak form (du*, dphi) - lambda (u*, phi), which already carries the Neumann
// flux of u*; otherwise the load is M f + S neumann.
template <int M>
struct ManufacturedCase {
    std::function<double(const Vec<M>&)> u;
    std::function<Vec<M>(const Vec<M>&)> grad;
    std::function<double(const Vec<M>&)> f;
    std::function<double(const Vec<M>&)> neumann;
    double lambda = 0.0;
};

struct ConvergenceRow {
    int n = 0;
    double h = 0.0;
    double l2 = 0.0;
    double h1 = 0.0;
    double residual = 0.0;
    int cg_iterations = 0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    bool monotone = true;
    bool exact = false;  // all errors at roundoff
    double l2_order = std::numeric_limits<double>::quiet_NaN();
    double h1_order = std::numeric_limits<double>::quiet_NaN();
};

template <int M>
Vector weak_load(const DiscreteSystem<M>& sys, const ManufacturedCase<M>& mc) {
    constexpr int NC = 1 << M;
    const auto& G = *sys.grid;
    const auto rule = gauss_rule<M>(3);
    std::vector<std::array<double, NC>> local(G.cell_count());
    parallel_for(G.cell_count(), [&](std::size_t c) {
        const auto cell = G.cell_index(c);
        local[c].fill(0.0);
        for (const auto& q : rule) {
            const auto e = element_sample<M>(G, cell, q);
            const double u = mc.u(e.point);
            const Vec<M> du = mc.grad(e.point);
            for (std::size_t a = 0; a < NC; ++a)
                local[c][a] += (du.dot(e.ginv * e.grad[a]) - mc.lambda * u * e.N[a]) * e.dvol;
        }
    });
    Vector b = Vector::Zero(static_cast<Eigen::Index>(G.node_count()));
    for (std::size_t c = 0; c < G.cell_count(); ++c) {
        const auto nodes = G.cell_nodes(G.cell_index(c));
        for (std::size_t a = 0; a < NC; ++a) b[static_cast<Eigen::Index>(nodes[a])] += local[c][a];
    }
    return b;
}

// L2 and H1 errors of the interpolant u_h against u*, 3x3 Gauss.
template <int M>
std::pair<double, double> solution_errors(const StructuredGrid<M>& G, const Vector& uh, const ManufacturedCase<M>& mc) {
    const auto rule = gauss_rule<M>(3);
    std::vector<double> u(uh.data(), uh.data() + uh.size());
    std::vector<std::pair<double, double>> part(G.cell_count());
    parallel_for(G.cell_count(), [&](std::size_t c) {
        const auto cell = G.cell_index(c);
        const auto nodes = G.cell_nodes(cell);
        double l2 = 0.0, semi = 0.0;
        for (const auto& q : rule) {
            const auto e = element_sample<M>(G, cell, q);
            const auto [v, g] = interpolant_at<M>(e, nodes, u);
            const double ev = v - mc.u(e.point);
            const Vec<M> eg = g - mc.grad(e.point);
            l2 += ev * ev * e.dvol;
            semi += eg.dot(e.ginv * eg) * e.dvol;
        }
        part[c] = {l2, semi};
    });
    double l2 = 0.0, semi = 0.0;
    for (const auto& [a, b] : part) {
        l2 += a;
        semi += b;
    }
    return {std::sqrt(l2), std::sqrt(l2 + semi)};
}

inline double log_slope(const std::vector<double>& h, const std::vector<double>& e) {
    const double n = static_cast<double>(h.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]), y = std::log(e[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

template <int M>
MixedSolution solve_manufactured(const DiscreteSystem<M>& sys, const ManufacturedCase<M>& mc,
                                 const ResolventOptions& opt = {}) {
    const auto& G = *sys.grid;
    const Vector gD = nodal_values<M>(G, mc.u);
    if (!mc.f) {
        const Vector zero = Vector::Zero(static_cast<Eigen::Index>(G.node_count()));
        return resolvent_solve_loads<M>(sys, mc.lambda, weak_load<M>(sys, mc), zero, gD, opt);
    }
    return resolvent_solve<M>(sys, mc.lambda, nodal_values<M>(G, mc.f), gD, nodal_values<M>(G, mc.neumann), opt);
}

// Errors are tabulated against the largest metric edge length h. Orders are
// least-squares slopes of log(error) on log(h), reported only when both error
// sequences decrease strictly.
template <int M>
ConvergenceStudy convergence_study(const DomainSpec<M>& d, const ManufacturedCase<M>& mc,
                                   const std::vector<int>& grids = {16, 32, 64}) {
    if (grids.size() < 2) throw ArgumentError("convergence_study needs at least two grids");
    ConvergenceStudy st;
    ResolventOptions opt;
    opt.probe = false;
    opt.tol = 1e-12;
    for (int n : grids) {
        const auto sys = discretize<M>(d, n);
        const auto sol = solve_manufactured<M>(sys, mc, opt);
        const auto [l2, h1] = solution_errors<M>(*sys.grid, sol.u, mc);
        st.rows.push_back({n, sys.grid->spacing(), l2, h1, sol.residual, sol.cg_iterations});
    }
    std::vector<double> h, l2, h1;
    st.exact = true;
    for (const auto& r : st.rows) {
        h.push_back(r.h);
        l2.push_back(r.l2);
        h1.push_back(r.h1);
        if (r.h1 > 1e-13) st.exact = false;
    }
    for (std::size_t i = 1; i < st.rows.size(); ++i)
        if (!(l2[i] < l2[i - 1]) || !(h1[i] < h1[i - 1])) st.monotone = false;
    if (st.monotone && !st.exact) {
        st.l2_order = log_slope(h, l2);
        st.h1_order = log_slope(h, h1);
    }
    return st;
}

}  // namespace boundedgeo
