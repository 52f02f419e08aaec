#pragma once

// Task orchestration shared by the command-line tool and the acceptance runner.
// Each task fills a RunReport and writes its CSV files into the output directory.

#include <filesystem>
#include <numbers>
#include <optional>
#include <fstream>
#include <random>

#include "atlas.hpp"
#include "config.hpp"
#include "deformation.hpp"
#include "poincare.hpp"
#include "report.hpp"

namespace boundedgeo {

namespace detail {

inline std::string pname(double p) { return "p=" + fmt17(p); }

class Outputs {
public:
    Outputs(const std::string& dir, RunReport& rep) : dir_(dir), rep_(rep) { std::filesystem::create_directories(dir_); }

    std::ofstream open(const std::string& name) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw Error("cannot write " + (dir_ / name).string());
        rep_.files.push_back(name);
        return os;
    }

private:
    std::filesystem::path dir_;
    RunReport& rep_;
};

template <int M>
std::vector<std::string> column_names(const DomainSpec<M>& d) {
    auto names = d.base_names;
    names.push_back("t");
    return names;
}

template <int M>
double audited_r_boundary(const DomainSpec<M>& d, int audit_n) {
    AuditOptions o;
    o.n = audit_n;
    return bounded_geometry_audit<M>(d, o).r_boundary;
}

// The slab of a domain block, with the deformed metric g' when requested.
template <int M>
DomainSpec<M> build_block(const DomainBlock& b, int audit_n, Json* info = nullptr) {
    DomainConfig c = b.config;
    c.dimension = M;
    auto d = build_domain<M>(c);
    if (!b.deform.enabled) return d;
    const double rb = b.deform.r_boundary > 0 ? b.deform.r_boundary : audited_r_boundary<M>(d, audit_n);
    const double rp = b.deform.r_prime > 0 ? b.deform.r_prime : default_r_prime(rb, d.epsilon);
    if (info) *info = {{"r_prime", rp}, {"r_boundary", rb}};
    return deform_metric<M>(d, rp, rb);
}

template <int M>
Vector expression_values(const StructuredGrid<M>& G, const std::string& text, const DomainSpec<M>& d) {
    if (text.empty()) return {};
    const auto e = Expression::parse(text, column_names<M>(d), d.parameters);
    return nodal_values<M>(G, [&](const Vec<M>& p) { return e(std::span<const double>(p.data(), M)); });
}

template <int M>
std::vector<double> row_with_point(const Vec<M>& p, std::initializer_list<double> tail) {
    std::vector<double> r(p.data(), p.data() + M);
    r.insert(r.end(), tail);
    return r;
}

// ---- tasks ----

template <int M>
void task_describe(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    const auto& c = cfg.domains.front().config;
    auto& v = rep.values;
    v["dimension"] = M;
    v["base_family"] = c.base_family;
    v["top"] = c.top;
    v["bot"] = c.bot;
    v["dirichlet"] = c.dirichlet;
    Json ext = Json::array();
    for (const auto& e : d.extent) ext.push_back({{"lo", e.lo}, {"hi", e.hi}, {"periodic", e.periodic}});
    v["extent"] = ext;
    v["epsilon"] = d.epsilon;
    v["max_height"] = d.max_height;
    v["ambient_family"] = d.ambient->family();
    std::array<int, M> cells;
    cells.fill(cfg.numeric.n);
    const StructuredGrid<M> G(d, cells);
    double vol = 0.0;
    for (double w : G.lumped_volume()) vol += w;
    v["volume"] = vol;
    auto os = out.open("faces.csv");
    auto header = d.base_names;
    header.insert(header.end(), {"bot", "top"});
    CsvWriter w(os, header);
    for (const auto& x : base_samples<M>(d, cfg.numeric.n)) {
        std::vector<double> r(x.data(), x.data() + (M - 1));
        r.push_back(d.height(Face::bottom, x));
        r.push_back(d.height(Face::top, x));
        w.row(r);
    }
}

template <int M>
void task_audit_geometry(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    AuditOptions o;
    o.n = cfg.numeric.audit_n;
    const auto a = bounded_geometry_audit<M>(d, o);
    auto& v = rep.values;
    v["epsilon"] = a.epsilon;
    v["r_boundary"] = json_number(a.r_boundary);
    v["r_boundary_tolerance"] = a.r_boundary_tol;
    v["fold_hits"] = a.fold_hits;
    v["conjugate_min"] = json_number(a.conjugate_min);
    v["loop_min"] = json_number(a.loop_min);
    v["inj_interior"] = json_number(a.inj_interior);
    v["inj_boundary"] = json_number(a.inj_boundary);
    v["r_fc"] = json_number(a.r_fc);
    v["ricci_lower"] = a.ricci_lower;
    for (const auto& [k, x] : a.curvature_norms) v["curvature_norms"][k] = json_number(x);
    for (const auto& [k, x] : a.shape_norms) v["shape_norms"][k] = json_number(x);
    rep.findings.push_back(holds("thickness epsilon > 0", a.epsilon > 0, a.epsilon));
    rep.findings.push_back(holds("normal collar r_boundary > 0", a.r_boundary > 0, a.r_boundary));
    rep.findings.push_back(holds("Fermi radius r_FC > 0", a.r_fc > 0, a.r_fc));

    const auto field = eikonal_distance<M>(d, cfg.numeric.n);
    const auto width = finite_width_report<M>(field);
    v["R"] = json_number(width.R);
    v["unreachable_nodes"] = width.unreachable;
    rep.findings.push_back(holds("finite width", !width.infinite, width.R, width.infinite ? "infinite width" : ""));
    {
        auto os = out.open("distance.csv");
        write_distance_csv<M>(os, field, d.base_names);
    }
    if (d.has_dirichlet()) {
        const auto cut = cut_locus_measure<M>(d, field);
        v["cut_locus"] = {{"fraction", cut.fraction}, {"flagged_nodes", cut.flagged_nodes},
                          {"cut_points", cut.cut_points}, {"fibers", cut.fibers}, {"h", cut.h}, {"tol", cut.tol}};
        auto os = out.open("fibers.csv");
        write_fiber_csv<M>(os, dirichlet_fibers<M>(d, field), d.base_names);
    }
}

template <int M>
void task_poincare(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    const auto& nb = cfg.numeric;
    auto os = out.open("poincare_trials.csv");
    CsvWriter w(os, {"p", "trial", "dirichlet_ratio", "general_ratio"});
    Json per = Json::array();
    for (double p : nb.p) {
        const auto r = poincare_report<M>(d, p, nb.trials, nb.seed, nb.n);
        if (r.infinite_width) {
            rep.findings.push_back(holds(pname(p) + ": finite width", false, r.R, "infinite width"));
            per.push_back({{"p", json_number(p)}, {"R", json_number(r.R)}});
            continue;
        }
        per.push_back({{"p", json_number(p)},
                       {"R", r.R},
                       {"ricci_lower", r.proof.ricci_lower},
                       {"C_HK", r.proof.C_HK},
                       {"C", r.proof.C},
                       {"c_proof", r.proof.c_proof},
                       {"formula", r.proof.formula},
                       {"c_hat_dirichlet", r.empirical.c_hat},
                       {"c_hat_general", r.empirical_general.c_hat},
                       {"discarded", r.empirical.discarded + r.empirical_general.discarded},
                       {"c_eigen", json_number(r.c_eigen)},
                       {"gamma", json_number(r.gamma)},
                       {"lambda_min", json_number(r.lambda_min)}});
        rep.findings.push_back(compare(pname(p) + ": empirical c_hat (dirichlet) <= proof constant", r.empirical.c_hat,
                                       "<=", r.proof.c_proof, 0.05, true));
        rep.findings.push_back(compare(pname(p) + ": empirical c_hat (general) <= proof constant",
                                       r.empirical_general.c_hat, "<=", r.proof.c_proof, 0.05, true));
        if (p == 2)
            rep.findings.push_back(compare(pname(p) + ": eigenvalue constant <= empirical c_hat", r.c_eigen, "<=",
                                           r.empirical.c_hat, 0.05, true));
        for (std::size_t i = 0; i < r.empirical.ratios.size(); ++i)
            w.row({p, static_cast<double>(i), r.empirical.ratios[i], r.empirical_general.ratios[i]});
    }
    rep.values["exponents"] = per;
}

template <int M>
struct FiberSetup {
    DistanceField<M> field;
    FiniteWidthReport width;
    ProofConstant proof;
    std::vector<FiberData<M>> fibers;
};

template <int M>
std::optional<FiberSetup<M>> fiber_setup(const RunConfig& cfg, const DomainSpec<M>& d, RunReport& rep, double p) {
    FiberSetup<M> s{eikonal_distance<M>(d, cfg.numeric.n), {}, {}, {}};
    s.width = finite_width_report<M>(s.field);
    rep.values["R"] = json_number(s.width.R);
    if (s.width.infinite) {
        rep.findings.push_back(holds("finite width", false, s.width.R, "infinite width"));
        return std::nullopt;
    }
    s.proof = proof_constant(s.width.R, ricci_lower_bound<M>(d), M, p);
    rep.values["ricci_lower"] = s.proof.ricci_lower;
    rep.values["C_HK"] = s.proof.C_HK;
    s.fibers = dirichlet_fibers<M>(d, s.field);
    return s;
}

template <int M>
void task_hk_audit(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    auto s = fiber_setup<M>(cfg, d, rep, 2.0);
    if (!s) return;
    const auto a = hk_ratio_audit<M>(s->fibers, s->proof.C_HK, 0.02);
    double v0 = 0.0;
    for (const auto& f : s->fibers) v0 = std::max(v0, std::abs(f.samples.front().v - 1.0));
    rep.values["fibers"] = a.fibers;
    rep.values["samples"] = a.samples;
    rep.values["skipped"] = a.skipped;
    rep.findings.push_back(compare("max v(x,t)/v(x,s) <= C_HK", a.max_ratio, "<=", s->proof.C_HK, 0.02, true));
    rep.findings.push_back(compare("max |v(x,0) - 1|", v0, "<=", 0.0, 1e-6, false));
    auto os = out.open("fibers.csv");
    write_fiber_csv<M>(os, s->fibers, d.base_names);
}

// Seeded smooth fiber functions: a constant plus four damped Fourier modes on [0, R].
struct FiberFunction {
    double a0 = 0.0;
    std::array<double, 4> a{}, b{};
    double R = 1.0;

    static FiberFunction draw(std::mt19937_64& rng, double R) {
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        std::normal_distribution<double> N(0.0, 1.0);
        FiberFunction f;
        f.R = R;
        f.a0 = U(rng);
        for (std::size_t k = 0; k < 4; ++k) {
            f.a[k] = N(rng) / static_cast<double>(k + 1);
            f.b[k] = N(rng) / static_cast<double>(k + 1);
        }
        return f;
    }
    double operator()(double t) const {
        double s = a0;
        for (std::size_t k = 0; k < 4; ++k) {
            const double w = static_cast<double>(k + 1) * std::numbers::pi * t / R;
            s += a[k] * std::cos(w) + b[k] * std::sin(w);
        }
        return s;
    }
};

template <int M>
void task_fiber_check(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    auto s = fiber_setup<M>(cfg, d, rep, 2.0);
    if (!s) return;
    std::vector<const FiberData<M>*> usable;
    for (const auto& f : s->fibers)
        if (f.cut_index >= 2) usable.push_back(&f);
    rep.values["fibers"] = s->fibers.size();
    rep.values["usable_fibers"] = usable.size();
    if (usable.empty()) {
        rep.findings.push_back(holds("fibers with a minimizing segment", false, 0.0));
        return;
    }
    auto os = out.open("fiber_checks.csv");
    CsvWriter w(os, {"p", "trial", "fiber", "lhs", "rhs", "allowance", "pass"});
    for (double p : cfg.numeric.p) {
        std::mt19937_64 rng(cfg.numeric.seed);
        int fails = 0;
        for (int i = 0; i < cfg.numeric.trials; ++i) {
            const std::size_t k = static_cast<std::size_t>(i) % usable.size();
            const auto fn = FiberFunction::draw(rng, s->width.R);
            const auto r = fiber_poincare_check<M>(*usable[k], std::function<double(double)>(fn), p, s->proof.C_HK,
                                                   s->width.R);
            fails += r.pass ? 0 : 1;
            w.row({p, static_cast<double>(i), static_cast<double>(k), r.lhs, r.rhs, r.allowance, r.pass ? 1.0 : 0.0});
        }
        rep.findings.push_back(compare(pname(p) + ": failing fiber functions", fails, "<=", 0.0, 0.0, false,
                                       std::to_string(cfg.numeric.trials) + " trials"));
    }
}

template <int M>
void task_deform(const RunConfig& cfg, Outputs& out, RunReport& rep) {
    const auto& b = cfg.domains.front();
    DomainConfig c = b.config;
    c.dimension = M;
    const auto d = build_domain<M>(c);
    double rb = cfg.numeric.r_boundary > 0 ? cfg.numeric.r_boundary : b.deform.r_boundary;
    if (!(rb > 0)) rb = audited_r_boundary<M>(d, cfg.numeric.audit_n);
    std::vector<double> sweep = cfg.numeric.r_prime;
    if (sweep.empty()) sweep.push_back(b.deform.r_prime > 0 ? b.deform.r_prime : default_r_prime(rb, d.epsilon));
    rep.values["r_boundary"] = rb;
    auto os = out.open("deformation.csv");
    CsvWriter w(os, {"r_prime", "r_boundary", "C", "volume_log_max", "covector_violation", "product_defect",
                     "far_defect", "samples"});
    std::vector<std::pair<double, double>> C;
    for (double rp : sweep) {
        const auto r = deformation_audit<M>(d, deform_metric<M>(d, rp, rb), rb, 16, cfg.numeric.seed);
        const std::string tag = "r'=" + fmt17(rp) + ": ";
        rep.findings.push_back(compare(tag + "product defect for t <= r'", r.product_defect, "<=", 0.0, 1e-9, false));
        rep.findings.push_back(compare(tag + "|g' - g| for t >= 3r'", r.far_defect, "<=", 0.0, 1e-12, false));
        rep.findings.push_back(
            compare(tag + "max |log det g'/g| <= m log C", r.volume_log_max, "<=", M * std::log(r.C), 1e-12, false));
        rep.findings.push_back(compare(tag + "covector bound excess", r.covector_violation, "<=", 0.0, 1e-12, false));
        w.row({rp, rb, r.C, r.volume_log_max, r.covector_violation, r.product_defect, r.far_defect,
               static_cast<double>(r.samples)});
        C.push_back({rp, r.C});
    }
    std::sort(C.begin(), C.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    double rise = 0.0;
    for (std::size_t i = 1; i < C.size(); ++i) rise = std::max(rise, C[i].second - C[i - 1].second);
    if (C.size() > 1)
        rep.findings.push_back(compare("increase of C as r' shrinks", rise, "<=", 0.0, 1e-12, false));
    Json cs = Json::array();
    for (const auto& [rp, c2] : C) cs.push_back({{"r_prime", rp}, {"C", c2}});
    rep.values["C"] = cs;
}

template <int M>
void task_atlas(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    const auto& nb = cfg.numeric;
    AtlasOptions ao;
    ao.r = nb.r;
    ao.r_fc = nb.r_fc;
    ao.n = nb.audit_n;
    ao.audit.n = nb.audit_n;
    double r_fc = 0.0;
    const FermiAtlas<M> A(d, nb.r, build_covering<M>(d, ao, &r_fc));
    AtlasAuditOptions o;
    o.n = nb.audit_n;
    o.roundtrip_samples = nb.roundtrip_samples;
    o.seed = nb.seed;
    const auto a = audit_atlas<M>(A, o);
    o.seed = nb.seed + 1;
    const auto b = audit_atlas<M>(A, o);
    auto& v = rep.values;
    v["r"] = nb.r;
    v["r_fc"] = r_fc;
    v["charts"] = a.charts;
    v["boundary_charts"] = a.boundary_charts;
    v["interior_charts"] = a.interior_charts;
    v["min_separation"] = a.min_separation;
    v["min_interior_depth"] = json_number(a.min_interior_depth);
    v["N_0"] = a.max_windows;
    rep.findings.push_back(compare("partition of unity sum error", a.partition_sum_error, "<=", 0.0, 1e-12, false));
    rep.findings.push_back(compare("support violations", static_cast<double>(a.support_violations), "<=", 0.0, 0.0, false));
    rep.findings.push_back(compare("chart round-trip error", a.roundtrip_max, "<=", 0.0, 1e-8, false));
    rep.findings.push_back(compare("Fermi gauge |g_tt - 1|, |g_it| at t = 0", a.gauge_max, "<=", 0.0, 1e-8, false));
    double spread = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < 3; ++k) {
        spread = std::max({spread, std::abs(static_cast<double>(a.multiplicity[k]) - static_cast<double>(b.multiplicity[k])),
                           std::abs(a.C_alpha[k] - b.C_alpha[k]),
                           std::abs(a.chart_metric_bound[k] - b.chart_metric_bound[k])});
        finite = finite && std::isfinite(a.C_alpha[k]) && std::isfinite(a.chart_metric_bound[k]);
    }
    rep.findings.push_back(holds("N_R and C_alpha tables finite", finite, 0.0));
    rep.findings.push_back(compare("N_R and C_alpha change across two seeds", spread, "<=", 0.0, 0.0, false));
    {
        auto os = out.open("covering.csv");
        auto header = column_names<M>(d);
        header.insert(header.begin(), {"index", "boundary", "face"});
        CsvWriter w(os, header);
        for (std::size_t i = 0; i < A.points().size(); ++i) {
            const auto& c = A.points()[i];
            std::vector<double> r{static_cast<double>(i), c.boundary ? 1.0 : 0.0, c.face == Face::top ? 1.0 : 0.0};
            r.insert(r.end(), c.point.data(), c.point.data() + M);
            w.row(r);
        }
    }
    {
        auto os = out.open("multiplicity.csv");
        CsvWriter w(os, {"R", "N_R"});
        for (std::size_t k = 0; k < 3; ++k) w.row({a.radii[k], static_cast<double>(a.multiplicity[k])});
    }
    {
        auto os = out.open("derivatives.csv");
        CsvWriter w(os, {"order", "C_alpha", "chart_metric_bound"});
        for (std::size_t k = 0; k < 3; ++k) w.row({static_cast<double>(k), a.C_alpha[k], a.chart_metric_bound[k]});
    }
}

// lambda_min of a flat slab with constant faces: pi^2/(4H^2) for one Dirichlet
// face, pi^2/H^2 for two.
template <int M>
std::optional<double> flat_oracle(const DomainBlock& b, const DomainSpec<M>& d) {
    if (b.deform.enabled || b.config.base_family != "flat" || !d.top.is_constant() || !d.bot.is_constant())
        return std::nullopt;
    const double H = d.max_height, pi2 = std::numbers::pi * std::numbers::pi;
    if (d.dirichlet_bottom && d.dirichlet_top) return pi2 / (H * H);
    if (d.has_dirichlet()) return pi2 / (4 * H * H);
    return std::nullopt;
}

template <int M>
void task_eigen(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    const auto& nb = cfg.numeric;
    const auto sys = discretize<M>(d, nb.n);
    const auto s = smallest_eigenvalue<M>(sys);
    auto& v = rep.values;
    v["lambda_min"] = s.lambda_min;
    if (s.poincare_fails) {
        rep.findings.push_back(holds("Poincaré inequality", false, 0.0, "Poincaré fails: no Dirichlet face, lambda_min = 0"));
        return;
    }
    v["c"] = s.c;
    v["gamma"] = s.gamma;
    v["iterations"] = s.iterations;
    v["residual"] = s.residual;
    rep.findings.push_back(holds("lambda_min > 0", s.lambda_min > 0, s.lambda_min));
    const auto oracle = nb.oracle ? nb.oracle : flat_oracle<M>(cfg.domains.front(), d);
    if (oracle) {
        v["oracle"] = *oracle;
        rep.findings.push_back(compare("lambda_min vs oracle", s.lambda_min, "~=", *oracle, nb.oracle_tolerance, true));
    }
    const auto ne = norm_equivalence_audit<M>(sys, nb.trials, nb.seed);
    const double c2 = s.c * s.c + 1;
    rep.findings.push_back(compare("max ||u||^2_H1 / |u|^2_H1 <= c^2 + 1", ne.value, "<=", c2, 0.02, true));
    rep.findings.push_back(compare("ground mode attains c^2 + 1", norm_ratio<M>(sys, s.mode), "~=", c2, 1e-6, true));
    auto cs = out.open("coercivity.csv");
    CsvWriter cw(cs, {"lambda", "min_quotient", "bound", "worst_trial", "mode_quotient"});
    for (double lam : nb.lambda) {
        const auto a = coercivity_audit<M>(sys, lam, nb.trials, nb.seed);
        const double mq = coercivity_quotient<M>(sys, lam, s.mode);
        rep.findings.push_back(compare("lambda=" + fmt17(lam) + ": min coercivity quotient >= gamma - lambda", a.value,
                                       ">=", s.gamma - lam, 0.05, true, std::to_string(nb.trials) + " trials"));
        cw.row({lam, a.value, s.gamma - lam, static_cast<double>(a.worst_trial), mq});
    }
    rep.findings.push_back(
        compare("ground mode attains gamma", coercivity_quotient<M>(sys, 0.0, s.mode), "~=", s.gamma, 1e-6, true));
    auto ms = out.open("mode.csv");
    auto header = column_names<M>(d);
    header.push_back("u");
    CsvWriter mw(ms, header);
    const Vector u = sys.extend(s.mode);
    for (std::size_t i = 0; i < sys.node_count(); ++i)
        mw.row(row_with_point<M>(sys.grid->position(i), {u[static_cast<Eigen::Index>(i)]}));
}

template <int M>
void task_solve(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    const auto& nb = cfg.numeric;
    const auto sys = discretize<M>(d, nb.n);
    const auto& G = *sys.grid;
    SpectralReport spec;
    ResolventOptions opt;
    opt.tol = nb.tolerance;
    opt.seed = nb.seed;
    if (sys.has_dirichlet()) {
        spec = smallest_eigenvalue<M>(sys);
        opt.spectrum = &spec;
        rep.values["lambda_min"] = spec.lambda_min;
        rep.values["gamma"] = spec.gamma;
    }
    const Vector f = expression_values<M>(G, cfg.data.source, d);
    const Vector gD = expression_values<M>(G, cfg.data.dirichlet, d);
    const Vector gN = expression_values<M>(G, cfg.data.neumann, d);
    const Vector exact = expression_values<M>(G, cfg.data.exact, d);
    auto os = out.open("solution.csv");
    auto header = column_names<M>(d);
    header.insert(header.begin(), "lambda");
    header.insert(header.end(), {"u", "flux"});
    CsvWriter w(os, header);
    Json runs = Json::array();
    for (double lam : nb.lambda) {
        const std::string tag = "lambda=" + fmt17(lam) + ": ";
        MixedSolution s;
        try {
            s = resolvent_solve<M>(sys, lam, f, gD, gN, opt);
        } catch (const NotPositiveDefinite& e) {
            rep.findings.push_back(holds(tag + "resolvent operator positive definite", false, lam, e.what()));
            runs.push_back({{"lambda", lam}, {"indefinite", true}});
            continue;
        }
        Json r{{"lambda", lam}, {"band", s.band}, {"residual", s.residual}, {"cg_iterations", s.cg_iterations}};
        rep.findings.push_back(compare(tag + "relative residual", s.residual, "<=", nb.tolerance, 1.0, true));
        rep.findings.push_back(compare(tag + "Dirichlet trace error", s.dirichlet_error, "<=", 0.0, 1e-12, false));
        if (exact.size() > 0) r["max_nodal_error"] = (s.u - exact).cwiseAbs().maxCoeff();
        runs.push_back(r);
        for (std::size_t i = 0; i < sys.node_count(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            auto row = row_with_point<M>(G.position(i), {s.u[k], s.flux[k]});
            row.insert(row.begin(), lam);
            w.row(row);
        }
    }
    rep.values["runs"] = runs;
}

template <int M>
ManufacturedCase<M> manufactured_from(const std::string& exact, const DomainSpec<M>& d, double lambda) {
    auto e = std::make_shared<const Expression>(Expression::parse(exact, column_names<M>(d), d.parameters));
    ManufacturedCase<M> mc;
    mc.u = [e](const Vec<M>& p) { return (*e)(std::span<const double>(p.data(), M)); };
    mc.grad = [e](const Vec<M>& p) {
        const auto j = e->template jet<M>(std::span<const double>(p.data(), M));
        Vec<M> g;
        for (int i = 0; i < M; ++i) g[i] = j.d[static_cast<std::size_t>(i)];
        return g;
    };
    mc.lambda = lambda;
    return mc;
}

template <int M>
void task_converge(const RunConfig& cfg, const DomainSpec<M>& d, Outputs& out, RunReport& rep) {
    const auto& nb = cfg.numeric;
    const auto mc = manufactured_from<M>(cfg.data.exact, d, nb.lambda.front());
    const auto st = convergence_study<M>(d, mc, nb.grids);
    const std::string note = st.exact ? "errors at roundoff: orders undefined" : "";
    rep.values["l2_order"] = json_number(st.l2_order);
    rep.values["h1_order"] = json_number(st.h1_order);
    rep.findings.push_back(holds("errors decrease monotonically", st.monotone, 0.0));
    rep.findings.push_back(compare("L2 order", st.l2_order, "~=", nb.expected_l2_order, nb.order_tolerance, false, note));
    rep.findings.push_back(compare("H1 order", st.h1_order, "~=", nb.expected_h1_order, nb.order_tolerance, false, note));
    auto os = out.open("convergence.csv");
    CsvWriter w(os, {"n", "h", "l2", "h1", "residual", "cg_iterations"});
    for (const auto& r : st.rows)
        w.row({static_cast<double>(r.n), r.h, r.l2, r.h1, r.residual, static_cast<double>(r.cg_iterations)});
    if (cfg.domains.front().deform.enabled) {
        DomainConfig c = cfg.domains.front().config;
        c.dimension = M;
        const auto plain = build_domain<M>(c);
        const auto ref = convergence_study<M>(plain, manufactured_from<M>(cfg.data.exact, plain, nb.lambda.front()), nb.grids);
        rep.values["undeformed_l2_order"] = json_number(ref.l2_order);
        rep.values["undeformed_h1_order"] = json_number(ref.h1_order);
        rep.findings.push_back(compare("L2 order vs undeformed metric", st.l2_order, "~=", ref.l2_order, 0.2, false));
        rep.findings.push_back(compare("H1 order vs undeformed metric", st.h1_order, "~=", ref.h1_order, 0.2, false));
    }
}

template <int M>
void task_family(const RunConfig& cfg, Outputs& out, RunReport& rep) {
    const auto& nb = cfg.numeric;
    std::vector<DomainSpec<M>> domains;
    for (const auto& b : cfg.domains) domains.push_back(build_block<M>(b, nb.audit_n));
    auto os = out.open("family.csv");
    CsvWriter w(os, {"p", "index", "R", "infinite_width", "ricci_lower", "c_hat", "c_eigen"});
    for (double p : nb.p) {
        const auto a = uniform_family_audit<M>(domains, p, nb.trials, nb.seed, nb.n);
        for (const auto& m : a.members)
            w.row({p, static_cast<double>(m.index), m.R, m.infinite_width ? 1.0 : 0.0, m.ricci_lower, m.c_hat, m.c_eigen});
        if (a.finding.rfind("infinite width", 0) == 0) {
            rep.findings.push_back(holds(pname(p) + ": finite width of every component", false,
                                         std::numeric_limits<double>::infinity(), a.finding));
            continue;
        }
        rep.findings.push_back(compare(pname(p) + ": max component c_hat <= proof constant", a.max_c_hat, "<=",
                                       a.worst.c_proof, 0.0, false, a.finding));
        rep.values[pname(p)] = {{"max_c_hat", a.max_c_hat}, {"argmax", a.argmax}, {"R", a.worst.R},
                                {"ricci_lower", a.worst.ricci_lower}, {"c_proof", a.worst.c_proof}};
    }
}

template <int M>
void run_task_dim(const RunConfig& cfg, const std::string& task, Outputs& out, RunReport& rep) {
    if (task == "family") return task_family<M>(cfg, out, rep);
    if (task == "deform") return task_deform<M>(cfg, out, rep);
    Json deformed;
    const auto d = build_block<M>(cfg.domains.front(), cfg.numeric.audit_n, &deformed);
    if (!deformed.is_null()) rep.values["deformation"] = deformed;
    if (task == "describe") return task_describe<M>(cfg, d, out, rep);
    if (task == "audit-geometry") return task_audit_geometry<M>(cfg, d, out, rep);
    if (task == "poincare") return task_poincare<M>(cfg, d, out, rep);
    if (task == "hk-audit") return task_hk_audit<M>(cfg, d, out, rep);
    if (task == "fiber-check") return task_fiber_check<M>(cfg, d, out, rep);
    if (task == "atlas") return task_atlas<M>(cfg, d, out, rep);
    if (task == "eigen") return task_eigen<M>(cfg, d, out, rep);
    if (task == "solve") return task_solve<M>(cfg, d, out, rep);
    if (task == "converge") return task_converge<M>(cfg, d, out, rep);
    throw ArgumentError("unknown task '" + task + "'");
}

}  // namespace detail

// Validates, runs and writes report.json next to the CSV files.
inline RunReport run(const RunConfig& cfg, const std::string& task, const std::string& out_dir) {
    validate_for_task(cfg, task);
    RunReport rep;
    rep.task = task;
    rep.config = cfg.raw;
    rep.config["resolved"] = {{"seed", cfg.numeric.seed}, {"output_dir", out_dir}};
    detail::Outputs out(out_dir, rep);
    if (cfg.dimension() == 2)
        detail::run_task_dim<2>(cfg, task, out, rep);
    else
        detail::run_task_dim<3>(cfg, task, out, rep);
    std::ofstream js(std::filesystem::path(out_dir) / "report.json");
    js << rep.to_json().dump(2) << '\n';
    return rep;
}

}  // namespace boundedgeo
