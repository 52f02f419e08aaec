// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [--criterion N] --cli <boundedgeo binary> --configs <dir> --work <dir>
// Exit status 0 iff every selected criterion passes.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "boundedgeo/tasks.hpp"

using namespace boundedgeo;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Pinned tolerances.
constexpr double kEigenRel = 0.01;
constexpr double kEigenSeconds = 30.0;
constexpr double kChainRel = 0.015;
constexpr double kChainSlack = 1.05;
constexpr double kChainSeconds = 60.0;
constexpr double kCoercivityFactor = 0.95;
constexpr double kNormSlack = 1.02;
constexpr double kModeRel = 1e-6;
constexpr double kHkSlack = 1.02;
constexpr double kV0 = 1e-6;
constexpr double kWideningRel = 0.05;
constexpr double kPartitionSum = 1e-12;
constexpr double kRoundtrip = 1e-8;
constexpr double kGauge = 1e-8;
constexpr double kRoundoff = 1e-12;
constexpr double kDeformedOrder = 0.2;
constexpr double kOrderTol = 0.15;
constexpr double kConvergeSeconds = 120.0;
constexpr int kTrials = 200;
constexpr int kFiberTrials = 100;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[fail] ";
        }
        detail << what << "; ";
    }
};

struct Paths {
    std::string cli, configs, work;
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <int M = 2>
DomainSpec<M> slab(const std::string& top, std::vector<std::string> dirichlet, const std::string& bot = "0",
                   const std::string& phi = "") {
    DomainConfig c;
    c.dimension = M;
    c.top = top;
    c.bot = bot;
    c.dirichlet = std::move(dirichlet);
    if (!phi.empty()) {
        c.base_family = "conformal";
        c.phi = phi;
        c.parameters = {{"a", 0.2}, {"b", 1.0}};
    }
    return build_domain<M>(c);
}

DomainSpec<2> dn_strip() { return slab("1", {"bottom"}); }
DomainSpec<2> conformal_strip() { return slab("1", {"bottom"}, "0", "a*sin(b*x)"); }
DomainSpec<2> wavy() { return slab("2", {"bottom"}, "0.2*sin(x)"); }

void c1(Outcome& o, const Paths&) {
    const auto t0 = std::chrono::steady_clock::now();
    const double dn = smallest_eigenvalue<2>(discretize<2>(dn_strip(), 64)).lambda_min;
    const double dd = smallest_eigenvalue<2>(discretize<2>(slab("1", {"bottom", "top"}), 64)).lambda_min;
    const double sec = seconds_since(t0);
    o.require(std::abs(dn / (kPi * kPi / 4) - 1) <= kEigenRel, "D/N lambda_min " + num(dn) + " vs pi^2/4");
    o.require(std::abs(dd / (kPi * kPi) - 1) <= kEigenRel, "D/D lambda_min " + num(dd) + " vs pi^2");
    o.require(sec < kEigenSeconds, "runtime " + num(sec) + " s");
}

void c2(Outcome& o, const Paths&) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = dn_strip();
    const auto s = smallest_eigenvalue<2>(discretize<2>(d, 64));
    const auto e = empirical_poincare<2>(d, 2.0, kTrials, 0, 64);
    const auto w = finite_width_report<2>(eikonal_distance<2>(d, 64));
    const auto k = proof_constant(w.R, ricci_lower_bound<2>(d), 2, 2.0);
    const double sec = seconds_since(t0);
    o.require(std::abs(s.c / (2 / kPi) - 1) <= kChainRel, "c " + num(s.c) + " vs 2/pi");
    const double g = kPi * kPi / (kPi * kPi + 4);
    o.require(std::abs(s.gamma / g - 1) <= kChainRel, "gamma " + num(s.gamma) + " vs pi^2/(pi^2+4)");
    o.require(s.c <= e.c_hat * kChainSlack, "c <= c_hat*1.05 with c_hat " + num(e.c_hat));
    o.require(e.c_hat * kChainSlack <= k.c_proof * kChainSlack,
              "c_hat*1.05 <= c_proof*1.05 with C " + num(k.C) + ", R " + num(w.R) + ", c_proof " + num(k.c_proof));
    o.require(sec < kChainSeconds, "runtime " + num(sec) + " s");
}

void c3(Outcome& o, const Paths&) {
    const auto sys = discretize<2>(dn_strip(), 64);
    const auto s = smallest_eigenvalue<2>(sys);
    for (double lam : {0.0, 0.3, -10.0}) {
        const auto a = coercivity_audit<2>(sys, lam, kTrials, 0);
        o.require(a.value >= (s.gamma - lam) * kCoercivityFactor,
                  "lambda " + num(lam) + ": min quotient " + num(a.value) + " vs (gamma-lambda)*0.95 = " +
                      num((s.gamma - lam) * kCoercivityFactor));
    }
    const double c2 = s.c * s.c + 1;
    const auto ne = norm_equivalence_audit<2>(sys, kTrials, 0);
    o.require(ne.value <= c2 * kNormSlack, "max norm ratio " + num(ne.value) + " vs (c^2+1)*1.02 = " + num(c2 * kNormSlack));
    const double at_mode = norm_ratio<2>(sys, s.mode);
    o.require(std::abs(at_mode / c2 - 1) <= kModeRel, "ground mode ratio " + num(at_mode) + " = c^2+1");
}

template <int M>
void hk_one(Outcome& o, const std::string& name, const DomainSpec<M>& d) {
    const auto field = eikonal_distance<M>(d, 48);
    const double R = finite_width_report<M>(field).R;
    const auto k = proof_constant(R, ricci_lower_bound<M>(d), M, 2.0);
    const auto fibers = dirichlet_fibers<M>(d, field);
    const auto a = hk_ratio_audit<M>(fibers, k.C_HK, kHkSlack - 1);
    double v0 = 0.0;
    for (const auto& f : fibers) v0 = std::max(v0, std::abs(f.samples.front().v - 1));
    o.require(a.max_ratio <= k.C_HK * kHkSlack && a.samples > 0,
              name + ": max ratio " + num(a.max_ratio) + " vs C_HK*1.02 = " + num(k.C_HK * kHkSlack));
    o.require(v0 <= kV0, name + ": max |v(x,0)-1| " + num(v0));
}

void c4(Outcome& o, const Paths&) {
    hk_one<2>(o, "flat", dn_strip());
    hk_one<2>(o, "conformal a=0.2 b=1", conformal_strip());
}

void c5(Outcome& o, const Paths&) {
    for (auto [faces, expect] : {std::pair{std::vector<std::string>{"bottom"}, 1.0},
                                 std::pair{std::vector<std::string>{"bottom", "top"}, 0.5}}) {
        const auto d = slab("1", faces);
        const auto field = eikonal_distance<2>(d, 64);
        double worst = 0.0;
        for (const auto& f : dirichlet_fibers<2>(d, field)) worst = std::max(worst, std::abs(f.L - expect));
        o.require(worst <= 2 * field.h, std::to_string(faces.size()) + " Dirichlet face(s): max |L - " + num(expect) +
                                             "| " + num(worst) + " vs 2h = " + num(2 * field.h));
    }
    const auto d = slab("1", {"bottom", "top"});
    // At n = 32 the band 2h + 1e-6 exceeds half the height and flags every node.
    const auto coarse = cut_locus_measure<2>(d, eikonal_distance<2>(d, 64));
    const auto fine = cut_locus_measure<2>(d, eikonal_distance<2>(d, 128));
    o.require(fine.fraction <= coarse.fraction / 2 && fine.fraction > 0,
              "cut-locus fraction " + num(coarse.fraction) + " -> " + num(fine.fraction));
}

void c6(Outcome& o, const Paths&) {
    const std::vector<std::pair<std::string, DomainSpec<2>>> domains{
        {"flat", dn_strip()}, {"conformal", conformal_strip()}, {"wavy", wavy()}};
    for (const auto& [name, d] : domains) {
        const auto field = eikonal_distance<2>(d, 48);
        const double R = finite_width_report<2>(field).R;
        const double C_HK = proof_constant(R, ricci_lower_bound<2>(d), 2, 2.0).C_HK;
        std::vector<FiberData<2>> usable;
        for (auto& f : dirichlet_fibers<2>(d, field))
            if (f.cut_index >= 2) usable.push_back(std::move(f));
        if (usable.empty()) {
            o.require(false, name + ": no usable fibers");
            continue;
        }
        for (double p : {1.0, 2.0, kInf}) {
            std::mt19937_64 rng(0);
            int fails = 0;
            for (int i = 0; i < kFiberTrials; ++i) {
                const auto fn = detail::FiberFunction::draw(rng, R);
                fails += fiber_poincare_check<2>(usable[static_cast<std::size_t>(i) % usable.size()],
                                                 std::function<double(double)>(fn), p, C_HK, R)
                             .pass
                             ? 0
                             : 1;
            }
            o.require(fails == 0, name + " p=" + num(p) + ": " + std::to_string(fails) + "/100 fail");
        }
    }
}

void c7(Outcome& o, const Paths&) {
    double prev = kInf;
    for (double w : {1.0, 2.0, 4.0, 8.0}) {
        const double lam = smallest_eigenvalue<2>(discretize<2>(slab(fmt17(w), {"bottom"}), 64)).lambda_min;
        const double oracle = kPi * kPi / (4 * w * w);
        o.require(std::abs(lam / oracle - 1) <= kWideningRel && lam < prev, "w=" + num(w) + ": " + num(lam));
        prev = lam;
    }
    RunConfig cfg = parse_config(R"({"domain": {"top": "1", "dirichlet": []}, "numeric": {"n": 32}})");
    const auto rep = run(cfg, "eigen", (std::filesystem::temp_directory_path() / "boundedgeo_c7").string());
    bool says = false;
    for (const auto& f : rep.findings) says = says || (!f.pass && f.note.find("Poincaré fails") != std::string::npos);
    o.require(says && rep.values["lambda_min"].get<double>() == 0.0, "empty Dirichlet part reports lambda_min = 0 and Poincaré fails");
}

void atlas_one(Outcome& o, const std::string& name, const DomainSpec<2>& d) {
    AtlasOptions ao;
    ao.r = 0.25;
    const FermiAtlas<2> A(d, ao.r, build_covering<2>(d, ao));
    AtlasAuditOptions opt;
    const auto a = audit_atlas<2>(A, opt);
    opt.seed = 1;
    const auto b = audit_atlas<2>(A, opt);
    o.require(a.partition_sum_error <= kPartitionSum, name + ": partition sum " + num(a.partition_sum_error));
    o.require(a.support_violations == 0, name + ": support violations " + std::to_string(a.support_violations));
    o.require(a.roundtrip_max <= kRoundtrip, name + ": round trip " + num(a.roundtrip_max));
    o.require(a.gauge_max <= kGauge, name + ": gauge " + num(a.gauge_max));
    bool stable = a.multiplicity == b.multiplicity && a.C_alpha == b.C_alpha && a.chart_metric_bound == b.chart_metric_bound;
    bool finite = true;
    for (std::size_t k = 0; k < 3; ++k) finite = finite && std::isfinite(a.C_alpha[k]) && std::isfinite(a.chart_metric_bound[k]);
    o.require(stable && finite, name + ": N_R, C_alpha finite and identical across seeds");
}

void c8(Outcome& o, const Paths&) {
    atlas_one(o, "flat", dn_strip());
    atlas_one(o, "curved top", slab("1 + 0.2*cos(x)", {"bottom"}));
}

void c9(Outcome& o, const Paths&) {
    const auto d = wavy();
    AuditOptions ao;
    const double rb = bounded_geometry_audit<2>(d, ao).r_boundary;
    std::vector<double> C;
    for (double rp : {0.2, 0.1, 0.05}) {
        const auto r = deformation_audit<2>(d, deform_metric<2>(d, rp, rb), rb, 16, 0);
        o.require(r.product_defect <= kRoundoff && r.far_defect <= kRoundoff,
                  "r'=" + num(rp) + ": defects " + num(r.product_defect) + ", " + num(r.far_defect));
        C.push_back(r.C);
    }
    o.require(C[0] > C[1] && C[1] > C[2] && C[2] >= 1,
              "C " + num(C[0]) + " > " + num(C[1]) + " > " + num(C[2]) + " >= 1");
    const auto mc = detail::manufactured_from<2>("sin(t)*cos(x) + t*t*sin(2*x)", d, 0.0);
    const auto plain = convergence_study<2>(d, mc);
    const auto def = convergence_study<2>(deform_metric<2>(d, 0.1, rb), mc);
    o.require(std::abs(def.l2_order - plain.l2_order) <= kDeformedOrder,
              "L2 order " + num(def.l2_order) + " vs undeformed " + num(plain.l2_order));
    o.require(std::abs(def.h1_order - plain.h1_order) <= kDeformedOrder,
              "H1 order " + num(def.h1_order) + " vs undeformed " + num(plain.h1_order));
}

void c10(Outcome& o, const Paths&) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = dn_strip();
    const auto st = convergence_study<2>(d, detail::manufactured_from<2>("sin(pi*t/2)*cos(x) + t*sin(2*x)", d, 0.0));
    const double sec = seconds_since(t0);
    o.require(std::abs(st.l2_order - 2.0) <= kOrderTol, "L2 order " + num(st.l2_order));
    o.require(std::abs(st.h1_order - 1.0) <= kOrderTol, "H1 order " + num(st.h1_order));
    o.require(sec < kConvergeSeconds, "runtime " + num(sec) + " s");
}

template <int M>
void resolvent_one(Outcome& o, const std::string& name, const DomainSpec<M>& d, int n, std::optional<double> oracle) {
    const auto sys = discretize<M>(d, n);
    const auto s = smallest_eigenvalue<M>(sys);
    const Vector f = nodal_values<M>(*sys.grid, [](const Vec<M>& p) { return 1 + p[0] * p[M - 1]; });
    int false_alarms = 0, runs = 0;
    for (double frac : {-5.0, -1.0, 0.0, 0.3, 0.6, 0.9, 0.99}) {
        const double lam = frac * s.gamma;
        for (bool guard : {true, false}) {
            ResolventOptions opt;
            opt.spectrum = guard ? &s : nullptr;
            ++runs;
            try {
                resolvent_solve<M>(sys, lam, f, {}, {}, opt);
            } catch (const NotPositiveDefinite&) {
                ++false_alarms;
            }
        }
    }
    o.require(false_alarms == 0, name + ": " + std::to_string(false_alarms) + "/" + std::to_string(runs) +
                                     " detections below gamma");
    const double above = 1.1 * oracle.value_or(s.lambda_min);
    for (bool guard : {true, false}) {
        ResolventOptions opt;
        opt.spectrum = guard ? &s : nullptr;
        bool fired = false;
        try {
            resolvent_solve<M>(sys, above, f, {}, {}, opt);
        } catch (const NotPositiveDefinite&) {
            fired = true;
        }
        o.require(fired, name + (guard ? ": spectrum guard" : ": CG curvature probe") + " fires at 1.1 lambda_min");
    }
}

void c11(Outcome& o, const Paths&) {
    resolvent_one<2>(o, "D/N strip", dn_strip(), 64, kPi * kPi / 4);
    resolvent_one<2>(o, "D/D strip", slab("1", {"bottom", "top"}), 64, kPi * kPi);
    resolvent_one<2>(o, "wavy", wavy(), 48, std::nullopt);
    resolvent_one<2>(o, "conformal", conformal_strip(), 48, std::nullopt);
    resolvent_one<3>(o, "3-D D/N slab", slab<3>("1", {"bottom"}), 12, std::nullopt);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void c12(Outcome& o, const Paths& paths) {
    if (paths.cli.empty() || paths.configs.empty()) {
        o.require(false, "needs --cli and --configs");
        return;
    }
    namespace fs = std::filesystem;
    const fs::path work = paths.work.empty() ? fs::temp_directory_path() / "boundedgeo_c12" : fs::path(paths.work);
    std::vector<fs::path> configs;
    for (const auto& e : fs::directory_iterator(paths.configs))
        if (e.path().extension() == ".json") configs.push_back(e.path());
    std::sort(configs.begin(), configs.end());
    std::size_t files = 0;
    for (const auto& c : configs) {
        const std::string task = load_config(c.string()).task;
        const std::string stem = c.stem().string();
        for (const char* run : {"a", "b"}) {
            const fs::path out = work / stem / run;
            fs::remove_all(out);
            const std::string cmd = "\"" + paths.cli + "\" " + task + " --config \"" + c.string() + "\" --out \"" +
                                    out.string() + "\" --seed 7 > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (!WIFEXITED(status) || WEXITSTATUS(status) == 1) o.require(false, stem + ": run " + run + " errored");
        }
        for (const auto& e : fs::directory_iterator(work / stem / "a")) {
            if (e.path().extension() != ".csv") continue;
            ++files;
            const auto other = work / stem / "b" / e.path().filename();
            if (slurp(e.path()) != slurp(other)) o.require(false, stem + "/" + e.path().filename().string() + " differs");
        }
    }
    o.require(files > 0, std::to_string(configs.size()) + " configs, " + std::to_string(files) + " CSV files byte-identical");
}

struct Criterion {
    const char* name;
    void (*run)(Outcome&, const Paths&);
};

const Criterion kCriteria[] = {
    {"eigenvalue oracle", c1},
    {"constants chain", c2},
    {"coercivity and norm equivalence", c3},
    {"Heintze-Karcher ratio audit", c4},
    {"cut-function oracles", c5},
    {"fiberwise Poincare", c6},
    {"widening strips and empty Dirichlet part", c7},
    {"atlas suite", c8},
    {"deformation suite", c9},
    {"convergence orders", c10},
    {"resolvent contract", c11},
    {"determinism", c12},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    int which = 0;
    Paths paths;
    app.add_option("--criterion", which, "1-12; 0 runs all")->check(CLI::Range(0, 12));
    app.add_option("--cli", paths.cli, "boundedgeo executable");
    app.add_option("--configs", paths.configs, "directory of sample configs");
    app.add_option("--work", paths.work, "scratch directory");
    CLI11_PARSE(app, argc, argv);
    bool all = true;
    for (int i = 1; i <= 12; ++i) {
        if (which && i != which) continue;
        const auto& c = kCriteria[i - 1];
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o, paths);
        } catch (const std::exception& e) {
            o.require(false, std::string("error: ") + e.what());
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i << " (" << c.name << ", "
                  << num(seconds_since(t0)) << " s): " << o.detail.str() << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
