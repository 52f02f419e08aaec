#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "boundedgeo/atlas.hpp"

using namespace boundedgeo;

namespace {

constexpr double kPi = std::numbers::pi;

DomainSpec<2> strip(const std::string& top = "1", const std::string& bot = "0") {
    DomainConfig c;
    c.top = top;
    c.bot = bot;
    return build_domain<2>(c);
}

DomainSpec<2> small_box(double side) {
    DomainConfig c;
    c.top = std::to_string(side);
    c.extent = {{0.0, side, false}};
    return build_domain<2>(c);
}

AtlasOptions options(double r, double r_fc, int n = 32) {
    AtlasOptions o;
    o.r = r;
    o.r_fc = r_fc;
    o.n = n;
    return o;
}

// Upper bound on the number of (r/2)-separated points within R of a probe in
// the flat strip: disjoint discs of radius r/4 packed into the enlarged disc
// clipped to the enlarged band.
double packing_bound(double R, double r, double height) {
    const double rho = R + r / 4, band = height + r / 2;
    const double area = std::min(kPi * rho * rho, 2 * rho * band);
    return area / (kPi * (r / 4) * (r / 4));
}

std::vector<double> random_smooth(const StructuredGrid<2>& G, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    double a[4][3], b[4][3];
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 3; ++j) {
            a[k][j] = N(rng) / (1 + k * k);
            b[k][j] = N(rng) / (1 + k * k);
        }
    std::vector<double> u(G.node_count());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto& p = G.position(i);
        double v = 0.0;
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 3; ++j) v += (a[k][j] * std::cos(k * p[0]) + b[k][j] * std::sin(k * p[0])) * std::pow(p[1], j);
        u[i] = v;
    }
    return u;
}

}  // namespace

TEST(FermiChart, FlatStripIsTranslation) {
    const auto d = std::make_shared<const DomainSpec<2>>(strip());
    CoveringPoint<2> p;
    p.boundary = true;
    p.x = Vec<1>(1.0);
    p.point = Vec<2>(1.0, 0.0);
    Chart<2> bottom(d, p, 0.25);
    EXPECT_NEAR((bottom.forward(Vec<2>(0.1, 0.05)) - Vec<2>(1.1, 0.05)).norm(), 0.0, 1e-15);
    p.face = Face::top;
    p.point = Vec<2>(1.0, 1.0);
    Chart<2> top(d, p, 0.25);
    EXPECT_NEAR((top.forward(Vec<2>(0.1, 0.05)) - Vec<2>(1.1, 0.95)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((bottom.inverse(Vec<2>(0.9, 0.2)) - Vec<2>(-0.1, 0.2)).norm(), 0.0, 1e-12);
}

TEST(Covering, RadiusAboveRfcRejected) {
    EXPECT_THROW(build_covering<2>(strip(), options(0.5, 0.0)), ArgumentError);
}

// r = 0.5 exceeds the audited r_FC = 0.25 of this strip; with a caller-supplied
// bound the packing count still holds.
TEST(Covering, FlatStripHalfRadius) {
    const auto d = strip();
    FermiAtlas<2> A(d, 0.5, build_covering<2>(d, options(0.5, 0.5)));
    const auto a = audit_atlas<2>(A, {32, 20, 0, 2, 3});
    EXPECT_LE(a.multiplicity[1], 25u);
    EXPECT_LE(a.partition_sum_error, 1e-12);
    EXPECT_GE(a.min_separation, 0.25);
}

TEST(Covering, SingleWindow) {
    const auto d = small_box(0.1);
    const auto pts = build_covering<2>(d, options(0.3, 0.3, 16));
    ASSERT_EQ(pts.size(), 1u);
    FermiAtlas<2> A(d, 0.3, pts);
    StructuredGrid<2> G(d, {16, 16});
    for (std::size_t i = 0; i < G.node_count(); ++i) EXPECT_DOUBLE_EQ(A.phi(0, G.position(i)), 1.0);
}

TEST(PartitionOfUnity, SymmetricPairSplitsEvenly) {
    const auto d = small_box(0.1);
    std::vector<CoveringPoint<2>> pts(2);
    for (int i = 0; i < 2; ++i) {
        pts[static_cast<std::size_t>(i)].boundary = true;
        pts[static_cast<std::size_t>(i)].x = Vec<1>(0.1 * i);
        pts[static_cast<std::size_t>(i)].point = Vec<2>(0.1 * i, 0.0);
    }
    FermiAtlas<2> A(d, 0.08, pts);
    const auto hits = A.partition(Vec<2>(0.05, 0.05));
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_NEAR(hits[0].value, 0.5, 1e-14);
    EXPECT_NEAR(hits[1].value, 0.5, 1e-14);
}

TEST(Atlas, FlatStripAudit) {
    const auto d = strip();
    double r_fc = 0.0;
    AtlasOptions o;
    o.r = 0.2;
    const auto pts = build_covering<2>(d, o, &r_fc);
    EXPECT_GE(r_fc, 0.2);
    FermiAtlas<2> A(d, 0.2, pts);
    for (const auto& p : pts) {
        if (p.boundary)
            EXPECT_TRUE(p.point[1] == 0.0 || p.point[1] == 1.0);
        else
            EXPECT_GE(std::min(p.point[1], 1.0 - p.point[1]), 0.2 - 1e-12);
    }
    AtlasAuditOptions ao;
    ao.seed = 1;
    const auto a = audit_atlas<2>(A, ao);
    EXPECT_LE(a.partition_sum_error, 1e-12);
    EXPECT_EQ(a.support_violations, 0u);
    EXPECT_LE(a.roundtrip_max, 1e-8);
    EXPECT_LE(a.gauge_max, 1e-8);
    EXPECT_GE(a.min_separation, 0.1 - 1e-12);
    EXPECT_GE(a.min_interior_depth, 0.2 - 1e-12);
    EXPECT_LE(a.multiplicity[0], a.multiplicity[1]);
    EXPECT_LE(a.multiplicity[1], a.multiplicity[2]);
    EXPECT_LE(static_cast<double>(a.multiplicity[1]), packing_bound(0.4, 0.2, 1.0));
    EXPECT_GE(a.max_windows, 1u);
    for (double c : a.C_alpha) EXPECT_TRUE(std::isfinite(c));
    EXPECT_LE(a.C_alpha[0], 1.0 + 1e-12);
    EXPECT_NEAR(a.chart_metric_bound[0], 1.0, 1e-8);  // identity chart metric
    ao.seed = 2;
    const auto b = audit_atlas<2>(A, ao);
    EXPECT_EQ(a.multiplicity, b.multiplicity);
    EXPECT_EQ(a.C_alpha, b.C_alpha);
    EXPECT_EQ(a.max_windows, b.max_windows);
}

// Curved face: boundary geodesics and normal fibers are integrated.
TEST(Atlas, CurvedFaceRoundTripAndGauge) {
    const auto d = strip("1", "0.1*sin(x)");
    FermiAtlas<2> A(d, 0.2, build_covering<2>(d, options(0.2, 0.2, 24)));
    AtlasAuditOptions ao;
    ao.n = 24;
    ao.derivative_charts = 3;
    const auto a = audit_atlas<2>(A, ao);
    EXPECT_LE(a.partition_sum_error, 1e-12);
    EXPECT_EQ(a.support_violations, 0u);
    EXPECT_LE(a.roundtrip_max, 1e-8);
    EXPECT_LE(a.gauge_max, 1e-8);
    for (double c : a.chart_metric_bound) EXPECT_TRUE(std::isfinite(c));
}

TEST(PartitionNorm, ZeroAndUnsupportedOrder) {
    const auto d = small_box(0.1);
    FermiAtlas<2> A(d, 0.3, build_covering<2>(d, options(0.3, 0.3, 16)));
    auto G = std::make_shared<const StructuredGrid<2>>(d, std::array<int, 2>{8, 8});
    EXPECT_EQ(partition_sobolev_norm<2>(std::vector<double>(G->node_count(), 0.0), A, G, 1), 0.0);
    EXPECT_THROW(PartitionNorm<2>(A, G, 3), ArgumentError);
}

TEST(PartitionNorm, SingleFlatChartIsL2) {
    const auto d = small_box(0.1);
    FermiAtlas<2> A(d, 0.3, build_covering<2>(d, options(0.3, 0.3, 16)));
    auto G = std::make_shared<const StructuredGrid<2>>(d, std::array<int, 2>{16, 16});
    std::vector<double> u(G->node_count());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(20 * G->position(i)[0]) + G->position(i)[1];
    const double chart = partition_sobolev_norm<2>(u, A, G, 0);
    const double direct = std::sqrt(h1_parts<2>(*G, u).first);
    EXPECT_NEAR(chart / direct, 1.0, 1e-3);
}

// Equivalence with the H^1 norm: the extreme ratio over 100 random functions
// changes little between grids that resolve the bump scale r.
TEST(PartitionNorm, EquivalenceConstantStable) {
    const auto d = strip();
    FermiAtlas<2> A(d, 0.25, build_covering<2>(d, options(0.25, 0.25)));
    std::vector<double> c0;
    for (int n : {16, 32}) {
        auto G = std::make_shared<const StructuredGrid<2>>(d, std::array<int, 2>{4 * n, n});
        PartitionNorm<2> P(A, G, 1);
        std::mt19937_64 rng(7);
        double lo = 1e300, hi = 0.0;
        for (int s = 0; s < 100; ++s) {
            const auto u = random_smooth(*G, rng);
            const double ratio = std::sqrt(P.norm_squared(u) / P.direct_squared(u));
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        c0.push_back(std::max(hi, 1 / lo));
        EXPECT_GE(lo, 1 / c0.back());
        EXPECT_LE(hi, c0.back());
    }
    EXPECT_NEAR(c0[1] / c0[0], 1.0, 0.05);
}
