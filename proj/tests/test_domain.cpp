#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "boundedgeo/domain.hpp"

using namespace boundedgeo;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DomainConfig strip(const std::string& top, const std::string& bot = "0", int dim = 2) {
    DomainConfig c;
    c.dimension = dim;
    c.top = top;
    c.bot = bot;
    return c;
}

// Signed curvature of the graph of f (1-D), by central differences of f alone.
double graph_curvature(const std::function<double(double)>& f, double x, double h = 1e-4) {
    const double f1 = (f(x + h) - f(x - h)) / (2 * h);
    const double f2 = (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
    return f2 / std::pow(1 + f1 * f1, 1.5);
}

}  // namespace

TEST(Domain, UnitStripHasEpsilonOne) {
    auto d = build_domain<2>(strip("1"));
    EXPECT_DOUBLE_EQ(d.epsilon, 1.0);
    EXPECT_TRUE(d.dirichlet_bottom);
    EXPECT_FALSE(d.dirichlet_top);
    EXPECT_TRUE(d.periodic(0));
    EXPECT_DOUBLE_EQ(d.extent[0].length(), kTwoPi);
}

TEST(Domain, SinusoidalTopEpsilonByScan) {
    auto d = build_domain<2>(strip("2 + 0.3*sin(x)"));
    double scan = 1e300;
    for (int k = 0; k < 100000; ++k) scan = std::min(scan, 2 + 0.3 * std::sin(kTwoPi * k / 100000));
    EXPECT_NEAR(d.epsilon, scan, 1e-9);
    EXPECT_NEAR(d.epsilon, 1.7, 1e-9);
    EXPECT_NEAR(d.max_height, 2.3, 1e-9);
}

TEST(Domain, DegenerateAndMissingDirichletAreRejected) {
    try {
        (void)build_domain<2>(strip("0", "0"));
        FAIL();
    } catch (const DegenerateSlab& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate slab"), std::string::npos);
    }
    auto c = strip("1");
    c.dirichlet.clear();
    EXPECT_NO_THROW((void)build_domain<2>(c));
    EXPECT_THROW((void)build_domain<2>(c, true), NoDirichletFace);
    c.dimension = 3;
    EXPECT_THROW((void)build_domain<2>(c), ArgumentError);
    EXPECT_THROW((void)build_domain<2>(strip("1 +")), ParseError);
}

TEST(Domain, ConstantFacesHaveVerticalNormals) {
    auto d = build_domain<2>(strip("1"));
    auto top = unit_normal<2>(d, Vec<1>(0.4), Face::top);
    auto bot = unit_normal<2>(d, Vec<1>(0.4), Face::bottom);
    EXPECT_TRUE(top.nu.isApprox(Vec<2>(0, 1)));
    EXPECT_TRUE(bot.nu.isApprox(Vec<2>(0, -1)));
    EXPECT_DOUBLE_EQ(top.point[1], 1.0);
}

TEST(Domain, SlopedTopNormalIsUnitAndOrthogonal) {
    auto c = strip("x + 5");
    c.extent = {AxisExtent{-1, 1, false}};
    auto d = build_domain<2>(c);
    auto bp = unit_normal<2>(d, Vec<1>(0.25), Face::top);
    EXPECT_NEAR(bp.nu.squaredNorm(), 1.0, 1e-12);
    EXPECT_NEAR(bp.nu.dot(Vec<2>(1, 1)), 0.0, 1e-12);
    EXPECT_GT(bp.nu[1], 0.0);
    EXPECT_NEAR(bp.nu[0], -std::sqrt(0.5), 1e-12);
}

TEST(Domain, AffineGraphIsTotallyGeodesic) {
    auto c = strip("3 + 0.5*x");
    c.extent = {AxisExtent{0, 1, false}};
    auto d = build_domain<2>(c);
    auto s = shape_report<2>(d, Vec<1>(0.3), Face::top, 8);
    EXPECT_NEAR(s.II(0, 0), 0.0, 1e-14);
    EXPECT_NEAR(s.sup_norms.at("II"), 0.0, 1e-12);
    EXPECT_NEAR(s.sup_norms.at("nabla II"), 0.0, 1e-8);
}

TEST(Domain, ParabolaHasUnitCurvatureAtVertex) {
    auto c = strip("2 + x^2/2");
    c.extent = {AxisExtent{-1, 1, false}};
    auto d = build_domain<2>(c);
    auto s = shape_report<2>(d, Vec<1>(0.0), Face::top);
    EXPECT_NEAR(s.mean_curvature, 1.0, 1e-12);
    EXPECT_NEAR(s.mean_curvature, graph_curvature([](double x) { return 2 + x * x / 2; }, 0.0), 1e-6);
    auto s2 = shape_report<2>(build_domain<2>(strip("2 + sin(x)")), Vec<1>(0.0), Face::top);
    EXPECT_NEAR(s2.mean_curvature, 0.0, 1e-14);
}

// 100 random boundary samples per face: unit length, orthogonality, and II
// against the graph-curvature oracle (flat base).
TEST(Domain, NormalAndSecondFundamentalFormInvariants) {
    auto d = build_domain<2>(strip("2 + 0.3*sin(x) + 0.1*cos(2*x)", "0.2*sin(x)"));
    auto top = [](double x) { return 2 + 0.3 * std::sin(x) + 0.1 * std::cos(2 * x); };
    auto bot = [](double x) { return 0.2 * std::sin(x); };
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(0, kTwoPi);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec<1> x(U(rng));
        for (Face f : {Face::top, Face::bottom}) {
            auto bp = unit_normal<2>(d, x, f);
            const auto X = d.face_tangents(f, x);
            EXPECT_NEAR(bp.nu.squaredNorm(), 1.0, 1e-10);
            EXPECT_NEAR(bp.nu.dot(X[0]), 0.0, 1e-10);
            EXPECT_EQ(bp.nu[1] > 0, f == Face::top);
            const double oracle = f == Face::top ? graph_curvature(top, x[0]) : -graph_curvature(bot, x[0]);
            EXPECT_NEAR(shape_report<2>(d, x, f).mean_curvature, oracle, 1e-6);
        }
    }
}

TEST(Domain, GraphMeanCurvatureInThreeDimensions) {
    auto d = build_domain<3>(strip("2 + 0.3*sin(x)*cos(y)", "0", 3));
    auto f = [](double x, double y) { return 2 + 0.3 * std::sin(x) * std::cos(y); };
    // H = div(grad f / W), by nested central differences.
    auto flux = [&](double x, double y, int i) {
        const double h = 1e-5;
        const double fx = (f(x + h, y) - f(x - h, y)) / (2 * h), fy = (f(x, y + h) - f(x, y - h)) / (2 * h);
        return (i == 0 ? fx : fy) / std::sqrt(1 + fx * fx + fy * fy);
    };
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> U(0, kTwoPi);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec<2> x(U(rng), U(rng));
        const double h = 1e-3;
        const double H = (flux(x[0] + h, x[1], 0) - flux(x[0] - h, x[1], 0)) / (2 * h) +
                         (flux(x[0], x[1] + h, 1) - flux(x[0], x[1] - h, 1)) / (2 * h);
        auto s = shape_report<3>(d, x, Face::top);
        EXPECT_NEAR(s.mean_curvature, H, 1e-5);
        EXPECT_NEAR((s.II - s.II.transpose()).norm(), 0.0, 0.0);
        auto bp = unit_normal<3>(d, x, Face::top);
        for (const auto& X : d.face_tangents(Face::top, x)) EXPECT_NEAR(bp.nu.dot(X), 0.0, 1e-10);
    }
}

TEST(Domain, ConformalBaseNormalsAreMetricUnit) {
    auto c = strip("1.5 + 0.2*cos(x)", "0", 3);
    c.base_family = "conformal";
    c.phi = "a*sin(b*x)";
    c.parameters = {{"a", 0.2}, {"b", 1.0}};
    auto d = build_domain<3>(c);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> U(0, kTwoPi);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec<2> x(U(rng), U(rng));
        auto bp = unit_normal<3>(d, x, Face::top);
        const Mat<3> g = d.ambient->value(bp.point);
        EXPECT_NEAR(bp.nu.dot(g * bp.nu), 1.0, 1e-10);
        for (const auto& X : d.face_tangents(Face::top, x)) EXPECT_NEAR(bp.nu.dot(g * X), 0.0, 1e-10);
    }
    auto s = shape_report<3>(d, Vec<2>(0.3, 0.1), Face::top, 6);
    for (const auto& [k, v] : s.sup_norms) EXPECT_TRUE(std::isfinite(v)) << k;
}

TEST(Domain, ContainsAndWrap) {
    auto d = build_domain<2>(strip("1"));
    EXPECT_TRUE(d.contains(Vec<2>(-0.5, 0.5)));
    EXPECT_FALSE(d.contains(Vec<2>(0.5, 1.5)));
    EXPECT_NEAR(d.wrap(Vec<2>(-0.5, 0.2))[0], kTwoPi - 0.5, 1e-14);
}
