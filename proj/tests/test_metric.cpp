#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "boundedgeo/bounds.hpp"
#include "boundedgeo/metric.hpp"
#include "oracles.hpp"

using namespace boundedgeo;

namespace {

MetricPtr<2> conformal2(const std::string& phi, ParameterMap params = {}) {
    return std::make_shared<ConformalMetric<2>>(Expression::parse(phi, {"x", "y"}, params));
}

MetricPtr<3> conformal_base_product(double a, double b) {
    auto base = std::make_shared<ConformalMetric<2>>(
        Expression::parse("a*sin(b*x)", {"x", "y"}, {{"a", a}, {"b", b}}));
    return std::make_shared<ProductMetric<3>>(base);
}

template <int M>
oracle::MetricFn<M> values_of(const MetricPtr<M>& f) {
    return [f](const oracle::Vec<M>& p) { return f->value(p); };
}

}  // namespace

TEST(MetricKernel, FlatAndProductEvaluateToIdentity) {
    FlatMetric<2> flat;
    EXPECT_TRUE(eval_metric<2>(flat, Vec<2>(0.3, 0.7)).isApprox(Mat<2>::Identity()));
    ProductMetric<2> prod(std::make_shared<FlatMetric<1>>());
    EXPECT_EQ(eval_metric<2>(prod, Vec<2>(-4.0, 11.0)), Mat<2>::Identity());
}

TEST(MetricKernel, ConformalAtZeroOfPhiIsIdentity) {
    auto g = conformal2("0.2*sin(x)");
    const Mat<2> v = eval_metric<2>(*g, Vec<2>(0.0, 0.37));
    const double independent = std::exp(2.0 * 0.2 * std::sin(0.0));
    EXPECT_DOUBLE_EQ(v(0, 0), independent);
    EXPECT_DOUBLE_EQ(v(1, 1), independent);
    EXPECT_DOUBLE_EQ(v(0, 1), 0.0);
    EXPECT_TRUE(v.isApprox(Mat<2>::Identity()));
}

TEST(MetricKernel, DegenerateMetricNamesPoint) {
    auto g = conformal2("log(x)");  // exp(2 log x) = x^2 vanishes at x = 0
    try {
        (void)eval_metric<2>(*g, Vec<2>(0.0, 1.0));
        FAIL();
    } catch (const DegenerateMetric& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate metric at (0, 1)"), std::string::npos);
    }
}

TEST(MetricKernel, FlatCurvatureVanishes) {
    FlatMetric<3> flat;
    auto c = curvature_at<3>(flat, Vec<3>(1, 2, 3));
    for (const auto& G : c.christoffel) EXPECT_EQ(G.norm(), 0.0);
    EXPECT_EQ(c.riemann.max_abs(), 0.0);
}

TEST(MetricKernel, ConformalGaussCurvatureMatchesClosedFormAndFiniteDifferences) {
    const double a = 0.2, b = 1.3;
    auto g = conformal2("a*sin(b*x)", {{"a", a}, {"b", b}});
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec<2> p(U(rng), U(rng));
        const double phi = a * std::sin(b * p[0]);
        const double lap = -a * b * b * std::sin(b * p[0]);
        const double closed = -std::exp(-2 * phi) * lap;
        const double fd = oracle::gauss_curvature_fd(values_of<2>(g), p);
        const auto c = curvature_at<2>(*g, p);
        const double K = c.sectional.at({0, 1});
        EXPECT_NEAR(K, closed, 1e-12);
        EXPECT_NEAR(K, fd, 1e-6);
        EXPECT_NEAR(c.riemann_norm(), std::abs(K), 1e-12);
    }
}

TEST(MetricKernel, StereographicSphereHasUnitCurvature) {
    auto g = conformal2("log(2/(1 + x^2 + y^2))");
    auto c = curvature_at<2>(*g, Vec<2>(0.4, -0.9));
    EXPECT_NEAR(c.sectional.at({0, 1}), 1.0, 1e-10);
    EXPECT_NEAR(c.ricci_min(), 1.0, 1e-10);
}

TEST(MetricKernel, ProductPlanesContainingVerticalAreFlat) {
    auto g = conformal_base_product(0.2, 1.0);
    auto c = curvature_at<3>(*g, Vec<3>(0.8, 0.1, 0.5));
    EXPECT_EQ(c.sectional.at({0, 2}), 0.0);
    EXPECT_EQ(c.sectional.at({1, 2}), 0.0);
    EXPECT_NE(c.sectional.at({0, 1}), 0.0);
    EXPECT_EQ(c.ricci(2, 2), 0.0);
}

// Invariants over 100 random points for each built-in family.
TEST(MetricKernel, AutodiffChristoffelAgreesWithFiniteDifferences) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-2, 2);
    auto check = [&](const auto& field, auto tag) {
        constexpr int M = decltype(tag)::value;
        for (int trial = 0; trial < 100; ++trial) {
            Vec<M> p;
            for (int i = 0; i < M; ++i) p[i] = U(rng);
            auto ad = christoffel<M>(field->jet(p, 1));
            auto fd = oracle::christoffel_fd<M>(values_of<M>(field), p);
            double scale = 1e-300, err = 0.0;
            for (int k = 0; k < M; ++k) {
                scale = std::max(scale, ad[k].cwiseAbs().maxCoeff());
                err = std::max(err, (ad[k] - fd[k]).cwiseAbs().maxCoeff());
            }
            EXPECT_LE(err, 1e-6 * std::max(1.0, scale));
            auto c = curvature_at<M>(*field, p);
            EXPECT_LE(riemann_symmetry_residual<M>(c.riemann), 1e-8);
            for (int k = 0; k < M; ++k) EXPECT_LE((c.christoffel[k] - c.christoffel[k].transpose()).norm(), 0.0);
        }
    };
    check(MetricPtr<2>(std::make_shared<FlatMetric<2>>()), std::integral_constant<int, 2>{});
    check(conformal2("0.2*sin(x) + 0.1*cos(2*y)"), std::integral_constant<int, 2>{});
    check(MetricPtr<3>(std::make_shared<ConformalMetric<3>>(
              Expression::parse("0.3*sin(x)*cos(y) + 0.1*z", {"x", "y", "z"}))),
          std::integral_constant<int, 3>{});
    check(conformal_base_product(0.2, 1.0), std::integral_constant<int, 3>{});
    check(MetricPtr<2>(std::make_shared<ProductMetric<2>>(std::make_shared<ConformalMetric<1>>(
              Expression::parse("0.2*sin(x)", {"x"})))),
          std::integral_constant<int, 2>{});
}

TEST(MetricKernel, ProductRicciVerticalVanishes) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-3, 3);
    auto g = conformal_base_product(0.2, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto c = curvature_at<3>(*g, Vec<3>(U(rng), U(rng), U(rng)));
        EXPECT_LE(std::abs(c.ricci(2, 2)), 1e-10);
    }
}

TEST(Bounds, FlatHasZeroNorms) {
    FlatMetric<2> flat;
    Region<2> r{Vec<2>(0, 0), Vec<2>(1, 1), {8, 8}};
    auto rep = bounds_report<2>(flat, r, 2);
    EXPECT_EQ(rep.sup_norms.at("R"), 0.0);
    EXPECT_EQ(rep.sup_norms.at("nabla R"), 0.0);
    EXPECT_EQ(rep.sup_norms.at("nabla^2 R"), 0.0);
    EXPECT_EQ(rep.ricci_lower, 0.0);
}

TEST(Bounds, ConformalSupMatchesFiniteDifferenceOracle) {
    auto g = conformal2("0.2*sin(x)");
    const double L = 2 * std::numbers::pi;
    Region<2> r{Vec<2>(0, 0), Vec<2>(L, L), {64, 64}};
    auto rep = bounds_report<2>(*g, r, 0);
    double oracle_sup = 0.0;
    for (std::size_t s = 0; s < r.count(); ++s)
        oracle_sup = std::max(oracle_sup, std::abs(oracle::gauss_curvature_fd(values_of<2>(g), r.point(s))));
    EXPECT_NEAR(rep.sup_norms.at("R"), oracle_sup, 1e-4);
    EXPECT_LT(rep.ricci_lower, 0.0);
}

TEST(Bounds, RefinementIsMonotone) {
    auto g = conformal2("0.2*sin(x)");
    const double L = 2 * std::numbers::pi;
    auto coarse = bounds_report<2>(*g, Region<2>{Vec<2>(0, 0), Vec<2>(L, L), {32, 32}}, 2);
    auto fine = bounds_report<2>(*g, Region<2>{Vec<2>(0, 0), Vec<2>(L, L), {64, 64}}, 2);
    for (const auto& [name, v] : coarse.sup_norms) EXPECT_LE(v, fine.sup_norms.at(name) + 1e-9) << name;
    EXPECT_GE(coarse.ricci_lower, fine.ricci_lower - 1e-12);
    EXPECT_TRUE(std::isfinite(fine.sup_norms.at("nabla^2 R")));
    EXPECT_GT(fine.sup_norms.at("nabla R"), 0.0);
}

// For phi depending on x alone, K(x) = a b^2 sin(bx) e^{-2 a sin(bx)} and
// |nabla K| = e^{-phi} |K'(x)|; on surfaces |nabla Rm| / 2 = |nabla K|.
TEST(Bounds, NablaRMatchesClosedFormOnSurface) {
    const double a = 0.2;
    auto g = conformal2("0.2*sin(x)");
    Region<2> r{Vec<2>(0, 0), Vec<2>(2 * std::numbers::pi, 1), {50, 1}};
    auto rep = bounds_report<2>(*g, r, 1);
    double expected = 0.0;
    for (std::size_t s = 0; s < r.count(); ++s) {
        const double x = r.point(s)[0];
        const double K1 = a * std::cos(x) * std::exp(-2 * a * std::sin(x)) +
                          a * std::sin(x) * std::exp(-2 * a * std::sin(x)) * (-2 * a * std::cos(x));
        expected = std::max(expected, std::exp(-a * std::sin(x)) * std::abs(K1));
    }
    EXPECT_NEAR(rep.sup_norms.at("nabla R"), expected, 1e-5);
}

TEST(Bounds, RejectsEmptyRegionAndBadOrder) {
    FlatMetric<2> flat;
    EXPECT_THROW((void)bounds_report<2>(flat, Region<2>{Vec<2>(0, 0), Vec<2>(1, 1), {0, 4}}, 0), ArgumentError);
    EXPECT_THROW((void)bounds_report<2>(flat, Region<2>{Vec<2>(0, 0), Vec<2>(1, 1), {4, 4}}, 3), ArgumentError);
}
