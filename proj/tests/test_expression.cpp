#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "boundedgeo/expression.hpp"

using namespace boundedgeo;

TEST(Expression, EvaluatesArithmeticAndFunctions) {
    auto e = Expression::parse("2 + 3*x - y/4", {"x", "y"});
    EXPECT_DOUBLE_EQ(e({1.0, 8.0}), 3.0);
    auto f = Expression::parse("a*sin(b*x) + sqrt(4) + exp(0) + log(1) + cos(0)", {"x"}, {{"a", 0.2}, {"b", 3.0}});
    EXPECT_NEAR(f({0.5}), 0.2 * std::sin(1.5) + 2.0 + 1.0 + 1.0, 1e-15);
    EXPECT_NEAR(Expression::parse("2*pi", {})({}), 2.0 * std::numbers::pi, 1e-15);
    EXPECT_DOUBLE_EQ(Expression::parse("-x^2/2", {"x"})({3.0}), -4.5);
    EXPECT_DOUBLE_EQ(Expression::parse("x^-1", {"x"})({4.0}), 0.25);
    EXPECT_DOUBLE_EQ(Expression::parse("1e-1 + .5", {})({}), 0.6);
}

TEST(Expression, UnaryMinusBindsTighterThanProduct) {
    EXPECT_DOUBLE_EQ(Expression::parse("-2*3", {})({}), -6.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2*-3", {})({}), -6.0);
    EXPECT_DOUBLE_EQ(Expression::parse("(1-2)*(3-5)", {})({}), 2.0);
}

TEST(Expression, ReportsParseErrorPosition) {
    try {
        (void)Expression::parse("sin(x", {"x"});
        FAIL() << "expected parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.position(), 5u);
        EXPECT_NE(std::string(e.what()).find("expected ')'"), std::string::npos);
    }
    try {
        (void)Expression::parse("x + foo", {"x"});
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.position(), 4u);
        EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
    }
    EXPECT_THROW((void)Expression::parse("", {}), ParseError);
    EXPECT_THROW((void)Expression::parse("1 2", {}), ParseError);
    EXPECT_THROW((void)Expression::parse("x^y", {"x", "y"}), ParseError);
    EXPECT_THROW((void)Expression::parse("tan(x)", {"x"}), ParseError);
}

TEST(Expression, ConstantDetection) {
    EXPECT_TRUE(Expression::parse("1 + a", {"x"}, {{"a", 2.0}}).is_constant());
    EXPECT_FALSE(Expression::parse("1 + x", {"x"}).is_constant());
}

// Hyper-dual gradient/Hessian against nested central differences.
TEST(Expression, JetMatchesFiniteDifferences) {
    auto e = Expression::parse("exp(0.3*x*y) * sin(x) / (2 + cos(y)) + sqrt(1 + x^2) + log(2 + y)", {"x", "y"});
    const std::array<double, 2> p{0.7, -0.4};
    auto j = e.jet<2>(std::span<const double>(p.data(), 2));
    const double h = 1e-4;
    auto f = [&](double x, double y) { return e({x, y}); };
    EXPECT_NEAR(j.v, f(p[0], p[1]), 1e-15);
    EXPECT_NEAR(j.d[0], (f(p[0] + h, p[1]) - f(p[0] - h, p[1])) / (2 * h), 1e-7);
    EXPECT_NEAR(j.d[1], (f(p[0], p[1] + h) - f(p[0], p[1] - h)) / (2 * h), 1e-7);
    EXPECT_NEAR(j.dd[0][0], (f(p[0] + h, p[1]) - 2 * f(p[0], p[1]) + f(p[0] - h, p[1])) / (h * h), 1e-5);
    const double mixed = (f(p[0] + h, p[1] + h) - f(p[0] + h, p[1] - h) - f(p[0] - h, p[1] + h) +
                          f(p[0] - h, p[1] - h)) /
                         (4 * h * h);
    EXPECT_NEAR(j.dd[0][1], mixed, 1e-5);
    EXPECT_DOUBLE_EQ(j.dd[0][1], j.dd[1][0]);
}
