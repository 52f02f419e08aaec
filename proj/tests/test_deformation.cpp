#include <gtest/gtest.h>

#include <cmath>

#include "boundedgeo/deformation.hpp"

using namespace boundedgeo;

namespace {

DomainSpec<2> conformal_slab(const std::string& bot) {
    DomainConfig c;
    c.base_family = "conformal";
    c.phi = "a*sin(b*x)";
    c.parameters = {{"a", 0.2}, {"b", 1.0}};
    c.top = "2";
    c.bot = bot;
    return build_domain<2>(c);
}

}  // namespace

TEST(Cutoff, PlateausAndMidpoint) {
    const auto eta = build_cutoff(0.1);
    EXPECT_EQ(eta(0.05), 0.0);
    EXPECT_EQ(eta(0.1), 0.0);
    EXPECT_EQ(eta(0.25), 1.0);
    EXPECT_EQ(eta(0.3), 1.0);
    EXPECT_NEAR(eta(0.15), 0.5, 1e-15);
    double prev = 0.0;
    for (int i = 0; i <= 300; ++i) {
        const double v = eta(0.3 * i / 300);
        EXPECT_GE(v, prev);
        prev = v;
    }
    EXPECT_THROW(build_cutoff(0.0), ArgumentError);
}

TEST(EquivalenceConstant, IdentityAndScaling) {
    FlatMetric<2> g;
    ConformalMetric<2> four(Expression::parse("log(2)", {"x", "t"}, {}));
    const std::vector<Vec<2>> s{Vec<2>(0.1, 0.2), Vec<2>(1.0, -3.0)};
    EXPECT_EQ(equivalence_constant<2>(g, g, s), 1.0);
    EXPECT_NEAR(equivalence_constant<2>(g, four, s), 4.0, 1e-12);
    EXPECT_NEAR(equivalence_constant<2>(four, g, s), 4.0, 1e-12);
}

// Constant bottom over a product metric: the collar is already a product.
TEST(Deformation, ProductCollarIsUnchanged) {
    const auto d = conformal_slab("0");
    const auto dp = deform_metric<2>(d, 0.1, 1.0);
    const auto rep = deformation_audit<2>(d, dp, 1.0, 12);
    EXPECT_NEAR(rep.C, 1.0, 1e-14);
    EXPECT_EQ(rep.far_defect, 0.0);
    EXPECT_LE(rep.product_defect, 1e-14);
    for (double t : {0.01, 0.05, 0.2, 1.0, 1.95}) {
        const Vec<2> p(0.7, t);
        EXPECT_LE((dp.ambient->value(p) - d.ambient->value(p)).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Deformation, CurvedFaceCollar) {
    const auto d = conformal_slab("0.2*sin(x)");
    std::vector<double> C;
    for (double rp : {0.2, 0.1, 0.05}) {
        const auto dp = deform_metric<2>(d, rp, 0.9);
        const auto rep = deformation_audit<2>(d, dp, 0.9, 12, 3);
        EXPECT_GT(rep.inner_samples, 0u);
        EXPECT_GT(rep.far_samples, 0u);
        EXPECT_LE(rep.product_defect, 1e-9) << rp;
        EXPECT_EQ(rep.far_defect, 0.0) << rp;
        EXPECT_LE(rep.volume_log_max, 2 * std::log(rep.C) + 1e-12);
        EXPECT_LE(rep.covector_violation, 1e-12);
        C.push_back(rep.C);
    }
    EXPECT_GT(C[0], C[1]);
    EXPECT_GT(C[1], C[2]);
    EXPECT_GT(C[2], 1.0);
}

// In collar coordinates g' = h + dtau^2 for tau <= r'.
TEST(Deformation, InnerCollarGauge) {
    const auto d = conformal_slab("0.2*sin(x)");
    const auto dp = deform_metric<2>(d, 0.1, 0.9);
    const auto& gp = dynamic_cast<const DeformedMetric<2>&>(*dp.ambient);
    for (Face f : {Face::bottom, Face::top})
        for (double x : {0.0, 1.3, 4.0})
            for (double tau : {0.0, 0.03, 0.1}) {
                const auto& col = gp.collar(f);
                const Vec<2> c(x, tau);
                const auto st = col.forward(c);
                const Mat<2> J = col.jacobian(c, st);
                const Mat<2> G = J.transpose() * gp.value(st.position) * J;
                EXPECT_NEAR(G(1, 1), 1.0, 1e-9);
                EXPECT_NEAR(G(0, 1), 0.0, 1e-9);
                EXPECT_NEAR(G(0, 0), d.induced_metric(f, Vec<1>(x))(0, 0), 1e-9);
            }
}

TEST(Deformation, ShallowCollarRejected) {
    const auto d = conformal_slab("0");
    EXPECT_THROW(deform_metric<2>(d, 0.4, 1.0), ArgumentError);
    EXPECT_DOUBLE_EQ(default_r_prime(1.0, 2.0), 1.0 / 6);
    EXPECT_DOUBLE_EQ(default_r_prime(6.0, 2.0), 0.2);
}
