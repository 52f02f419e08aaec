#pragma once

#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "errors.hpp"
#include "expression.hpp"
#include "hyperdual.hpp"
#include "linalg.hpp"

namespace boundedgeo {

// Metric coefficients and their first two coordinate derivatives at a point.
// dg[k] = d_k g, d2g[k][l] = d_k d_l g. `order` says how many are filled.
template <int M>
struct MetricJet {
    Mat<M> g = Mat<M>::Identity();
    std::array<Mat<M>, M> dg{};
    std::array<std::array<Mat<M>, M>, M> d2g{};
    int order = 0;

    MetricJet() {
        for (auto& m : dg) m.setZero();
        for (auto& row : d2g)
            for (auto& m : row) m.setZero();
    }
};

inline std::vector<std::string> default_coordinate_names(int dim) {
    switch (dim) {
        case 1: return {"x"};
        case 2: return {"x", "y"};
        default: return {"x", "y", "z"};
    }
}

template <int M>
std::string format_point(const Vec<M>& p) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (int i = 0; i < M; ++i) os << (i ? ", " : "") << p[i];
    os << ")";
    return os.str();
}

template <int M>
class MetricField {
public:
    virtual ~MetricField() = default;

    virtual MetricJet<M> jet(const Vec<M>& p, int order = 2) const = 0;
    virtual Mat<M> value(const Vec<M>& p) const { return jet(p, 0).g; }

    // True when geodesics are straight coordinate lines (constant identity metric).
    virtual bool is_euclidean() const { return false; }
    // True when g = g_base + dt^2 with the last coordinate as t.
    virtual bool is_product() const { return false; }
    virtual std::string family() const = 0;
    virtual std::string describe() const { return family(); }
};

template <int M>
using MetricPtr = std::shared_ptr<const MetricField<M>>;

template <int M>
class FlatMetric final : public MetricField<M> {
public:
    MetricJet<M> jet(const Vec<M>&, int order = 2) const override {
        MetricJet<M> j;
        j.order = order;
        return j;
    }
    bool is_euclidean() const override { return true; }
    std::string family() const override { return "flat"; }
};

// g = exp(2 phi) * identity.
template <int M>
class ConformalMetric final : public MetricField<M> {
public:
    explicit ConformalMetric(Expression phi) : phi_(std::move(phi)) {}

    MetricJet<M> jet(const Vec<M>& p, int order = 2) const override {
        MetricJet<M> j;
        j.order = order;
        std::array<double, M> at{};
        for (int i = 0; i < M; ++i) at[static_cast<std::size_t>(i)] = p[i];
        if (order == 0) {
            j.g = std::exp(2.0 * phi_(std::span<const double>(at.data(), M))) * Mat<M>::Identity();
            return j;
        }
        auto phi = phi_.template jet<M>(std::span<const double>(at.data(), M));
        auto e = exp(HyperDual<M>(2.0) * phi);
        j.g = e.v * Mat<M>::Identity();
        for (int k = 0; k < M; ++k) {
            j.dg[k] = e.d[k] * Mat<M>::Identity();
            for (int l = 0; l < M; ++l) j.d2g[k][l] = e.dd[k][l] * Mat<M>::Identity();
        }
        return j;
    }
    std::string family() const override { return "conformal"; }
    std::string describe() const override { return "conformal(phi=" + phi_.text() + ")"; }
    const Expression& phi() const { return phi_; }

private:
    Expression phi_;
};

// g = g_base(x) + dt^2 where t is the last coordinate.
template <int M>
class ProductMetric final : public MetricField<M> {
public:
    explicit ProductMetric(MetricPtr<M - 1> base) : base_(std::move(base)) {}

    MetricJet<M> jet(const Vec<M>& p, int order = 2) const override {
        MetricJet<M> j;
        j.order = order;
        const Vec<M - 1> x = p.template head<M - 1>();
        const auto b = base_->jet(x, order);
        j.g.setZero();
        j.g.template topLeftCorner<M - 1, M - 1>() = b.g;
        j.g(M - 1, M - 1) = 1.0;
        if (order >= 1)
            for (int k = 0; k < M - 1; ++k) j.dg[k].template topLeftCorner<M - 1, M - 1>() = b.dg[k];
        if (order >= 2)
            for (int k = 0; k < M - 1; ++k)
                for (int l = 0; l < M - 1; ++l)
                    j.d2g[k][l].template topLeftCorner<M - 1, M - 1>() = b.d2g[k][l];
        return j;
    }
    bool is_euclidean() const override { return base_->is_euclidean(); }
    bool is_product() const override { return true; }
    std::string family() const override { return "product"; }
    std::string describe() const override { return "product(" + base_->describe() + " + dt^2)"; }
    const MetricPtr<M - 1>& base() const { return base_; }

private:
    MetricPtr<M - 1> base_;
};

// Jet of a metric known only through point values, by central differences.
template <int M, class ValueFn>
MetricJet<M> finite_difference_jet(const ValueFn& value, const Vec<M>& p, int order, double h1 = 1e-5,
                                   double h2 = 1e-4) {
    MetricJet<M> j;
    j.order = order;
    j.g = value(p);
    if (order >= 1) {
        for (int k = 0; k < M; ++k) {
            Vec<M> e = Vec<M>::Zero();
            e[k] = h1;
            j.dg[k] = (value(p + e) - value(p - e)) / (2.0 * h1);
        }
    }
    if (order >= 2) {
        for (int k = 0; k < M; ++k) {
            Vec<M> ek = Vec<M>::Zero();
            ek[k] = h2;
            j.d2g[k][k] = (value(p + ek) - 2.0 * j.g + value(p - ek)) / (h2 * h2);
            for (int l = k + 1; l < M; ++l) {
                Vec<M> el = Vec<M>::Zero();
                el[l] = h2;
                Mat<M> d = (value(p + ek + el) - value(p + ek - el) - value(p - ek + el) + value(p - ek - el)) /
                           (4.0 * h2 * h2);
                j.d2g[k][l] = d;
                j.d2g[l][k] = d;
            }
        }
    }
    return j;
}

// Checked evaluation: throws DegenerateMetric when g(p) is not SPD.
template <int M>
Mat<M> eval_metric(const MetricField<M>& field, const Vec<M>& p) {
    Mat<M> g = field.value(p);
    Eigen::LLT<Mat<M>> llt(g);
    if (llt.info() != Eigen::Success || !g.allFinite())
        throw DegenerateMetric("degenerate metric at " + format_point<M>(p));
    return g;
}

// gamma[k](i, j) = Gamma^k_ij.
template <int M>
using ChristoffelSymbols = std::array<Mat<M>, M>;

template <int M>
ChristoffelSymbols<M> christoffel(const MetricJet<M>& j) {
    const Mat<M> ginv = j.g.inverse();
    ChristoffelSymbols<M> gamma;
    for (int k = 0; k < M; ++k) {
        gamma[k].setZero();
        for (int i = 0; i < M; ++i)
            for (int jj = 0; jj < M; ++jj) {
                double s = 0.0;
                for (int l = 0; l < M; ++l)
                    s += ginv(k, l) * (j.dg[i](jj, l) + j.dg[jj](i, l) - j.dg[l](i, jj));
                gamma[k](i, jj) = 0.5 * s;
            }
    }
    return gamma;
}

// dgamma[m][k](i, j) = d_m Gamma^k_ij; needs a second-order jet.
template <int M>
std::array<ChristoffelSymbols<M>, M> christoffel_derivatives(const MetricJet<M>& j) {
    const Mat<M> ginv = j.g.inverse();
    std::array<ChristoffelSymbols<M>, M> out;
    for (int m = 0; m < M; ++m) {
        const Mat<M> dginv = -ginv * j.dg[m] * ginv;
        for (int k = 0; k < M; ++k) {
            out[m][k].setZero();
            for (int i = 0; i < M; ++i)
                for (int jj = 0; jj < M; ++jj) {
                    double s = 0.0;
                    for (int l = 0; l < M; ++l) {
                        s += dginv(k, l) * (j.dg[i](jj, l) + j.dg[jj](i, l) - j.dg[l](i, jj));
                        s += ginv(k, l) * (j.d2g[m][i](jj, l) + j.d2g[m][jj](i, l) - j.d2g[m][l](i, jj));
                    }
                    out[m][k](i, jj) = 0.5 * s;
                }
        }
    }
    return out;
}

template <int M>
struct CurvatureSample {
    Vec<M> point;
    Mat<M> metric;
    ChristoffelSymbols<M> christoffel;
    // Fully covariant R_abcd = g_ae R^e_bcd with R(d_c, d_d) d_b = R^a_bcd d_a.
    Tensor<M> riemann{4};
    Mat<M> ricci;
    std::map<std::pair<int, int>, double> sectional;

    // Smallest eigenvalue of Ric relative to g.
    double ricci_min() const { return min_generalized_eigenvalue<M>(ricci, metric); }
    // |Rm|_g / 2, which equals |K| on surfaces.
    double riemann_norm() const { return 0.5 * tensor_norm<M>(riemann, metric); }
};

template <int M>
CurvatureSample<M> curvature_from_jet(const Vec<M>& p, const MetricJet<M>& j) {
    CurvatureSample<M> s;
    s.point = p;
    s.metric = j.g;
    s.christoffel = christoffel<M>(j);
    const auto dgamma = christoffel_derivatives<M>(j);
    const auto& G = s.christoffel;
    // R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    Tensor<M> up(4);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int c = 0; c < M; ++c)
                for (int d = 0; d < M; ++d) {
                    double r = dgamma[c][a](d, b) - dgamma[d][a](c, b);
                    for (int e = 0; e < M; ++e) r += G[a](c, e) * G[e](d, b) - G[a](d, e) * G[e](c, b);
                    up(a, b, c, d) = r;
                }
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int c = 0; c < M; ++c)
                for (int d = 0; d < M; ++d) {
                    double r = 0.0;
                    for (int e = 0; e < M; ++e) r += j.g(a, e) * up(e, b, c, d);
                    s.riemann(a, b, c, d) = r;
                }
    s.ricci.setZero();
    for (int b = 0; b < M; ++b)
        for (int d = 0; d < M; ++d) {
            double r = 0.0;
            for (int a = 0; a < M; ++a) r += up(a, b, a, d);
            s.ricci(b, d) = r;
        }
    s.ricci = 0.5 * (s.ricci + s.ricci.transpose()).eval();
    for (int c = 0; c < M; ++c)
        for (int d = c + 1; d < M; ++d) {
            const double area = j.g(c, c) * j.g(d, d) - j.g(c, d) * j.g(c, d);
            s.sectional[{c, d}] = s.riemann(c, d, c, d) / area;
        }
    return s;
}

template <int M>
CurvatureSample<M> curvature_at(const MetricField<M>& field, const Vec<M>& p) {
    (void)eval_metric<M>(field, p);
    return curvature_from_jet<M>(p, field.jet(p, 2));
}

// Largest violation of R_abcd = -R_bacd = -R_abdc and of the first Bianchi identity.
template <int M>
double riemann_symmetry_residual(const Tensor<M>& R) {
    double worst = 0.0;
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int c = 0; c < M; ++c)
                for (int d = 0; d < M; ++d) {
                    worst = std::max(worst, std::abs(R(a, b, c, d) + R(b, a, c, d)));
                    worst = std::max(worst, std::abs(R(a, b, c, d) + R(a, b, d, c)));
                    worst = std::max(worst, std::abs(R(a, b, c, d) + R(a, c, d, b) + R(a, d, b, c)));
                }
    return worst;
}

}  // namespace boundedgeo
