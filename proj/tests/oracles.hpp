#pragma once

// Test-only reference computations. Nothing here calls into the library's
// derivative machinery: metrics are sampled as plain values and differentiated
// by central differences.

#include <Eigen/Dense>
#include <array>
#include <functional>

namespace oracle {

template <int M>
using Vec = Eigen::Matrix<double, M, 1>;
template <int M>
using Mat = Eigen::Matrix<double, M, M>;
template <int M>
using MetricFn = std::function<Mat<M>(const Vec<M>&)>;

// G[k](i,j) = Gamma^k_ij from central differences of g.
template <int M>
std::array<Mat<M>, M> christoffel_fd(const MetricFn<M>& g, const Vec<M>& p, double h = 1e-5) {
    std::array<Mat<M>, M> dg;
    for (int k = 0; k < M; ++k) {
        Vec<M> e = Vec<M>::Zero();
        e[k] = h;
        dg[k] = (g(p + e) - g(p - e)) / (2 * h);
    }
    const Mat<M> gi = g(p).inverse();
    std::array<Mat<M>, M> G;
    for (int k = 0; k < M; ++k) {
        G[k].setZero();
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
                for (int l = 0; l < M; ++l) G[k](i, j) += 0.5 * gi(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
    }
    return G;
}

// Gaussian curvature of a 2-D metric by nested central differences.
inline double gauss_curvature_fd(const MetricFn<2>& g, const Vec<2>& p, double h = 1e-3) {
    std::array<std::array<Mat<2>, 2>, 2> dG;  // dG[m][k] = d_m Gamma^k
    for (int m = 0; m < 2; ++m) {
        Vec<2> e = Vec<2>::Zero();
        e[m] = h;
        auto Gp = christoffel_fd<2>(g, p + e), Gm = christoffel_fd<2>(g, p - e);
        for (int k = 0; k < 2; ++k) dG[m][k] = (Gp[k] - Gm[k]) / (2 * h);
    }
    auto G = christoffel_fd<2>(g, p);
    auto R = [&](int a, int b, int c, int d) {
        double r = dG[c][a](d, b) - dG[d][a](c, b);
        for (int e = 0; e < 2; ++e) r += G[a](c, e) * G[e](d, b) - G[a](d, e) * G[e](c, b);
        return r;
    };
    const Mat<2> gp = g(p);
    double R1212 = 0.0;
    for (int e = 0; e < 2; ++e) R1212 += gp(0, e) * R(e, 1, 0, 1);
    return R1212 / gp.determinant();
}

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace oracle
