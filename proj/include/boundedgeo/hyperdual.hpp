#pragma once

#include <array>
#include <cmath>

namespace boundedgeo {

// Second-order forward-mode number in N directions: carries the value, the
// gradient and the (symmetric) Hessian with respect to N seeded variables.
// With N = 1 this is the classical hyper-dual number f + f' e1 + f' e2 + f'' e1 e2.
template <int N>
struct HyperDual {
    double v = 0.0;
    std::array<double, N> d{};
    std::array<std::array<double, N>, N> dd{};

    HyperDual() = default;
    HyperDual(double value) : v(value) {}  // NOLINT: implicit lift of constants

    static HyperDual variable(double value, int index) {
        HyperDual x(value);
        x.d[index] = 1.0;
        return x;
    }

    // Applies a scalar function given its value and first two derivatives at v.
    HyperDual chain(double f, double df, double d2f) const {
        HyperDual r(f);
        for (int i = 0; i < N; ++i) {
            r.d[i] = df * d[i];
            for (int j = 0; j < N; ++j) r.dd[i][j] = df * dd[i][j] + d2f * d[i] * d[j];
        }
        return r;
    }

    HyperDual& operator+=(const HyperDual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) {
            d[i] += o.d[i];
            for (int j = 0; j < N; ++j) dd[i][j] += o.dd[i][j];
        }
        return *this;
    }
    HyperDual& operator-=(const HyperDual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) {
            d[i] -= o.d[i];
            for (int j = 0; j < N; ++j) dd[i][j] -= o.dd[i][j];
        }
        return *this;
    }
    HyperDual& operator*=(const HyperDual& o) {
        HyperDual r(v * o.v);
        for (int i = 0; i < N; ++i) {
            r.d[i] = d[i] * o.v + v * o.d[i];
            for (int j = 0; j < N; ++j)
                r.dd[i][j] = dd[i][j] * o.v + v * o.dd[i][j] + d[i] * o.d[j] + o.d[i] * d[j];
        }
        return *this = r;
    }
    HyperDual& operator/=(const HyperDual& o) {
        const double inv = 1.0 / o.v;
        return *this *= o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
    }

    HyperDual operator-() const {
        HyperDual r = *this;
        r.v = -r.v;
        for (int i = 0; i < N; ++i) {
            r.d[i] = -r.d[i];
            for (int j = 0; j < N; ++j) r.dd[i][j] = -r.dd[i][j];
        }
        return r;
    }

    friend HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
    friend HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
    friend HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
    friend HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }
};

template <int N>
HyperDual<N> sin(const HyperDual<N>& x) {
    const double s = std::sin(x.v), c = std::cos(x.v);
    return x.chain(s, c, -s);
}
template <int N>
HyperDual<N> cos(const HyperDual<N>& x) {
    const double s = std::sin(x.v), c = std::cos(x.v);
    return x.chain(c, -s, -c);
}
template <int N>
HyperDual<N> exp(const HyperDual<N>& x) {
    const double e = std::exp(x.v);
    return x.chain(e, e, e);
}
template <int N>
HyperDual<N> log(const HyperDual<N>& x) {
    return x.chain(std::log(x.v), 1.0 / x.v, -1.0 / (x.v * x.v));
}
template <int N>
HyperDual<N> sqrt(const HyperDual<N>& x) {
    const double s = std::sqrt(x.v);
    return x.chain(s, 0.5 / s, -0.25 / (s * x.v));
}

// Value-level accessors so generic code can treat double and HyperDual alike.
inline double value_of(double x) { return x; }
template <int N>
double value_of(const HyperDual<N>& x) {
    return x.v;
}

}  // namespace boundedgeo
