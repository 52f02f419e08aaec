#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

namespace boundedgeo {

template <int M>
using Vec = Eigen::Matrix<double, M, 1>;
template <int M>
using Mat = Eigen::Matrix<double, M, M>;

// Dense tensor with all indices of the same extent M, stored row-major
// (last index fastest).
template <int M>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(int rank) : rank_(rank), data_(size_for(rank), 0.0) {}

    static std::size_t size_for(int rank) {
        std::size_t s = 1;
        for (int i = 0; i < rank; ++i) s *= M;
        return s;
    }

    int rank() const { return rank_; }
    std::size_t size() const { return data_.size(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    template <class... I>
    double& operator()(I... idx) {
        return data_[flat(idx...)];
    }
    template <class... I>
    double operator()(I... idx) const {
        return data_[flat(idx...)];
    }

    // Multi-index of flat position i.
    std::array<int, 8> unflatten(std::size_t i) const {
        std::array<int, 8> idx{};
        for (int k = rank_ - 1; k >= 0; --k) {
            idx[static_cast<std::size_t>(k)] = static_cast<int>(i % M);
            i /= M;
        }
        return idx;
    }
    std::size_t flatten(const std::array<int, 8>& idx) const {
        std::size_t f = 0;
        for (int k = 0; k < rank_; ++k) f = f * M + static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
        return f;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    template <class... I>
    std::size_t flat(I... idx) const {
        std::size_t f = 0;
        ((f = f * M + static_cast<std::size_t>(idx)), ...);
        return f;
    }

    int rank_ = 0;
    std::vector<double> data_;
};

// Norm of a fully covariant tensor with respect to g: components are taken in
// a g-orthonormal frame and summed in squares.
template <int M>
double tensor_norm(const Tensor<M>& t, const Mat<M>& g) {
    Eigen::LLT<Mat<M>> llt(g);
    const Mat<M> L = llt.matrixL();
    const Mat<M> E = L.transpose().inverse();  // E^T g E = I
    std::vector<double> cur = t.data(), next(cur.size());
    const int r = t.rank();
    for (int axis = 0; axis < r; ++axis) {
        std::size_t stride = 1;
        for (int k = axis + 1; k < r; ++k) stride *= M;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const auto a = static_cast<int>((i / stride) % M);
            const std::size_t base = i - static_cast<std::size_t>(a) * stride;
            double s = 0.0;
            for (int b = 0; b < M; ++b) s += cur[base + static_cast<std::size_t>(b) * stride] * E(b, a);
            next[i] = s;
        }
        std::swap(cur, next);
    }
    double s = 0.0;
    for (double v : cur) s += v * v;
    return std::sqrt(s);
}

// Largest generalized eigenvalue of the symmetric-definite pair (A, B).
template <int M>
double max_generalized_eigenvalue(const Mat<M>& A, const Mat<M>& B) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat<M>> es(A, B);
    return es.eigenvalues().maxCoeff();
}
template <int M>
double min_generalized_eigenvalue(const Mat<M>& A, const Mat<M>& B) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat<M>> es(A, B);
    return es.eigenvalues().minCoeff();
}

}  // namespace boundedgeo
