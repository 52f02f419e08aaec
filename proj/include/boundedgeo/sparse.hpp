#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"

namespace boundedgeo {

using Vector = Eigen::VectorXd;

// Compressed sparse rows; column indices sorted within each row.
struct CsrMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col;
    std::vector<double> val;

    // Pattern from per-row column lists (sorted and deduplicated here), values zero.
    static CsrMatrix from_pattern(std::size_t cols, std::vector<std::vector<std::size_t>> pattern) {
        CsrMatrix A;
        A.rows = pattern.size();
        A.cols = cols;
        A.row_ptr.assign(1, 0);
        for (auto& r : pattern) {
            std::sort(r.begin(), r.end());
            r.erase(std::unique(r.begin(), r.end()), r.end());
            A.col.insert(A.col.end(), r.begin(), r.end());
            A.row_ptr.push_back(A.col.size());
        }
        A.val.assign(A.col.size(), 0.0);
        return A;
    }

    std::size_t nnz() const { return col.size(); }

    // Position of (i, j) in val; the entry must be in the pattern.
    std::size_t slot(std::size_t i, std::size_t j) const {
        const auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
        const auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
        const auto it = std::lower_bound(b, e, j);
        if (it == e || *it != j) throw Error("sparse entry outside the pattern");
        return static_cast<std::size_t>(it - col.begin());
    }

    void add(std::size_t i, std::size_t j, double v) { val[slot(i, j)] += v; }

    double at(std::size_t i, std::size_t j) const {
        const auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
        const auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
        const auto it = std::lower_bound(b, e, j);
        return (it == e || *it != j) ? 0.0 : val[static_cast<std::size_t>(it - col.begin())];
    }

    Vector operator*(const Vector& x) const {
        Vector y(static_cast<Eigen::Index>(rows));
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[static_cast<Eigen::Index>(col[k])];
            y[static_cast<Eigen::Index>(i)] = s;
        }
        return y;
    }

    Vector diagonal() const {
        Vector d = Vector::Zero(static_cast<Eigen::Index>(rows));
        for (std::size_t i = 0; i < rows; ++i) d[static_cast<Eigen::Index>(i)] = at(i, i);
        return d;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
                D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col[k])) = val[k];
        return D;
    }
};

// a A + b B on a shared pattern.
inline CsrMatrix combine(double a, const CsrMatrix& A, double b, const CsrMatrix& B) {
    if (A.row_ptr != B.row_ptr || A.col != B.col) throw Error("combine: sparsity patterns differ");
    CsrMatrix C = A;
    for (std::size_t k = 0; k < C.val.size(); ++k) C.val[k] = a * A.val[k] + b * B.val[k];
    return C;
}

// Rows and columns of A picked by `keep` (old indices, in order).
inline CsrMatrix restrict_matrix(const CsrMatrix& A, const std::vector<std::size_t>& keep_rows,
                                 const std::vector<std::size_t>& keep_cols) {
    std::vector<long> map(A.cols, -1);
    for (std::size_t j = 0; j < keep_cols.size(); ++j) map[keep_cols[j]] = static_cast<long>(j);
    CsrMatrix R;
    R.rows = keep_rows.size();
    R.cols = keep_cols.size();
    for (std::size_t i : keep_rows) {
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            if (map[A.col[k]] >= 0) {
                R.col.push_back(static_cast<std::size_t>(map[A.col[k]]));
                R.val.push_back(A.val[k]);
            }
        R.row_ptr.push_back(R.col.size());
    }
    return R;
}

inline double asymmetry(const CsrMatrix& A) {
    double worst = 0.0;
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            worst = std::max(worst, std::abs(A.val[k] - A.at(A.col[k], i)));
    return worst;
}

// "row col value" lines, 0-based, 17 significant digits.
inline void write_coordinate(std::ostream& os, const CsrMatrix& A) {
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            os << i << ' ' << A.col[k] << ' ' << fmt17(A.val[k]) << '\n';
}

struct CgResult {
    Vector x;
    int iterations = 0;
    double residual = 0.0;  // ||b - A x|| / ||b||
};

// Jacobi-preconditioned conjugate gradients. A direction with p^T A p <= 0
// raises NotPositiveDefinite.
inline CgResult cg_solve(const CsrMatrix& A, const Vector& b, double tol = 1e-10, int maxiter = 0,
                         const Vector* x0 = nullptr) {
    const auto n = static_cast<Eigen::Index>(A.rows);
    if (b.size() != n || A.rows != A.cols) throw ArgumentError("cg_solve: size mismatch");
    if (maxiter <= 0) maxiter = std::max<int>(100, 10 * static_cast<int>(n));
    CgResult r;
    r.x = x0 ? *x0 : Vector::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        r.x.setZero();
        return r;
    }
    Vector dinv = A.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) dinv[i] = dinv[i] > 0 ? 1.0 / dinv[i] : 1.0;
    Vector res = b - A * r.x;
    Vector z = dinv.cwiseProduct(res);
    Vector p = z;
    double rz = res.dot(z);
    for (int it = 0; it < maxiter; ++it) {
        r.residual = res.norm() / bnorm;
        if (r.residual <= tol) {
            r.iterations = it;
            return r;
        }
        const Vector Ap = A * p;
        const double pAp = p.dot(Ap);
        if (!(pAp > 0))
            throw NotPositiveDefinite("not positive definite: p^T A p = " + fmt17(pAp) + " at CG iteration " +
                                      std::to_string(it));
        const double alpha = rz / pAp;
        r.x += alpha * p;
        res -= alpha * Ap;
        z = dinv.cwiseProduct(res);
        const double rz_new = res.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    r.residual = (b - A * r.x).norm() / bnorm;
    r.iterations = maxiter;
    if (r.residual <= tol) return r;
    throw NonConvergence("CG did not converge in " + std::to_string(maxiter) + " iterations, residual " +
                             fmt17(r.residual),
                         r.residual);
}

}  // namespace boundedgeo
