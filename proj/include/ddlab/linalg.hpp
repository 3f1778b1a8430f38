#pragma once

// Dense kernels shared by every other module: pseudo-inverse, pseudo-determinant,
// minimum-norm solves, projections and log-space Gram determinants.
//
// Rank decisions use one cutoff everywhere: a singular value s is treated as zero
// iff s <= eps * s_max * max(rows, cols).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ddlab/errors.hpp"

namespace ddlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

inline void require_finite(const Matrix& a, const char* who) {
    if (!a.allFinite()) {
        throw InvalidInput(std::string(who) + ": non-finite entries");
    }
}

inline double zero_threshold(double largest, Index rows, Index cols) {
    return kEps * largest * static_cast<double>(std::max<Index>({rows, cols, 1}));
}

/// Thin SVD with the rank already decided by the shared cutoff.
struct ThinSvd {
    Matrix u;  // rows x p
    Vector s;  // p = min(rows, cols), descending
    Matrix v;  // cols x p
    Index rank = 0;
};

inline ThinSvd thin_svd(const Matrix& a) {
    ThinSvd out;
    if (a.rows() == 0 || a.cols() == 0) {
        out.u.resize(a.rows(), 0);
        out.v.resize(a.cols(), 0);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
    const double cut = zero_threshold(out.s(0), a.rows(), a.cols());
    out.rank = 0;
    for (Index i = 0; i < out.s.size(); ++i) {
        if (out.s(i) > cut) ++out.rank;
    }
    return out;
}

inline Index numerical_rank(const Matrix& a) {
    require_finite(a, "numerical_rank");
    if (a.rows() == 0 || a.cols() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const Vector& s = svd.singularValues();
    const double cut = zero_threshold(s(0), a.rows(), a.cols());
    return static_cast<Index>((s.array() > cut).count());
}

/// Moore-Penrose inverse via SVD.
inline Matrix pseudo_inverse(const Matrix& a) {
    require_finite(a, "pseudo_inverse");
    const ThinSvd svd = thin_svd(a);
    Matrix out = Matrix::Zero(a.cols(), a.rows());
    for (Index i = 0; i < svd.rank; ++i) {
        out.noalias() += (svd.v.col(i) / svd.s(i)) * svd.u.col(i).transpose();
    }
    return out;
}

/// Product of the non-zero eigenvalues of a symmetric PSD matrix; 1 for the 0x0 matrix.
inline double pseudo_determinant(const Matrix& a) {
    require_finite(a, "pseudo_determinant");
    if (a.rows() != a.cols()) throw InvalidInput("pseudo_determinant: matrix is not square");
    if (a.rows() == 0) return 1.0;
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InvalidInput("pseudo_determinant: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    const double cut = zero_threshold(top, a.rows(), a.cols());
    double log_abs = 0.0;
    int sign = 1;
    for (Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i)) <= cut) continue;
        log_abs += std::log(std::abs(ev(i)));
        if (ev(i) < 0) sign = -sign;
    }
    return sign * std::exp(log_abs);
}

/// X^+ y: least-norm interpolant for n < d, least-squares solution for n > d.
inline Vector min_norm_solve(const Matrix& x, const Vector& y) {
    if (x.rows() != y.size()) {
        throw InvalidInput("min_norm_solve: X has " + std::to_string(x.rows()) +
                           " rows but y has " + std::to_string(y.size()) + " entries");
    }
    require_finite(x, "min_norm_solve");
    if (!y.allFinite()) throw InvalidInput("min_norm_solve: non-finite responses");
    const ThinSvd svd = thin_svd(x);
    Vector w = Vector::Zero(x.cols());
    for (Index i = 0; i < svd.rank; ++i) {
        w += svd.v.col(i) * (svd.u.col(i).dot(y) / svd.s(i));
    }
    return w;
}

/// I - X^+ X, the projection onto the orthogonal complement of the row span.
inline Matrix projection_complement(const Matrix& x) {
    require_finite(x, "projection_complement");
    const Index d = x.cols();
    Matrix p = Matrix::Identity(d, d);
    if (x.rows() == 0 || d == 0) return p;
    const ThinSvd svd = thin_svd(x);
    const auto vr = svd.v.leftCols(svd.rank);
    p.noalias() -= vr * vr.transpose();
    return p;
}

/// log det(X X^T) for a k x d matrix with k <= d. Returns -inf when X is rank deficient
/// and 0 for the empty 0 x d matrix.
inline double log_det_gram(const Matrix& x) {
    if (x.rows() > x.cols()) {
        throw InvalidInput("log_det_gram: needs rows <= cols, got " + std::to_string(x.rows()) +
                           "x" + std::to_string(x.cols()));
    }
    require_finite(x, "log_det_gram");
    if (x.rows() == 0) return 0.0;
    // Cholesky of the k x k Gram is exact enough when its pivots are well separated from zero;
    // otherwise the singular values decide.
    {
        const Matrix g = x * x.transpose();
        Eigen::LLT<Matrix> llt(g);
        if (llt.info() == Eigen::Success) {
            const auto diag = llt.matrixLLT().diagonal();
            if (diag.minCoeff() > 1e-4 * diag.maxCoeff()) return 2.0 * diag.array().log().sum();
        }
    }
    Eigen::JacobiSVD<Matrix> svd(x);
    const Vector& s = svd.singularValues();
    const double cut = zero_threshold(s(0), x.rows(), x.cols());
    if (s(s.size() - 1) <= cut) return -std::numeric_limits<double>::infinity();
    return 2.0 * s.array().log().sum();
}

/// log det(X^T X) for k >= d (the over-determined counterpart of log_det_gram).
inline double log_det_cross(const Matrix& x) {
    if (x.rows() < x.cols()) return -std::numeric_limits<double>::infinity();
    return log_det_gram(x.transpose());
}

}  // namespace linalg
}  // namespace ddlab
