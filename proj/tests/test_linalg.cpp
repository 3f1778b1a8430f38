#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "ddlab/linalg.hpp"
#include "oracles.hpp"

using ddlab::Matrix;
using ddlab::Vector;
namespace la = ddlab::linalg;

namespace {

void expect_penrose(const Matrix& a, double tol) {
    const Matrix p = la::pseudo_inverse(a);
    const double scale = std::max(1.0, a.norm() * p.norm());
    EXPECT_LE(oracle::max_abs(a * p * a - a), tol * scale * std::max(1.0, a.norm()));
    EXPECT_LE(oracle::max_abs(p * a * p - p), tol * scale * std::max(1.0, p.norm()));
    EXPECT_LE(oracle::max_abs((a * p).transpose() - a * p), tol * scale);
    EXPECT_LE(oracle::max_abs((p * a).transpose() - p * a), tol * scale);
}

}  // namespace

TEST(PseudoInverse, IdentityIsItsOwnInverse) {
    EXPECT_LE(oracle::max_abs(la::pseudo_inverse(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)), 1e-15);
}

TEST(PseudoInverse, DiagonalWithZero) {
    Matrix a = Vector(Eigen::Vector2d(2.0, 0.0)).asDiagonal();
    const Matrix p = la::pseudo_inverse(a);
    EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
    EXPECT_EQ(p(1, 1), 0.0);
    EXPECT_EQ(p(0, 1), 0.0);
}

TEST(PseudoInverse, PenroseConditionsRandom3x5) {
    expect_penrose(oracle::gaussian_matrix(3, 5, 11), 1e-10);
}

TEST(PseudoInverse, PenroseConditionsProperty) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto rows = static_cast<Eigen::Index>(1 + seed % 6);
        const auto cols = static_cast<Eigen::Index>(1 + (seed / 6) % 7);
        Matrix a = oracle::gaussian_matrix(rows, cols, 100 + seed);
        if (seed % 3 == 0 && rows > 1) a.row(rows - 1) = a.row(0) * 2.0;  // rank deficient
        expect_penrose(a, 1e-10);
    }
}

TEST(PseudoInverse, RejectsNonFinite) {
    Matrix a = Matrix::Identity(2, 2);
    a(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(la::pseudo_inverse(a), ddlab::InvalidInput);
}

TEST(PseudoInverse, EmptyMatrix) {
    const Matrix p = la::pseudo_inverse(Matrix(0, 4));
    EXPECT_EQ(p.rows(), 4);
    EXPECT_EQ(p.cols(), 0);
}

TEST(PseudoDeterminant, Examples) {
    Matrix a = Vector(Eigen::Vector3d(2.0, 0.0, 3.0)).asDiagonal();
    EXPECT_NEAR(la::pseudo_determinant(a), 6.0, 1e-14);
    EXPECT_NEAR(la::pseudo_determinant(Matrix::Identity(4, 4)), 1.0, 1e-15);
    EXPECT_EQ(la::pseudo_determinant(Matrix(0, 0)), 1.0);
}

TEST(PseudoDeterminant, FullRankGramMatchesDeterminant) {
    const Matrix x = oracle::gaussian_matrix(2, 5, 7);
    const Matrix g = x * x.transpose();
    const double direct = oracle::direct_gram_det(x);
    EXPECT_NEAR(la::pseudo_determinant(g) / direct, 1.0, 1e-8);
}

TEST(PseudoDeterminant, RankDeficientGramIgnoresZeroEigenvalues) {
    // X^T X for a 2 x 5 X has rank 2; its pdet equals det(X X^T).
    const Matrix x = oracle::gaussian_matrix(2, 5, 8);
    EXPECT_NEAR(la::pseudo_determinant(x.transpose() * x) / oracle::direct_gram_det(x), 1.0, 1e-8);
}

TEST(PseudoDeterminant, RejectsAsymmetric) {
    Matrix a(2, 2);
    a << 1, 2, 0, 1;
    EXPECT_THROW(la::pseudo_determinant(a), ddlab::InvalidInput);
}

TEST(PseudoDeterminant, OrthogonalInvarianceProperty) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto d = static_cast<Eigen::Index>(2 + seed % 5);
        const Matrix x = oracle::gaussian_matrix(d - 1, d, 200 + seed);
        const Matrix a = x.transpose() * x;  // PSD, rank d-1
        const Matrix q = Eigen::HouseholderQR<Matrix>(oracle::gaussian_matrix(d, d, 300 + seed)).householderQ();
        const double base = la::pseudo_determinant(a);
        const Matrix rotated = q.transpose() * a * q;
        const Matrix sym = 0.5 * (rotated + rotated.transpose());
        EXPECT_NEAR(la::pseudo_determinant(sym) / base, 1.0, 1e-8);
    }
}

TEST(MinNormSolve, Examples) {
    const Vector y = Eigen::Vector3d(1, 2, 3);
    EXPECT_LE(oracle::max_abs(la::min_norm_solve(Matrix::Identity(3, 3), y) - y), 1e-15);

    Matrix x(1, 3);
    x << 1, 0, 0;
    const Vector w = la::min_norm_solve(x, Vector::Constant(1, 5.0));
    EXPECT_NEAR(w(0), 5.0, 1e-15);
    EXPECT_EQ(w(1), 0.0);
    EXPECT_EQ(w(2), 0.0);
}

TEST(MinNormSolve, InterpolatesWithSmallestNorm) {
    const Matrix x = oracle::gaussian_matrix(2, 4, 21);
    const Vector y = oracle::gaussian_matrix(2, 1, 22).col(0);
    const Vector w = la::min_norm_solve(x, y);
    EXPECT_LE(oracle::max_abs(x * w - y), 1e-10);
    // Alternatives w' = w + (null-space component) always have larger norm.
    const Matrix null_basis = Eigen::FullPivLU<Matrix>(x).kernel();
    for (int i = 0; i < 100; ++i) {
        const Vector c = oracle::gaussian_matrix(null_basis.cols(), 1, 1000 + i).col(0);
        const Vector alt = w + null_basis * c;
        ASSERT_LE(oracle::max_abs(x * alt - y), 1e-9);
        EXPECT_LE(w.norm(), alt.norm() + 1e-12);
    }
}

TEST(MinNormSolve, NormNeverExceedsGeneratingVectorProperty) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto n = static_cast<Eigen::Index>(1 + seed % 4);
        const Matrix x = oracle::gaussian_matrix(n, n + 1 + static_cast<Eigen::Index>(seed % 3), 400 + seed);
        const Vector w0 = oracle::gaussian_matrix(x.cols(), 1, 500 + seed).col(0);
        EXPECT_LE(la::min_norm_solve(x, x * w0).norm(), w0.norm() + 1e-12);
    }
}

TEST(MinNormSolve, OverdeterminedGivesLeastSquares) {
    const Matrix x = oracle::gaussian_matrix(6, 3, 31);
    const Vector y = oracle::gaussian_matrix(6, 1, 32).col(0);
    const Vector ls = x.colPivHouseholderQr().solve(y);
    EXPECT_LE(oracle::max_abs(la::min_norm_solve(x, y) - ls), 1e-10);
}

TEST(MinNormSolve, EmptyDesignAndMismatch) {
    const Vector w = la::min_norm_solve(Matrix(0, 3), Vector(0));
    EXPECT_EQ(w.size(), 3);
    EXPECT_EQ(w.norm(), 0.0);
    EXPECT_THROW(la::min_norm_solve(Matrix::Identity(2, 2), Vector::Zero(3)), ddlab::InvalidInput);
}

TEST(ProjectionComplement, Examples) {
    EXPECT_LE(oracle::max_abs(la::projection_complement(Matrix(0, 4)) - Matrix::Identity(4, 4)), 0.0);
    EXPECT_LE(oracle::max_abs(la::projection_complement(Matrix::Identity(3, 3))), 1e-15);
}

TEST(ProjectionComplement, SymmetricIdempotentWithRankTraceProperty) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto n = static_cast<Eigen::Index>(1 + seed % 5);
        const auto d = static_cast<Eigen::Index>(2 + (seed / 5) % 5);
        Matrix x = oracle::gaussian_matrix(n, d, 600 + seed);
        if (seed % 4 == 0 && n > 1) x.row(1) = -x.row(0);
        const Matrix p = la::projection_complement(x);
        EXPECT_LE(oracle::max_abs(p - p.transpose()), 1e-10);
        EXPECT_LE(oracle::max_abs(p * p - p), 1e-10);
        EXPECT_NEAR(p.trace(), static_cast<double>(d - la::numerical_rank(x)), 1e-10);
    }
}

TEST(ProjectionComplement, Random3x5HasTraceTwo) {
    const Matrix p = la::projection_complement(oracle::gaussian_matrix(3, 5, 41));
    EXPECT_NEAR(p.trace(), 2.0, 1e-10);
    EXPECT_LE(oracle::max_abs(p * p - p), 1e-10);
}

TEST(LogDetGram, Examples) {
    Matrix e(2, 3);
    e << 1, 0, 0, 0, 1, 0;
    EXPECT_NEAR(la::log_det_gram(e), 0.0, 1e-15);
    Matrix r(1, 2);
    r << 3, 4;
    EXPECT_NEAR(la::log_det_gram(r), std::log(25.0), 1e-14);
    EXPECT_EQ(la::log_det_gram(Matrix(0, 3)), 0.0);
}

TEST(LogDetGram, MatchesDirectDeterminant) {
    const Matrix x = oracle::gaussian_matrix(3, 6, 51);
    EXPECT_NEAR(std::exp(la::log_det_gram(x)) / oracle::direct_gram_det(x), 1.0, 1e-8);
}

TEST(LogDetGram, RankDeficientIsMinusInfinity) {
    Matrix x = oracle::gaussian_matrix(2, 4, 52);
    x.row(1) = 3.0 * x.row(0);
    EXPECT_EQ(la::log_det_gram(x), -std::numeric_limits<double>::infinity());
}

TEST(LogDetGram, RejectsTallInput) {
    EXPECT_THROW(la::log_det_gram(Matrix::Zero(3, 2)), ddlab::InvalidInput);
}

TEST(LogDetGram, DoesNotOverflowInHighDimension) {
    const Matrix x = 100.0 * oracle::gaussian_matrix(80, 200, 53);
    const double v = la::log_det_gram(x);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 700.0);  // det itself would overflow a double
}
