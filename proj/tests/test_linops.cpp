#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "elmsb/linops.hpp"
#include "elmsb/random.hpp"

using namespace elmsb;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, RandomStream& rng) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = rng.normal(0.0, 1.0);
    return m;
}

// Rank-r matrix as a product of (rows x r) and (r x cols) factors.
Matrix random_rank(std::size_t rows, std::size_t cols, std::size_t r, RandomStream& rng) {
    return matmul(random_matrix(rows, r, rng), random_matrix(r, cols, rng));
}

Matrix naive_product(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < b.cols(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * b(j, k);
            c(i, k) = s;
        }
    return c;
}

double rel_diff(const Matrix& a, const Matrix& b) {
    const double denom = std::max(b.frobenius_norm(), 1e-300);
    return (a - b).frobenius_norm() / denom;
}

double asymmetry(const Matrix& m) { return (m - m.transposed()).frobenius_norm() / std::max(m.frobenius_norm(), 1e-300); }

}  // namespace

TEST(Matrix, RejectsNonFiniteAndBadSize) {
    EXPECT_THROW(Matrix(2, 2, {1, 2, 3}), std::invalid_argument);
    EXPECT_THROW(Matrix(1, 2, {1, std::numeric_limits<double>::quiet_NaN()}), std::invalid_argument);
    EXPECT_THROW(Matrix(1, 1, {std::numeric_limits<double>::infinity()}), std::invalid_argument);
}

TEST(Matmul, IdentityAndZero) {
    RandomStream rng(1);
    const Matrix a = random_matrix(3, 4, rng);
    EXPECT_EQ(matmul(Matrix::identity(3), a), a);
    const Matrix z = matmul(a, Matrix(4, 2));
    for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, MatchesTripleLoop) {
    RandomStream rng(2);
    const Matrix a = random_matrix(4, 3, rng), b = random_matrix(3, 2, rng);
    const Matrix c = matmul(a, b), ref = naive_product(a, b);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.data()[i], ref.data()[i], 1e-12);
}

// Larger shapes exercise the blocked kernels.
TEST(Matmul, MatchesTripleLoopLargeAndTransposedVariants) {
    RandomStream rng(3);
    const Matrix a = random_matrix(100, 120, rng), b = random_matrix(120, 90, rng);
    EXPECT_LT(rel_diff(matmul(a, b), naive_product(a, b)), 1e-13);
    const Matrix at = a.transposed(), bt = b.transposed();
    EXPECT_LT(rel_diff(matmul_tn(at, b), naive_product(a, b)), 1e-13);
    EXPECT_LT(rel_diff(matmul_nt(a, bt), naive_product(a, b)), 1e-13);
}

TEST(Matmul, MismatchNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(4, 5));
        FAIL() << "expected throw";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
    }
}

TEST(Svd, DiagonalAndZero) {
    const std::vector<double> d{3.0, 1.0};
    const SvdResult s = svd_thin(Matrix::diagonal(d));
    EXPECT_NEAR(s.singular_values[0], 3.0, 1e-14);
    EXPECT_NEAR(s.singular_values[1], 1.0, 1e-14);
    const SvdResult z = svd_thin(Matrix(2, 2));
    EXPECT_EQ(z.singular_values, (std::vector<double>{0.0, 0.0}));
}

TEST(Svd, ReconstructionAndOrthonormality) {
    RandomStream rng(4);
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{5, 3}, {3, 5}, {40, 40}, {60, 25}}) {
        const Matrix a = random_matrix(m, n, rng);
        const SvdResult s = svd_thin(a);
        const std::size_t r = std::min(m, n);
        ASSERT_EQ(s.u.rows(), m);
        ASSERT_EQ(s.u.cols(), r);
        ASSERT_EQ(s.v_t.rows(), r);
        ASSERT_EQ(s.v_t.cols(), n);
        for (std::size_t i = 0; i < r; ++i) {
            EXPECT_GE(s.singular_values[i], 0.0);
            if (i) { EXPECT_LE(s.singular_values[i], s.singular_values[i - 1]); }
        }
        EXPECT_LT(rel_diff(matmul(matmul(s.u, Matrix::diagonal(s.singular_values)), s.v_t), a), 1e-10);
        EXPECT_LT(rel_diff(matmul_tn(s.u, s.u), Matrix::identity(r)), 1e-10);
        EXPECT_LT(rel_diff(matmul_nt(s.v_t, s.v_t), Matrix::identity(r)), 1e-10);
    }
}

TEST(Svd, RankRevealing) {
    RandomStream rng(5);
    for (std::size_t r : {1u, 3u, 7u}) {
        const Matrix a = random_rank(20, 12, r, rng);
        const SvdResult s = svd_thin(a);
        EXPECT_EQ(numerical_rank(s.singular_values, PinvOptions{}.effective(20, 12)), r);
    }
}

TEST(Pinv, IdentityAndRankDeficientDiagonal) {
    EXPECT_LT(rel_diff(pinv(Matrix::identity(4)), Matrix::identity(4)), 1e-15);
    const std::vector<double> d{2.0, 0.0}, inv{0.5, 0.0};
    const Matrix p = pinv(Matrix::diagonal(d));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p.data()[i], Matrix::diagonal(inv).data()[i], 1e-15);
}

TEST(Pinv, DefaultCutoffIsDimensionTimesEpsilon) {
    EXPECT_DOUBLE_EQ(PinvOptions{}.effective(6, 4), 6 * std::numeric_limits<double>::epsilon());
    EXPECT_DOUBLE_EQ(PinvOptions{1e-3}.effective(6, 4), 1e-3);
}

// The four Penrose conditions over random shapes up to 50x50, a third of them
// rank-deficient.
TEST(Pinv, PenroseConditionsProperty) {
    RandomStream rng(6);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform01() * 50);
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform01() * 50);
        const std::size_t full = std::min(m, n);
        const Matrix a = (trial % 3 == 0 && full > 1)
                             ? random_rank(m, n, 1 + static_cast<std::size_t>(rng.uniform01() * (full - 1)), rng)
                             : random_matrix(m, n, rng);
        const Matrix p = pinv(a);
        SCOPED_TRACE(a.shape_str());
        EXPECT_LT(rel_diff(matmul(matmul(a, p), a), a), 1e-8);
        EXPECT_LT(rel_diff(matmul(matmul(p, a), p), p), 1e-8);
        EXPECT_LT(asymmetry(matmul(a, p)), 1e-8);
        EXPECT_LT(asymmetry(matmul(p, a)), 1e-8);
    }
}

TEST(LeastSquares, RecoversExactSolution) {
    RandomStream rng(7);
    const Matrix h = random_matrix(6, 6, rng), beta0 = random_matrix(6, 2, rng);
    EXPECT_LT(rel_diff(solve_least_squares(h, matmul(h, beta0)), beta0), 1e-9);
}

TEST(LeastSquares, ZeroColumnGivesZeroRow) {
    RandomStream rng(8);
    Matrix h = random_matrix(8, 3, rng);
    for (std::size_t i = 0; i < 8; ++i) h(i, 1) = 0.0;
    std::size_t rank = 0;
    const Matrix beta = solve_least_squares(h, random_matrix(8, 1, rng), {}, &rank);
    EXPECT_EQ(rank, 2u);
    EXPECT_EQ(beta(1, 0), 0.0);
}

TEST(LeastSquares, MatchesNormalEquations) {
    RandomStream rng(9);
    const Matrix h = random_matrix(10, 3, rng), t = random_matrix(10, 1, rng);
    // (HᵀH)⁻¹Hᵀt via an explicit 3x3 adjugate inverse.
    const Matrix g = matmul_tn(h, h), rhs = matmul_tn(h, t);
    const double det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) -
                       g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0)) +
                       g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    Matrix inv(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
            inv(i, j) = (g(r0, c0) * g(r1, c1) - g(r0, c1) * g(r1, c0)) / det;
        }
    EXPECT_LT(rel_diff(solve_least_squares(h, t), matmul(inv, rhs)), 1e-8);
}

TEST(LeastSquares, EqualsPinvTimesT) {
    RandomStream rng(10);
    const Matrix h = random_rank(30, 20, 12, rng), t = random_matrix(30, 2, rng);
    EXPECT_LT(rel_diff(solve_least_squares(h, t), matmul(pinv(h), t)), 1e-9);
}

TEST(LeastSquares, LocallyOptimalUnderPerturbation) {
    RandomStream rng(11);
    const Matrix h = random_matrix(25, 8, rng), t = random_matrix(25, 1, rng);
    const Matrix beta = solve_least_squares(h, t);
    const double best = (matmul(h, beta) - t).frobenius_norm();
    for (int i = 0; i < 100; ++i) {
        const Matrix delta = 1e-3 * random_matrix(8, 1, rng);
        EXPECT_LE(best, (matmul(h, beta + delta) - t).frobenius_norm());
    }
}

TEST(LeastSquares, RowMismatchThrows) {
    EXPECT_THROW(solve_least_squares(Matrix(3, 2), Matrix(4, 1)), std::invalid_argument);
}

TEST(EigSym, ResidualAndOrthogonalityAtModerateSize) {
    RandomStream rng(12);
    const Matrix g = random_matrix(160, 160, rng);
    const Matrix a = matmul_tn(g, g);
    const SymEigen e = eig_sym(a);
    for (std::size_t i = 1; i < e.values.size(); ++i) EXPECT_LE(e.values[i], e.values[i - 1]);
    const Matrix recon = matmul(matmul(e.vectors, Matrix::diagonal(e.values)), e.vectors.transposed());
    EXPECT_LT(rel_diff(recon, a), 1e-10);
    EXPECT_LT(rel_diff(matmul_tn(e.vectors, e.vectors), Matrix::identity(160)), 1e-10);
}
