#include "mgarch/linalg.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

TEST(Linalg, SqrtPsdSquaresBack) {
    Matrix a(3, 3);
    a << 4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0;
    const Matrix r = linalg::sqrt_psd(a);
    EXPECT_LT((r * r - a).norm(), 1e-12);
    EXPECT_LT(linalg::relative_asymmetry(r), 1e-14);
    const Matrix ir = linalg::inv_sqrt_spd(a);
    EXPECT_LT((ir * a * ir - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(Linalg, SqrtPsdClipsNegativeRoundoff) {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = -1e-18;
    const Matrix r = linalg::sqrt_psd(a);
    EXPECT_TRUE(r.allFinite());
    EXPECT_NEAR(r(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(r(1, 1), 0.0, 1e-15);
}

TEST(Linalg, KronAndVec) {
    Matrix a(2, 2);
    a << 1, 2, 3, 4;
    Matrix b(2, 1);
    b << 5, 6;
    const Matrix k = linalg::kron(a, b);
    ASSERT_EQ(k.rows(), 4);
    ASSERT_EQ(k.cols(), 2);
    EXPECT_EQ(k(3, 1), 24.0);
    EXPECT_EQ(k(1, 0), 6.0);
    // vec(B X A') = (A (x) B) vec(X)
    Matrix x(1, 2);
    x << 0.5, -1.5;
    const Vector lhs = linalg::vec(b * x * a.transpose());
    const Vector rhs = linalg::kron(a, b) * linalg::vec(x);
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
    EXPECT_EQ(linalg::unvec(linalg::vec(a), 2, 2), a);
}

TEST(Linalg, SpectralRadiusAndEigenvalues) {
    Matrix a(2, 2);
    a << 0.0, 1.0, -0.25, 0.0;  // eigenvalues +-0.5i
    EXPECT_NEAR(linalg::spectral_radius(a), 0.5, 1e-12);
    Matrix s(3, 3);
    s << 2, 0, 0, 0, 5, 0, 0, 0, 1;
    const Vector e = linalg::eigenvalues_descending(s);
    EXPECT_DOUBLE_EQ(e(0), 5.0);
    EXPECT_DOUBLE_EQ(e(2), 1.0);
    const Matrix v = linalg::top_eigenvectors(s, 1);
    EXPECT_NEAR(std::abs(v(1, 0)), 1.0, 1e-12);
}

TEST(Linalg, DistributionTails) {
    EXPECT_NEAR(linalg::chi_square_sf(3.841458820694124, 1.0), 0.05, 1e-12);
    EXPECT_NEAR(linalg::chi_square_sf(9.487729036781154, 4.0), 0.05, 1e-12);
    EXPECT_NEAR(linalg::chi_square_cdf(2.0, 2.0), 1.0 - std::exp(-1.0), 1e-14);
    EXPECT_NEAR(linalg::normal_two_sided_p(1.959963984540054), 0.05, 1e-12);
}
