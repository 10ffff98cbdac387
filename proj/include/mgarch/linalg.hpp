#pragma once

#include "mgarch/errors.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace mgarch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline double relative_asymmetry(const Matrix& a) {
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Symmetric positive semidefinite square root via eigendecomposition.
///
/// Eigenvalues are clipped at zero, so the result is the unique symmetric PSD
/// root B with B * B = A. Throws if A is not symmetric to 1e-10 (relative) or has
/// an eigenvalue below -1e-8 * ||A||.
inline Matrix sqrt_psd(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw invalid_input("sqrt_psd: matrix is not square");
    }
    if (a.size() == 0) {
        return a;
    }
    if (!a.allFinite()) {
        throw invalid_input("sqrt_psd: non-finite entries");
    }
    if (relative_asymmetry(a) > 1e-10) {
        throw invalid_input("sqrt_psd: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
    if (es.info() != Eigen::Success) {
        throw numerical_error("sqrt_psd: eigendecomposition failed");
    }
    const Vector& lambda = es.eigenvalues();
    const double norm = lambda.cwiseAbs().maxCoeff();
    if (lambda.minCoeff() < -1e-8 * norm) {
        throw invalid_input("sqrt_psd: matrix has a negative eigenvalue");
    }
    const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Symmetric inverse square root of a symmetric positive definite matrix.
inline Matrix inv_sqrt_spd(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
    if (es.info() != Eigen::Success) {
        throw numerical_error("inv_sqrt_spd: eigendecomposition failed");
    }
    const Vector& lambda = es.eigenvalues();
    if (!(lambda.minCoeff() > 0.0)) {
        throw numerical_error("inv_sqrt_spd: matrix is not positive definite");
    }
    const Vector inv_root = lambda.cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
}

/// Kronecker product A (x) B.
inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Column-stacking vectorization.
inline Vector vec(const Matrix& a) {
    return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline double spectral_radius(const Matrix& a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> es(a, false);
    if (es.info() != Eigen::Success) {
        throw numerical_error("spectral_radius: eigensolver failed");
    }
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Reciprocal condition number estimate from symmetric eigenvalues (|min| / |max|).
inline double inverse_condition_symmetric(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
    const Vector mags = es.eigenvalues().cwiseAbs();
    const double hi = mags.maxCoeff();
    return hi > 0.0 ? mags.minCoeff() / hi : 0.0;
}

/// Top-k eigenvectors (descending eigenvalue order) of a symmetric matrix.
inline Matrix top_eigenvectors(const Matrix& a, Eigen::Index k) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
    if (es.info() != Eigen::Success) {
        throw numerical_error("top_eigenvectors: eigendecomposition failed");
    }
    const Eigen::Index d = a.rows();
    Matrix out(d, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        out.col(j) = es.eigenvectors().col(d - 1 - j);
    }
    return out;
}

/// Eigenvalues of a symmetric matrix in descending order.
inline Vector eigenvalues_descending(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

/// Upper tail P(chi2_dof > q).
inline double chi_square_sf(double q, double dof) {
    if (!(q > 0.0)) {
        return 1.0;
    }
    if (!std::isfinite(q)) {
        return 0.0;
    }
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, q));
}

inline double chi_square_cdf(double q, double dof) { return 1.0 - chi_square_sf(q, dof); }

/// Two-sided standard normal p-value.
inline double normal_two_sided_p(double z) {
    if (!std::isfinite(z)) {
        return 0.0;
    }
    boost::math::normal dist;
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(z)));
}

}  // namespace linalg
}  // namespace mgarch
