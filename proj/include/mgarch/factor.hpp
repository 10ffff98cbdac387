#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/estimate.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mgarch {

struct Loadings {
    Matrix R;  ///< m x k1, orthonormal columns
    Matrix C;  ///< n x k2, orthonormal columns
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline void check_factor_dims(const MatrixPanel& panel, Eigen::Index k1, Eigen::Index k2) {
    if (panel.size() < 2) {
        throw invalid_input("factor: need T >= 2");
    }
    if (k1 < 1 || k2 < 1 || k1 > panel.rows() || k2 > panel.cols()) {
        throw invalid_input("factor: need 1 <= k1 <= m and 1 <= k2 <= n");
    }
}

// (1/(T s)) sum_t X_t P X_t'  (row side) with P an n x n projector, or the identity when empty
inline Matrix row_moment(const MatrixPanel& panel, const Matrix& P, double s) {
    Matrix acc = Matrix::Zero(panel.rows(), panel.rows());
    for (const auto& x : panel) {
        if (P.size() == 0) {
            acc.noalias() += x * x.transpose();
        } else {
            acc.noalias() += x * P * x.transpose();
        }
    }
    return acc / (static_cast<double>(panel.size()) * s);
}

inline Matrix col_moment(const MatrixPanel& panel, const Matrix& P, double s) {
    Matrix acc = Matrix::Zero(panel.cols(), panel.cols());
    for (const auto& x : panel) {
        if (P.size() == 0) {
            acc.noalias() += x.transpose() * x;
        } else {
            acc.noalias() += x.transpose() * P * x;
        }
    }
    return acc / (static_cast<double>(panel.size()) * s);
}

inline Matrix top_checked(const Matrix& moment, Eigen::Index k, const char* side) {
    const Vector ev = linalg::eigenvalues_descending(moment);
    if (!(ev(0) > 0.0) || !(ev(k - 1) > 1e-13 * ev(0))) {
        throw numerical_error(std::string("estimate_loadings: ") + side +
                              " second moment has rank below the requested number of factors");
    }
    return linalg::top_eigenvectors(moment, k);
}

}  // namespace detail

/// Projected loading estimates by alternating eigendecompositions: R from the top-k1 eigenvectors
/// of (1/(T n)) sum X X', then C from (1/(T k1)) sum X' R R' X and R from (1/(T k2)) sum X C C' X'
/// until the projector RR' + CC' moves by less than `tol` (Frobenius).
inline Loadings estimate_loadings(const MatrixPanel& panel, Eigen::Index k1, Eigen::Index k2, int max_iter = 100,
                                  double tol = 1e-8) {
    detail::check_factor_dims(panel, k1, k2);
    Loadings out;
    const double nd = static_cast<double>(panel.cols());
    out.R = detail::top_checked(detail::row_moment(panel, Matrix(), nd), k1, "row");
    out.C = detail::top_checked(detail::col_moment(panel, out.R * out.R.transpose(), static_cast<double>(k1)), k2,
                                "column");
    for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
        const Matrix R_old = out.R;
        const Matrix C_old = out.C;
        out.R = detail::top_checked(
            detail::row_moment(panel, out.C * out.C.transpose(), static_cast<double>(k2)), k1, "row");
        out.C = detail::top_checked(
            detail::col_moment(panel, out.R * out.R.transpose(), static_cast<double>(k1)), k2, "column");
        const double change = (out.R * out.R.transpose() - R_old * R_old.transpose()).norm() +
                              (out.C * out.C.transpose() - C_old * C_old.transpose()).norm();
        if (change < tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// ||A A' - B B'||_F / sqrt(2k): 0 for equal column spaces, 1 for orthogonal ones.
inline double subspace_distance(const Matrix& a, const Matrix& b) {
    const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
    const double k = static_cast<double>(std::max(a.cols(), b.cols()));
    return (qa * qa.transpose() - qb * qb.transpose()).norm() / std::sqrt(2.0 * k);
}

/// argmax_{1 <= j <= k_max} lambda_j / lambda_{j+1}; ties go to the smaller j, and a ratio whose
/// denominator is below the numerical floor counts as infinite.
inline Eigen::Index eigenvalue_ratio_select(const Vector& eig_desc, Eigen::Index k_max) {
    if (k_max < 1 || k_max + 1 > eig_desc.size()) {
        throw invalid_input("eigenvalue_ratio: need 1 <= k_max < dimension");
    }
    const double top = eig_desc(0);
    if (!(top > std::numeric_limits<double>::min())) {
        throw numerical_error("eigenvalue_ratio: all eigenvalues are below the numerical floor");
    }
    const double floor = 1e-12 * top;
    Eigen::Index best = 1;
    double best_ratio = -1.0;
    for (Eigen::Index j = 1; j <= k_max; ++j) {
        const double num = eig_desc(j - 1);
        const double den = eig_desc(j);
        double ratio;
        if (den <= floor) {
            ratio = num > floor ? std::numeric_limits<double>::infinity() : 1.0;
        } else {
            ratio = num / den;
        }
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = j;
        }
        if (std::isinf(ratio)) {
            break;
        }
    }
    return best;
}

/// Factor numbers (k1, k2) from the eigenvalues of the row and column second moments.
inline std::pair<Eigen::Index, Eigen::Index> eigenvalue_ratio(const MatrixPanel& panel, Eigen::Index k_max) {
    if (k_max < 1 || k_max >= std::min(panel.rows(), panel.cols())) {
        throw invalid_input("eigenvalue_ratio: need 1 <= k_max < min(m, n)");
    }
    if (panel.empty()) {
        throw invalid_input("eigenvalue_ratio: empty panel");
    }
    const Vector er = linalg::eigenvalues_descending(detail::row_moment(panel, Matrix(), 1.0));
    const Vector ec = linalg::eigenvalues_descending(detail::col_moment(panel, Matrix(), 1.0));
    return {eigenvalue_ratio_select(er, k_max), eigenvalue_ratio_select(ec, k_max)};
}

/// Raw varimax criterion: sum over columns of the variance of the squared loadings.
inline double varimax_criterion(const Matrix& load) {
    const double d = static_cast<double>(load.rows());
    double v = 0.0;
    for (Eigen::Index j = 0; j < load.cols(); ++j) {
        const Vector sq = load.col(j).array().square();
        const double mean = sq.sum() / d;
        v += sq.array().square().sum() / d - mean * mean;
    }
    return v;
}

struct VarimaxResult {
    Matrix rotated;
    Matrix G;  ///< orthogonal, rotated = load * G
    int sweeps = 0;
};

/// Varimax by cycling planar rotations over column pairs until the criterion gains less than `tol`.
inline VarimaxResult varimax(const Matrix& load, double tol = 1e-8, int max_sweeps = 500) {
    const Eigen::Index k = load.cols();
    const double d = static_cast<double>(load.rows());
    VarimaxResult out{load, Matrix::Identity(k, k), 0};
    if (k < 2) {
        return out;
    }
    double crit = varimax_criterion(out.rotated);
    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
        for (Eigen::Index i = 0; i < k - 1; ++i) {
            for (Eigen::Index j = i + 1; j < k; ++j) {
                const Vector x = out.rotated.col(i);
                const Vector y = out.rotated.col(j);
                const Vector u = x.array().square() - y.array().square();
                const Vector v = 2.0 * x.array() * y.array();
                const double A = u.sum();
                const double B = v.sum();
                const double C = (u.array().square() - v.array().square()).sum();
                const double D = 2.0 * (u.array() * v.array()).sum();
                const double phi = 0.25 * std::atan2(D - 2.0 * A * B / d, C - (A * A - B * B) / d);
                const double c = std::cos(phi);
                const double s = std::sin(phi);
                out.rotated.col(i) = c * x + s * y;
                out.rotated.col(j) = -s * x + c * y;
                const Vector gi = out.G.col(i);
                const Vector gj = out.G.col(j);
                out.G.col(i) = c * gi + s * gj;
                out.G.col(j) = -s * gi + c * gj;
            }
        }
        const double next = varimax_criterion(out.rotated);
        const bool done = std::abs(next - crit) < tol;
        crit = next;
        if (done) {
            break;
        }
    }
    return out;
}

/// F_t = R' X_t C.
inline MatrixPanel extract_factors(const MatrixPanel& panel, const Matrix& R, const Matrix& C) {
    if (R.rows() != panel.rows() || C.rows() != panel.cols()) {
        throw invalid_input("extract_factors: loading dims do not match the panel");
    }
    MatrixPanel out = MatrixPanel::with_dims(R.cols(), C.cols());
    for (std::size_t t = 0; t < panel.size(); ++t) {
        out.push_back(R.transpose() * panel[t] * C);
    }
    return out;
}

/// (C (x) R)(V (x) U)(C (x) R)' + Sigma_e, assembled as (C V C') (x) (R U R').
inline Matrix sigma_x(const Matrix& R, const Matrix& C, const Matrix& U_f, const Matrix& V_f, const Matrix& sigma_e) {
    const Matrix low = linalg::kron(C * V_f * C.transpose(), R * U_f * R.transpose());
    if (sigma_e.cols() == 1 && low.rows() != 1) {
        Matrix out = low;
        out.diagonal() += sigma_e;
        return linalg::symmetrize(out);
    }
    return linalg::symmetrize(low + sigma_e);
}

struct FactorOptions {
    Eigen::Index k1 = 0;     ///< 0 selects by eigenvalue ratio
    Eigen::Index k2 = 0;
    Eigen::Index k_max = 0;  ///< 0 means min(m, n) - 1, capped at 8
    bool rotate = true;
    FitOptions garch{};
};

struct FactorFit {
    Matrix R_load;
    Matrix C_load;
    Eigen::Index k1 = 0;
    Eigen::Index k2 = 0;
    MatrixPanel factors;
    Matrix sigma_e;  ///< mn x mn, or an mn x 1 diagonal when sigma_e_diagonal
    bool sigma_e_diagonal = false;
    FitResult garch;
    StatePath factor_states;  ///< includes the one-step-ahead state at index T
    std::vector<std::string> warnings;
};

/// Loadings, rotation, factor panel, idiosyncratic covariance and matrix GARCH on the factors.
inline FactorFit factor_fit(const MatrixPanel& panel, const FactorOptions& opt = {}) {
    FactorFit out;
    Eigen::Index k1 = opt.k1;
    Eigen::Index k2 = opt.k2;
    if (k1 == 0 || k2 == 0) {
        Eigen::Index k_max = opt.k_max;
        if (k_max == 0) {
            k_max = std::min<Eigen::Index>(8, std::min(panel.rows(), panel.cols()) - 1);
        }
        const auto sel = eigenvalue_ratio(panel, k_max);
        k1 = k1 == 0 ? sel.first : k1;
        k2 = k2 == 0 ? sel.second : k2;
    }
    const Loadings raw = estimate_loadings(panel, k1, k2);
    if (!raw.converged) {
        out.warnings.push_back("loading iteration did not converge");
    }
    out.k1 = k1;
    out.k2 = k2;
    out.R_load = opt.rotate ? varimax(raw.R).rotated : raw.R;
    out.C_load = opt.rotate ? varimax(raw.C).rotated : raw.C;
    out.factors = extract_factors(panel, out.R_load, out.C_load);

    const Eigen::Index mn = panel.rows() * panel.cols();
    out.sigma_e_diagonal = mn > 256;
    out.sigma_e = out.sigma_e_diagonal ? Matrix::Zero(mn, 1) : Matrix::Zero(mn, mn);
    for (std::size_t t = 0; t < panel.size(); ++t) {
        const Vector e = linalg::vec(panel[t] - out.R_load * out.factors[t] * out.C_load.transpose());
        if (out.sigma_e_diagonal) {
            out.sigma_e += e.array().square().matrix();
        } else {
            out.sigma_e.noalias() += e * e.transpose();
        }
    }
    out.sigma_e /= static_cast<double>(panel.size());
    if (out.sigma_e_diagonal) {
        out.warnings.push_back("mn > 256: idiosyncratic covariance stored as its diagonal");
    }

    const PreparedPanel fdata(out.factors);
    out.garch = fit(fdata, opt.garch);
    out.factor_states = filter(fdata, out.garch.theta_hat, {.append_forecast = true});
    return out;
}

/// Sigma_x at state index t (0-based; t = T is the one-step-ahead forecast after the sample).
inline Matrix sigma_x_forecast(const FactorFit& f, std::size_t t) {
    if (t >= f.factor_states.size()) {
        throw invalid_input("sigma_x_forecast: index " + std::to_string(t) + " beyond the forecast horizon");
    }
    return sigma_x(f.R_load, f.C_load, f.factor_states.U[t], f.factor_states.V[t], f.sigma_e);
}

}  // namespace mgarch
