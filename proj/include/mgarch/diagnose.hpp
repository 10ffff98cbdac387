#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/estimate.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/likelihood.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"
#include "mgarch/theta.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mgarch {

struct DiagnosticReport {
    int L = 0;
    Vector R_hat;
    Matrix Omega_hat;
    double Q = 0.0;
    double p_value = 1.0;
    double kappa_hat = 0.0;
    Vector eta_hat;
};

/// Leading term of Omega. `eta_squared` uses [1'eta]^2 as in the limit theorem; `kappa_squared`
/// uses kappa^2, the variance of c_t c_{t-l}. The two agree when the entries of Z_t are independent.
enum class OmegaLeading { eta_squared, kappa_squared };

struct DiagnoseOptions {
    OmegaLeading leading = OmegaLeading::eta_squared;
};

namespace detail {

/// U_t, V_t for t < T without validating theta (used at finite-difference neighbours).
inline void unchecked_uv(const PreparedPanel& data, const Theta& th, std::vector<Matrix>& U, std::vector<Matrix>& V) {
    StatePath path;
    raw_states(data, th, path.S1, path.S2, path.y);
    normalize_states(path);
    U = std::move(path.U);
    V = std::move(path.V);
}

/// c_t = vec(X_t)' Sigma_t^{-1} vec(X_t) - mn along the filtered path.
inline std::vector<double> centered_quadratic(const PreparedPanel& data, const StatePath& path) {
    const double mn = static_cast<double>(data.rows() * data.cols());
    std::vector<double> c(data.size());
    for (std::size_t t = 0; t < data.size(); ++t) {
        Eigen::LLT<Matrix> lu(path.U[t]);
        Eigen::LLT<Matrix> lv(path.V[t]);
        if (lu.info() != Eigen::Success || lv.info() != Eigen::Success) {
            throw numerical_error("diagnose: U_t or V_t is not positive definite at t = " + std::to_string(t));
        }
        const Matrix w = lu.matrixL().solve(data.x(t));
        const Matrix wt = lv.matrixL().solve(w.transpose());
        c[t] = wt.squaredNorm() - mn;
    }
    return c;
}

inline Vector autocorr(const std::vector<double>& c, int L) {
    double denom = 0.0;
    for (double v : c) {
        denom += v * v;
    }
    if (!(denom > 0.0)) {
        throw numerical_error("residual_autocorr: the centered quadratic-form series is identically zero");
    }
    Vector r(L);
    for (int l = 1; l <= L; ++l) {
        double num = 0.0;
        for (std::size_t t = static_cast<std::size_t>(l); t < c.size(); ++t) {
            num += c[t] * c[t - static_cast<std::size_t>(l)];
        }
        r(l - 1) = num / denom;
    }
    return r;
}

}  // namespace detail

/// Z_t = U_t^{-1/2} X_t V_t^{-1/2} with symmetric inverse roots.
inline MatrixPanel residuals(const PreparedPanel& data, const Theta& th) {
    const StatePath path = filter(data, th);
    MatrixPanel out = MatrixPanel::with_dims(data.rows(), data.cols());
    for (std::size_t t = 0; t < data.size(); ++t) {
        out.push_back(linalg::inv_sqrt_spd(path.U[t]) * data.x(t) * linalg::inv_sqrt_spd(path.V[t]));
    }
    return out;
}

inline MatrixPanel residuals(const MatrixPanel& panel, const Theta& th) { return residuals(PreparedPanel(panel), th); }

/// R_l, l = 1..L: sample autocorrelations of vec(X_t)' Sigma_t^{-1} vec(X_t) - mn (lagged sums over
/// t > l divided by the full-sample sum of squares).
inline Vector residual_autocorr(const PreparedPanel& data, const Theta& th, int L) {
    if (L < 1 || static_cast<std::size_t>(L) >= data.size()) {
        throw invalid_input("residual_autocorr: need 1 <= L < T");
    }
    return detail::autocorr(detail::centered_quadratic(data, filter(data, th)), L);
}

inline Vector residual_autocorr(const MatrixPanel& panel, const Theta& th, int L) {
    return residual_autocorr(PreparedPanel(panel), th, L);
}

/// Ingredients of Omega shared by every lag of one fitted model.
struct PortmanteauParts {
    std::vector<double> c;  ///< c_t
    Matrix a;               ///< T x p_active: tr(Sigma_t^{-1} dSigma_t / dtheta_k)
    Matrix b;               ///< T x p_active: vec(X)' Sigma^{-1} (dSigma / dtheta_k) Sigma^{-1} vec(X)
    Matrix C0;              ///< active block
    Matrix C1;
    double kappa = 0.0;
    Vector eta;
};

/// Builds c_t, the Sigma-derivative traces (central differences in natural coordinates), kappa
/// and eta for a fitted model.
inline PortmanteauParts portmanteau_parts(const PreparedPanel& data, const FitResult& fit) {
    if (!fit.has_sandwich) {
        throw numerical_error("portmanteau: the fit has no sandwich estimate (" + fit.sandwich_error + ")");
    }
    const Theta& th = fit.theta_hat;
    const ThetaShape shape = ThetaShape::of(th);
    const std::size_t T = data.size();
    const Eigen::Index m = data.rows();
    const Eigen::Index n = data.cols();
    const std::vector<Eigen::Index> idx = detail::active_indices(active_mask(shape));
    const auto pa = static_cast<Eigen::Index>(idx.size());

    PortmanteauParts parts;
    const StatePath path = filter(data, th);
    parts.c = detail::centered_quadratic(data, path);

    std::vector<Matrix> Uinv(T), Vinv(T), Zt(T);
    for (std::size_t t = 0; t < T; ++t) {
        Uinv[t] = path.U[t].llt().solve(Matrix::Identity(m, m));
        Vinv[t] = path.V[t].llt().solve(Matrix::Identity(n, n));
        Zt[t] = Uinv[t] * data.x(t) * Vinv[t];
    }

    parts.a.resize(static_cast<Eigen::Index>(T), pa);
    parts.b.resize(static_cast<Eigen::Index>(T), pa);
    const Vector base = to_natural(th);
    const double md = static_cast<double>(m);
    const double nd = static_cast<double>(n);
    std::vector<Matrix> Up, Vp, Um, Vm;
    for (Eigen::Index k = 0; k < pa; ++k) {
        const Eigen::Index i = idx[static_cast<std::size_t>(k)];
        const double h = detail::fd_step(base(i));
        Vector up = base;
        Vector dn = base;
        up(i) += h;
        dn(i) -= h;
        detail::unchecked_uv(data, from_natural(up, shape), Up, Vp);
        detail::unchecked_uv(data, from_natural(dn, shape), Um, Vm);
        for (std::size_t t = 0; t < T; ++t) {
            const Matrix dU = (Up[t] - Um[t]) / (2.0 * h);
            const Matrix dV = (Vp[t] - Vm[t]) / (2.0 * h);
            const auto tt = static_cast<Eigen::Index>(t);
            parts.a(tt, k) = md * (Vinv[t] * dV).trace() + nd * (Uinv[t] * dU).trace();
            parts.b(tt, k) = (Zt[t].transpose() * path.U[t] * Zt[t] * dV).trace() +
                             (Zt[t].transpose() * dU * Zt[t] * path.V[t]).trace();
        }
    }

    parts.C0.resize(pa, pa);
    parts.C1.resize(pa, pa);
    for (Eigen::Index r = 0; r < pa; ++r) {
        for (Eigen::Index s = 0; s < pa; ++s) {
            parts.C0(r, s) = fit.C0_hat(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(s)]);
            parts.C1(r, s) = fit.C1_hat(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(s)]);
        }
    }

    // kappa and eta from the residuals Z_t = U^{-1/2} X V^{-1/2}
    const double mn = md * nd;
    double k2 = 0.0;
    parts.eta = Vector::Zero(m * n);
    for (std::size_t t = 0; t < T; ++t) {
        const Matrix z = linalg::inv_sqrt_spd(path.U[t]) * data.x(t) * linalg::inv_sqrt_spd(path.V[t]);
        const double s = z.squaredNorm();
        k2 += s * s;
        parts.eta += linalg::vec(z).array().pow(4).matrix();
    }
    parts.kappa = k2 / static_cast<double>(T) - mn * mn;
    parts.eta = (parts.eta / static_cast<double>(T)).array() - 1.0;
    return parts;
}

/// Omega_hat for lags 1..L from precomputed parts.
inline Matrix omega_hat(const PortmanteauParts& parts, int L, const DiagnoseOptions& opt = {}) {
    const auto T = static_cast<Eigen::Index>(parts.c.size());
    if (L < 1 || L >= T) {
        throw invalid_input("omega_hat: need 1 <= L < T");
    }
    const Eigen::Index pa = parts.a.cols();
    Matrix M = Matrix::Zero(L, pa);
    Matrix N = Matrix::Zero(L, pa);
    for (int l = 1; l <= L; ++l) {
        for (Eigen::Index t = l; t < T; ++t) {
            const double lagged = parts.c[static_cast<std::size_t>(t - l)];
            M.row(l - 1) += parts.a.row(t) * lagged;
            N.row(l - 1) += parts.b.row(t) * (parts.c[static_cast<std::size_t>(t)] * lagged);
        }
    }
    M /= static_cast<double>(T);
    N /= static_cast<double>(T);

    const Eigen::LDLT<Matrix> c0(parts.C0);
    const Matrix C0inv_Mt = c0.solve(M.transpose());  // pa x L
    const Matrix C0inv_Nt = c0.solve(N.transpose());
    const Matrix correction =
        0.5 * N * C0inv_Mt + 0.5 * M * C0inv_Nt - C0inv_Mt.transpose() * parts.C1 * C0inv_Mt;
    const double lead = opt.leading == OmegaLeading::eta_squared ? std::pow(parts.eta.sum(), 2.0)
                                                                  : parts.kappa * parts.kappa;
    const double k2 = parts.kappa * parts.kappa;
    if (!(k2 > 0.0)) {
        throw numerical_error("omega_hat: kappa_hat is zero");
    }
    Matrix omega = (lead * Matrix::Identity(L, L) - correction) / k2;
    return linalg::symmetrize(omega);
}

inline Matrix omega_hat(const PreparedPanel& data, const FitResult& fit, int L, const DiagnoseOptions& opt = {}) {
    return omega_hat(portmanteau_parts(data, fit), L, opt);
}

/// Q_T(L) = T R' Omega^{-1} R with its chi-square(L) upper-tail p-value.
inline DiagnosticReport portmanteau(const PortmanteauParts& parts, int L, const DiagnoseOptions& opt = {}) {
    if (L < 1) {
        throw invalid_input("portmanteau: L must be at least 1");
    }
    DiagnosticReport rep;
    rep.L = L;
    rep.R_hat = detail::autocorr(parts.c, L);
    rep.Omega_hat = omega_hat(parts, L, opt);
    rep.kappa_hat = parts.kappa;
    rep.eta_hat = parts.eta;
    Eigen::LLT<Matrix> llt(rep.Omega_hat);
    if (llt.info() != Eigen::Success) {
        throw numerical_error("portmanteau: Omega_hat is not positive definite at L = " + std::to_string(L) +
                              "; use a longer sample or fewer lags");
    }
    const double T = static_cast<double>(parts.c.size());
    rep.Q = std::max(0.0, T * rep.R_hat.dot(llt.solve(rep.R_hat)));
    rep.p_value = linalg::chi_square_sf(rep.Q, static_cast<double>(L));
    return rep;
}

inline DiagnosticReport portmanteau(const PreparedPanel& data, const FitResult& fit, int L,
                                    const DiagnoseOptions& opt = {}) {
    return portmanteau(portmanteau_parts(data, fit), L, opt);
}

/// One report per lag in `lags`, sharing the derivative computations.
inline std::vector<DiagnosticReport> portmanteau(const PreparedPanel& data, const FitResult& fit,
                                                 const std::vector<int>& lags, const DiagnoseOptions& opt = {}) {
    const PortmanteauParts parts = portmanteau_parts(data, fit);
    std::vector<DiagnosticReport> out;
    out.reserve(lags.size());
    for (int L : lags) {
        out.push_back(portmanteau(parts, L, opt));
    }
    return out;
}

}  // namespace mgarch
