#pragma once

#include "mgarch/filter.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/theta.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mgarch {

/// Objective value reported for parameters whose filtered covariances are not positive definite.
inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

namespace detail {

/// Per-time pieces of the Gaussian quasi log-likelihood, computed from S1, S2 and y without
/// ever forming the mn x mn covariance:
///   log|Sigma| = mn log y + n log|S1| - mn log tr S1 + m log|S2| - mn log tr S2
///   vec(X)' Sigma^{-1} vec(X) = (tr S1 tr S2 / y) tr(S2^{-1} X' S1^{-1} X)
struct ObsTerms {
    double logdet = 0.0;
    double quad = 0.0;
    bool ok = false;
};

inline ObsTerms obs_terms(const Matrix& S1, const Matrix& S2, double y, const Matrix& x) {
    ObsTerms out;
    if (!(y > 0.0) || !std::isfinite(y)) {
        return out;
    }
    Eigen::LLT<Matrix> l1(S1);
    Eigen::LLT<Matrix> l2(S2);
    if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) {
        return out;
    }
    const double m = static_cast<double>(S1.rows());
    const double n = static_cast<double>(S2.rows());
    const double tr1 = S1.trace();
    const double tr2 = S2.trace();
    const double ld1 = 2.0 * l1.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double ld2 = 2.0 * l2.matrixL().toDenseMatrix().diagonal().array().log().sum();
    // W = L1^{-1} X L2^{-T}  =>  ||W||^2 = tr(S2^{-1} X' S1^{-1} X)
    Matrix w = l1.matrixL().solve(x);
    Matrix wt = l2.matrixL().solve(w.transpose());
    const double q = wt.squaredNorm();
    out.logdet = m * n * std::log(y) + n * ld1 - m * n * std::log(tr1) + m * ld2 - m * n * std::log(tr2);
    out.quad = tr1 * tr2 / y * q;
    out.ok = std::isfinite(out.logdet) && std::isfinite(out.quad);
    return out;
}

/// Filter recursions for t < T without the U/V normalization (no validation).
inline void raw_states(const PreparedPanel& data, const Theta& th, std::vector<Matrix>& S1, std::vector<Matrix>& S2,
                       std::vector<double>& y) {
    const std::size_t T = data.size();
    side_recursion(th.row, T, T, [&](std::size_t t) -> const Matrix& { return data.xxt(t); }, S1);
    side_recursion(th.col, T, T, [&](std::size_t t) -> const Matrix& { return data.xtx(t); }, S2);
    trace_recursion(th.trace, T, T, [&](std::size_t t) { return data.sq_norm(t); }, y);
}

/// Per-observation l_t = 0.5 (log|Sigma_t| + vec(X_t)' Sigma_t^{-1} vec(X_t)); infinite when infeasible.
inline std::vector<double> per_observation_unchecked(const PreparedPanel& data, const Theta& th) {
    std::vector<Matrix> S1, S2;
    std::vector<double> y;
    raw_states(data, th, S1, S2, y);
    std::vector<double> l(data.size(), kInfeasible);
    for (std::size_t t = 0; t < data.size(); ++t) {
        const ObsTerms o = obs_terms(S1[t], S2[t], y[t], data.x(t));
        if (o.ok) {
            l[t] = 0.5 * (o.logdet + o.quad);
        }
    }
    return l;
}

inline double nll_unchecked(const PreparedPanel& data, const Theta& th) {
    std::vector<Matrix> S1, S2;
    std::vector<double> y;
    raw_states(data, th, S1, S2, y);
    double acc = 0.0;
    for (std::size_t t = 0; t < data.size(); ++t) {
        const ObsTerms o = obs_terms(S1[t], S2[t], y[t], data.x(t));
        if (!o.ok) {
            return kInfeasible;
        }
        acc += o.logdet + o.quad;
    }
    return acc / (2.0 * static_cast<double>(data.size()));
}

}  // namespace detail

/// Feasible quasi negative log-likelihood (1/2T) sum_t {log|Sigma_t| + vec(X_t)' Sigma_t^{-1} vec(X_t)}.
///
/// Returns kInfeasible (+inf) when some filtered S1, S2 or y is not positive.
inline double neg_loglik(const Theta& th, const PreparedPanel& data) {
    validate(th);
    detail::check_dims(th, data.rows(), data.cols());
    return detail::nll_unchecked(data, th);
}

inline double neg_loglik(const Theta& th, const MatrixPanel& panel) { return neg_loglik(th, PreparedPanel(panel)); }

/// Per-observation contributions l_t (the objective is their mean).
inline std::vector<double> per_observation_nll(const Theta& th, const PreparedPanel& data) {
    validate(th);
    detail::check_dims(th, data.rows(), data.cols());
    return detail::per_observation_unchecked(data, th);
}

struct ValueAndGradient {
    double value = kInfeasible;
    Vector gradient;  ///< with respect to the natural parameter vector (to_natural layout)
};

/// Objective and its exact gradient in natural coordinates, by reverse accumulation through the
/// recursions. Does not validate theta beyond dimensions, so it can be evaluated slightly outside
/// the constrained set (finite-difference Hessians at boundary estimates need this).
inline ValueAndGradient value_and_gradient(const Theta& th, const PreparedPanel& data) {
    detail::check_dims(th, data.rows(), data.cols());
    const std::size_t T = data.size();
    const Eigen::Index m = th.m();
    const Eigen::Index n = th.n();
    const double md = static_cast<double>(m);
    const double nd = static_cast<double>(n);
    const double inv_T = 1.0 / static_cast<double>(T);

    std::vector<Matrix> S1, S2;
    std::vector<double> y;
    detail::raw_states(data, th, S1, S2, y);

    ValueAndGradient out;
    std::vector<Matrix> G1(T), G2(T);
    std::vector<double> gy(T);
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (!(y[t] > 0.0) || !std::isfinite(y[t])) {
            return out;
        }
        Eigen::LLT<Matrix> l1(S1[t]);
        Eigen::LLT<Matrix> l2(S2[t]);
        if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) {
            return out;
        }
        const Matrix& x = data.x(t);
        const double tr1 = S1[t].trace();
        const double tr2 = S2[t].trace();
        const Matrix S1inv = l1.solve(Matrix::Identity(m, m));
        const Matrix S2inv = l2.solve(Matrix::Identity(n, n));
        const Matrix K = S1inv * x * S2inv;  // S1^{-1} X S2^{-1}
        const double q = (x.transpose() * K).trace();
        const double c = tr1 * tr2 / y[t];
        const Matrix L1 = l1.matrixL();
        const Matrix L2 = l2.matrixL();
        const double ld1 = 2.0 * L1.diagonal().array().log().sum();
        const double ld2 = 2.0 * L2.diagonal().array().log().sum();
        const double logdet = md * nd * std::log(y[t]) + nd * ld1 - md * nd * std::log(tr1) + md * ld2 -
                              md * nd * std::log(tr2);
        const double lt = 0.5 * (logdet + c * q);
        if (!std::isfinite(lt)) {
            return out;
        }
        acc += lt;

        const double h = 0.5 * inv_T;
        gy[t] = h * (md * nd - c * q) / y[t];
        G1[t] = h * (nd * S1inv - c * K * x.transpose() * S1inv);
        G1[t].diagonal().array() += h * (-md * nd / tr1 + tr2 / y[t] * q);
        G2[t] = h * (md * S2inv - c * K.transpose() * x * S2inv);
        G2[t].diagonal().array() += h * (-md * nd / tr2 + tr1 / y[t] * q);
    }
    out.value = acc * inv_T;

    // Backward sweeps: state adjoints accumulate the effect of S_t on later states.
    auto backward_side = [&](const SideParams& sp, std::vector<Matrix>& G, const std::vector<Matrix>& S,
                             auto&& outer, SideParams& grad) {
        const Eigen::Index d = sp.dim;
        const bool diag = sp.structure == Structure::diagonal;
        for (std::size_t tt = T; tt-- > 0;) {
            for (std::size_t j = 0; j < sp.garch.size(); ++j) {
                const std::size_t later = tt + j + 1;
                if (later < T) {
                    if (diag) {
                        const auto gd = sp.garch[j].diagonal();
                        G[tt].noalias() += (gd * gd.transpose()).cwiseProduct(G[later]);
                    } else {
                        G[tt].noalias() += sp.garch[j].transpose() * G[later] * sp.garch[j];
                    }
                }
            }
        }
        Matrix gsum = Matrix::Zero(d, d);
        grad = SideParams::constant(d, sp.structure, {static_cast<int>(sp.arch.size()), static_cast<int>(sp.garch.size())});
        for (auto* group : {&grad.arch, &grad.garch}) {
            for (auto& a : *group) {
                a.setZero();
            }
        }
        for (std::size_t tt = 0; tt < T; ++tt) {
            gsum += G[tt];
            for (std::size_t j = 0; j < sp.arch.size(); ++j) {
                if (tt >= j + 1) {
                    const Matrix& p = outer(tt - j - 1);
                    if (diag) {
                        grad.arch[j].diagonal() += 2.0 * G[tt].cwiseProduct(p) * sp.arch[j].diagonal();
                    } else {
                        grad.arch[j].noalias() += 2.0 * G[tt] * sp.arch[j] * p;
                    }
                }
            }
            for (std::size_t j = 0; j < sp.garch.size(); ++j) {
                if (tt >= j + 1) {
                    const Matrix& p = S[tt - j - 1];
                    if (diag) {
                        grad.garch[j].diagonal() += 2.0 * G[tt].cwiseProduct(p) * sp.garch[j].diagonal();
                    } else {
                        grad.garch[j].noalias() += 2.0 * G[tt] * sp.garch[j] * p;
                    }
                }
            }
        }
        grad.A0 = 2.0 * gsum * sp.A0;
    };

    Theta grad;
    backward_side(th.row, G1, S1, [&](std::size_t t) -> const Matrix& { return data.xxt(t); }, grad.row);
    backward_side(th.col, G2, S2, [&](std::size_t t) -> const Matrix& { return data.xtx(t); }, grad.col);

    const auto& tp = th.trace;
    for (std::size_t tt = T; tt-- > 0;) {
        for (std::size_t j = 0; j < tp.beta.size(); ++j) {
            if (tt + j + 1 < T) {
                gy[tt] += tp.beta[j] * gy[tt + j + 1];
            }
        }
    }
    grad.trace.w = 0.0;
    grad.trace.alpha.assign(tp.alpha.size(), 0.0);
    grad.trace.beta.assign(tp.beta.size(), 0.0);
    for (std::size_t tt = 0; tt < T; ++tt) {
        grad.trace.w += gy[tt];
        for (std::size_t j = 0; j < tp.alpha.size(); ++j) {
            if (tt >= j + 1) {
                grad.trace.alpha[j] += gy[tt] * data.sq_norm(tt - j - 1);
            }
        }
        for (std::size_t j = 0; j < tp.beta.size(); ++j) {
            if (tt >= j + 1) {
                grad.trace.beta[j] += gy[tt] * y[tt - j - 1];
            }
        }
    }
    out.gradient = to_natural(grad);
    return out;
}

}  // namespace mgarch
