#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/factor.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mgarch {

namespace detail {

inline void check_cov(const Matrix& sigma, const char* who) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
        throw invalid_input(std::string(who) + ": covariance must be square and non-empty");
    }
    if (!sigma.allFinite()) {
        throw invalid_input(std::string(who) + ": covariance has non-finite entries");
    }
    if (linalg::relative_asymmetry(sigma) > 1e-8) {
        throw invalid_input(std::string(who) + ": covariance is not symmetric");
    }
}

/// Euclidean projection onto {w >= 0, sum w = 1}.
inline Vector project_simplex(const Vector& v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) {
            theta = t;
        }
    }
    return (v.array() - theta).cwiseMax(0.0);
}

}  // namespace detail

/// w = Sigma^{-1} 1 / (1' Sigma^{-1} 1).
inline Vector mvp_unconstrained(const Matrix& sigma) {
    detail::check_cov(sigma, "mvp_unconstrained");
    const Eigen::LDLT<Matrix> ldlt(linalg::symmetrize(sigma));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        linalg::inverse_condition_symmetric(sigma) < 1e-15) {
        throw numerical_error("mvp_unconstrained: covariance is singular");
    }
    const Vector x = ldlt.solve(Vector::Ones(sigma.rows()));
    const double s = x.sum();
    if (!(std::abs(s) > 0.0) || !x.allFinite()) {
        throw numerical_error("mvp_unconstrained: 1' Sigma^{-1} 1 vanishes");
    }
    Vector w = x / s;
    w /= w.sum();
    return w;
}

/// Scale-free KKT residual of min w'Sigma w s.t. 1'w = 1, w >= 0 at w, with mu = 2 w'Sigma w and
/// lambda = max(2 Sigma w - mu, 0).
inline double kkt_residual(const Matrix& sigma, const Vector& w) {
    const Vector g = 2.0 * sigma * w;
    const double mu = w.dot(g);
    const double scale = std::max({std::abs(mu), g.cwiseAbs().maxCoeff(), 1e-300});
    const Vector lambda = (g.array() - mu).cwiseMax(0.0);
    const double stationarity = (g.array() - mu - lambda.array()).abs().maxCoeff();
    const double complementarity = (lambda.array() * w.array()).abs().maxCoeff();
    const double primal = std::max(std::abs(w.sum() - 1.0), std::max(0.0, -w.minCoeff()));
    return std::max({stationarity / scale, complementarity / scale, primal});
}

struct ConstrainedOptions {
    int max_iter = 200000;
    double tol = 1e-9;
    int polish_every = 25;
};

/// Long-only minimum-variance weights by projected gradient on the simplex (Armijo steps), with
/// an exact equality-constrained solve on the detected support as the finishing step.
inline Vector mvp_constrained(const Matrix& sigma, const ConstrainedOptions& opt = {}) {
    detail::check_cov(sigma, "mvp_constrained");
    const Eigen::Index d = sigma.rows();
    const Matrix S = linalg::symmetrize(sigma);
    {
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success) {
            throw numerical_error("mvp_constrained: covariance is not positive definite");
        }
    }
    auto support_solve = [&](const Vector& w, Vector& out) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (w(i) > 1e-12) {
                idx.push_back(i);
            }
        }
        if (idx.empty()) {
            return false;
        }
        const auto k = static_cast<Eigen::Index>(idx.size());
        Matrix sub(k, k);
        for (Eigen::Index a = 0; a < k; ++a) {
            for (Eigen::Index b = 0; b < k; ++b) {
                sub(a, b) = S(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            }
        }
        const Vector x = sub.ldlt().solve(Vector::Ones(k));
        const Vector ws = x / x.sum();
        if (!ws.allFinite() || ws.minCoeff() < 0.0) {
            return false;
        }
        out = Vector::Zero(d);
        for (Eigen::Index a = 0; a < k; ++a) {
            out(idx[static_cast<std::size_t>(a)]) = ws(a);
        }
        out /= out.sum();
        return true;
    };

    Vector w = Vector::Constant(d, 1.0 / static_cast<double>(d));
    const Vector w_un = S.ldlt().solve(Vector::Ones(d));
    if (w_un.allFinite() && w_un.sum() > 0.0 && (w_un / w_un.sum()).minCoeff() >= 0.0) {
        w = w_un / w_un.sum();
        w /= w.sum();
        return w;
    }
    const double lmax = linalg::eigenvalues_descending(S)(0);
    double step = 1.0 / (2.0 * lmax);
    auto f = [&](const Vector& v) { return v.dot(S * v); };
    double fw = f(w);
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Vector g = 2.0 * S * w;
        double t = std::min(step * 4.0, 1e6 / lmax);
        Vector next;
        double fn = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            next = detail::project_simplex(w - t * g);
            fn = f(next);
            if (fn <= fw + g.dot(next - w) + (next - w).squaredNorm() / (2.0 * t)) {
                break;
            }
            t *= 0.5;
        }
        step = t;
        const double move = (next - w).lpNorm<Eigen::Infinity>();
        w = next;
        fw = fn;
        if (it % opt.polish_every == 0 || move < 1e-15) {
            Vector polished;
            if (support_solve(w, polished) && kkt_residual(S, polished) < opt.tol) {
                return polished;
            }
            if (kkt_residual(S, w) < opt.tol) {
                return w;
            }
        }
    }
    if (kkt_residual(S, w) < 1e-6) {
        return w;
    }
    throw numerical_error("mvp_constrained: no KKT point within the iteration cap");
}

// ---------------------------------------------------------------------------
// Rolling backtests

enum class Engine { mf_garch, riskmetrics, equal_weights, sample };

inline const char* to_string(Engine e) {
    switch (e) {
        case Engine::mf_garch: return "mf_garch";
        case Engine::riskmetrics: return "riskmetrics";
        case Engine::equal_weights: return "equal_weights";
        case Engine::sample: return "sample";
    }
    return "?";
}

inline Engine engine_from_string(const std::string& s) {
    for (Engine e : {Engine::mf_garch, Engine::riskmetrics, Engine::equal_weights, Engine::sample}) {
        if (s == to_string(e)) {
            return e;
        }
    }
    throw invalid_input("unknown engine '" + s + "' (expected mf_garch|riskmetrics|equal_weights|sample)");
}

struct BacktestOptions {
    Engine engine = Engine::mf_garch;
    std::size_t T_train = 0;
    std::size_t T_test = 0;
    bool constrained = false;
    double periods_per_year = 252.0;
    int refit_every = 1;
    double lambda = 0.94;
    FactorOptions factor{};
};

struct BacktestResult {
    std::vector<Vector> weights;
    std::vector<double> returns;
    std::vector<double> cumulative;  ///< prod(1 + r/100) - 1 up to each test time
    std::vector<bool> flagged;       ///< engine failed; previous weights carried
    std::vector<std::string> messages;
    double AV = 0.0;
    double SD = 0.0;
    double IR = 0.0;
    bool constrained = false;
};

struct PerformanceSummary {
    double AV = 0.0;
    double SD = 0.0;
    double IR = 0.0;
};

/// AV = mean * ppy, SD = sqrt(sum (r - mean)^2 / (H - 1)) * sqrt(ppy), IR = AV / SD.
inline PerformanceSummary summarize_returns(const std::vector<double>& r, double periods_per_year) {
    if (r.size() < 2) {
        throw invalid_input("summarize_returns: need at least two returns");
    }
    const double h = static_cast<double>(r.size());
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / h;
    double ss = 0.0;
    for (double x : r) {
        ss += (x - mean) * (x - mean);
    }
    PerformanceSummary s;
    s.AV = mean * periods_per_year;
    s.SD = std::sqrt(ss / (h - 1.0)) * std::sqrt(periods_per_year);
    s.IR = s.SD > 0.0 ? s.AV / s.SD : 0.0;
    return s;
}

/// prod_{s <= t} (1 + r_s / 100) - 1 for percentage returns.
inline std::vector<double> cumulative_returns(const std::vector<double>& r) {
    std::vector<double> out(r.size());
    double level = 1.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        level *= 1.0 + r[t] / 100.0;
        out[t] = level - 1.0;
    }
    return out;
}

namespace detail {

inline Matrix window_covariance(const MatrixPanel& w) {
    const Eigen::Index mn = w.rows() * w.cols();
    const Vector mu = linalg::vec(w.mean());
    Matrix s = Matrix::Zero(mn, mn);
    for (const auto& x : w) {
        const Vector v = linalg::vec(x) - mu;
        s.noalias() += v * v.transpose();
    }
    return s / static_cast<double>(w.size());
}

}  // namespace detail

/// Rolling one-step-ahead minimum-variance backtest over the last T_test observations, each
/// forecast built from the preceding T_train observations.
inline BacktestResult rolling_backtest(const MatrixPanel& panel, const BacktestOptions& opt) {
    const std::size_t T = panel.size();
    if (opt.T_train < 2 || opt.T_test < 2 || opt.T_train + opt.T_test > T) {
        throw invalid_input("rolling_backtest: need T_train >= 2, T_test >= 2 and T_train + T_test <= T");
    }
    if (opt.refit_every < 1 || !(opt.periods_per_year > 0.0)) {
        throw invalid_input("rolling_backtest: refit_every and periods_per_year must be positive");
    }
    const Eigen::Index mn = panel.rows() * panel.cols();
    BacktestResult out;
    out.constrained = opt.constrained;
    const Vector equal = Vector::Constant(mn, 1.0 / static_cast<double>(mn));
    Vector prev = equal;

    std::optional<FactorFit> last;
    std::size_t since_refit = 0;
    const std::size_t start = T - opt.T_test;
    for (std::size_t t0 = start; t0 < T; ++t0) {
        const MatrixPanel window = panel.slice(t0 - opt.T_train, opt.T_train);
        Vector w = prev;
        bool failed = false;
        try {
            if (opt.engine == Engine::equal_weights) {
                w = equal;
            } else {
                Matrix cov;
                if (opt.engine == Engine::sample) {
                    cov = detail::window_covariance(window);
                } else if (opt.engine == Engine::riskmetrics) {
                    cov = detail::window_covariance(window);
                    const Vector mu = linalg::vec(window.mean());
                    for (const auto& x : window) {
                        const Vector v = linalg::vec(x) - mu;
                        cov = (1.0 - opt.lambda) * (v * v.transpose()) + opt.lambda * cov;
                    }
                } else {
                    const MatrixPanel centered = window.demeaned();
                    if (!last || since_refit >= static_cast<std::size_t>(opt.refit_every)) {
                        FactorOptions fopt = opt.factor;
                        if (last) {
                            fopt.k1 = last->k1;
                            fopt.k2 = last->k2;
                            fopt.garch.start = last->garch.theta_hat;
                            fopt.garch.multistarts = 1;
                        }
                        last = factor_fit(centered, fopt);
                        since_refit = 0;
                        cov = sigma_x_forecast(*last, opt.T_train);
                    } else {
                        const MatrixPanel f = extract_factors(centered, last->R_load, last->C_load);
                        const StatePath s = filter(PreparedPanel(f), last->garch.theta_hat, {.append_forecast = true});
                        cov = sigma_x(last->R_load, last->C_load, s.U.back(), s.V.back(), last->sigma_e);
                    }
                    ++since_refit;
                }
                w = opt.constrained ? mvp_constrained(cov) : mvp_unconstrained(cov);
            }
        } catch (const std::exception& e) {
            failed = true;
            out.messages.push_back("t = " + std::to_string(t0) + ": " + e.what());
            w = prev;
        }
        out.weights.push_back(w);
        out.flagged.push_back(failed);
        out.returns.push_back(w.dot(linalg::vec(panel[t0])));
        prev = w;
    }
    const PerformanceSummary s = summarize_returns(out.returns, opt.periods_per_year);
    out.AV = s.AV;
    out.SD = s.SD;
    out.IR = s.IR;
    out.cumulative = cumulative_returns(out.returns);
    return out;
}

}  // namespace mgarch
