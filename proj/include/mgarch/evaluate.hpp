#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/estimate.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/optimizer.hpp"
#include "mgarch/panel.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mgarch {

// ---------------------------------------------------------------------------
// Losses

struct Losses {
    double mse = 0.0;  ///< mean over entries and test times
    double mae = 0.0;
    double qlike = std::numeric_limits<double>::quiet_NaN();
    double mse_sum = 0.0;  ///< sum over entries of the per-entry time means
    double mae_sum = 0.0;
    double qlike_sum = std::numeric_limits<double>::quiet_NaN();
    bool qlike_defined = false;
    std::vector<double> mse_series;  ///< per test time, mean over entries (input to the DM test)
    std::vector<double> mae_series;
    std::vector<double> qlike_series;
};

/// Losses of variance forecasts against squared realizations.
///
/// `forecast_var[t](i, j)` forecasts the variance of entry (i, j) at test time t and `realized[t]`
/// holds the returns, whose squares proxy the realized variance.
inline Losses entry_losses(const std::vector<Matrix>& forecast_var, const std::vector<Matrix>& realized) {
    if (forecast_var.size() != realized.size() || forecast_var.empty()) {
        throw invalid_input("entry_losses: forecast and realized series must be non-empty and aligned");
    }
    const Eigen::Index m = realized.front().rows();
    const Eigen::Index n = realized.front().cols();
    const std::size_t H = realized.size();
    const double cells = static_cast<double>(m * n);
    Losses out;
    out.qlike_defined = true;
    for (std::size_t t = 0; t < H; ++t) {
        if (forecast_var[t].rows() != m || forecast_var[t].cols() != n || realized[t].rows() != m ||
            realized[t].cols() != n) {
            throw invalid_input("entry_losses: dimension mismatch at test time " + std::to_string(t));
        }
        if ((forecast_var[t].array() <= 0.0).any() || !forecast_var[t].allFinite()) {
            out.qlike_defined = false;
        }
    }
    out.mse_series.resize(H);
    out.mae_series.resize(H);
    out.qlike_series.assign(H, std::numeric_limits<double>::quiet_NaN());
    double qsum = 0.0;
    for (std::size_t t = 0; t < H; ++t) {
        const auto r2 = realized[t].array().square();
        const auto f = forecast_var[t].array();
        out.mse_series[t] = (f - r2).square().sum() / cells;
        out.mae_series[t] = (f - r2).abs().sum() / cells;
        out.mse += out.mse_series[t];
        out.mae += out.mae_series[t];
        if (out.qlike_defined) {
            out.qlike_series[t] = (f.log() + r2 / f).sum() / cells;
            qsum += out.qlike_series[t];
        }
    }
    const double h = static_cast<double>(H);
    out.mse /= h;
    out.mae /= h;
    out.mse_sum = out.mse * cells;
    out.mae_sum = out.mae * cells;
    if (out.qlike_defined) {
        out.qlike = qsum / h;
        out.qlike_sum = out.qlike * cells;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Diebold-Mariano

struct DmResult {
    double stat = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;  ///< false when the loss differential is identically zero
};

/// DM statistic for d_t = loss_a,t - loss_b,t with a Bartlett long-run variance at lag floor(H^{1/3}).
/// Positive values mean model b has the smaller loss.
inline DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b) {
    if (loss_a.size() != loss_b.size()) {
        throw invalid_input("dm_test: loss series must be aligned");
    }
    const std::size_t H = loss_a.size();
    if (H < 10) {
        throw invalid_input("dm_test: need at least 10 test points (got " + std::to_string(H) + ")");
    }
    Vector d(static_cast<Eigen::Index>(H));
    for (std::size_t t = 0; t < H; ++t) {
        d(static_cast<Eigen::Index>(t)) = loss_a[t] - loss_b[t];
    }
    DmResult out;
    if (!d.allFinite()) {
        throw invalid_input("dm_test: non-finite loss differential");
    }
    if ((d.array() == 0.0).all()) {
        return out;
    }
    out.defined = true;
    const double h = static_cast<double>(H);
    const double mean = d.mean();
    const Vector e = d.array() - mean;
    const auto q = static_cast<Eigen::Index>(std::floor(std::cbrt(h)));
    double lrv = e.squaredNorm() / h;
    for (Eigen::Index j = 1; j <= q; ++j) {
        const double gamma = e.tail(e.size() - j).dot(e.head(e.size() - j)) / h;
        lrv += 2.0 * (1.0 - static_cast<double>(j) / static_cast<double>(q + 1)) * gamma;
    }
    if (!(lrv > 0.0)) {
        out.stat = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    } else {
        out.stat = mean / std::sqrt(lrv / h);
    }
    out.p_value = linalg::normal_two_sided_p(out.stat);
    return out;
}

/// "***", "**", "*" at the 1%, 5% and 10% levels.
inline std::string stars(double p) {
    if (!(p == p)) {
        return "";
    }
    if (p < 0.01) {
        return "***";
    }
    if (p < 0.05) {
        return "**";
    }
    if (p < 0.10) {
        return "*";
    }
    return "";
}

// ---------------------------------------------------------------------------
// Covariance forecasters

enum class Model {
    matrix_garch,
    univariate_garch,
    diag_bekk_vt_column,
    diag_bekk_vt_row,
    diag_bekk_vt_full,
    riskmetrics,
    equal_sample
};

inline const char* to_string(Model m) {
    switch (m) {
        case Model::matrix_garch: return "matrix_garch";
        case Model::univariate_garch: return "univariate_garch";
        case Model::diag_bekk_vt_column: return "diag_bekk_vt_column";
        case Model::diag_bekk_vt_row: return "diag_bekk_vt_row";
        case Model::diag_bekk_vt_full: return "diag_bekk_vt_full";
        case Model::riskmetrics: return "riskmetrics";
        case Model::equal_sample: return "equal_sample";
    }
    return "?";
}

inline Model model_from_string(const std::string& s) {
    for (Model m : {Model::matrix_garch, Model::univariate_garch, Model::diag_bekk_vt_column, Model::diag_bekk_vt_row,
                    Model::diag_bekk_vt_full, Model::riskmetrics, Model::equal_sample}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw invalid_input("unknown model '" + s + "'");
}

/// Diagonal BEKK with variance targeting for a vector series:
/// Sigma_t = Cbar + (a a') o (x_{t-1} x_{t-1}') + (b b') o Sigma_{t-1},  Cbar = (11' - aa' - bb') o S,
/// S the sample second moment of the estimation window, Sigma_0 = S.
class DiagBekkVT {
public:
    struct Options {
        int max_iter = 300;
        double tol = 1e-6;
        double rho_bar = 0.999;
    };

    DiagBekkVT() = default;
    explicit DiagBekkVT(Options opt) : opt_(opt) {}

    /// Fits (a, b) on rows of `x` (T x d). Returns the optimizer convergence flag.
    bool fit(const Matrix& x) {
        const Eigen::Index d = x.cols();
        if (x.rows() <= 2 * d) {
            throw data_error("diag BEKK: sample too short for the parameter count");
        }
        S_ = x.transpose() * x / static_cast<double>(x.rows());
        Vector z0(2 * d);
        z0.head(d).setConstant(std::sqrt(0.05));
        z0.tail(d).setConstant(std::sqrt(0.90));
        auto f = [&](const Vector& z) { return objective(x, z); };
        auto fg = [&](const Vector& z, Vector& g) {
            const double v = f(z);
            if (!std::isfinite(v)) {
                return v;
            }
            g.resize(z.size());
            Vector w = z;
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                const double h = 1e-6 * std::max(1.0, std::abs(z(i)));
                w(i) = z(i) + h;
                const double up = f(w);
                w(i) = z(i) - h;
                const double dn = f(w);
                w(i) = z(i);
                if (!std::isfinite(up) || !std::isfinite(dn)) {
                    return std::numeric_limits<double>::infinity();
                }
                g(i) = (up - dn) / (2.0 * h);
            }
            return v;
        };
        optim::Options oo;
        oo.max_iter = opt_.max_iter;
        oo.grad_tol = opt_.tol;
        const optim::Result r = optim::bfgs(fg, z0, oo);
        if (!std::isfinite(r.f)) {
            throw numerical_error("diag BEKK: optimizer failed (" + r.message + ")");
        }
        unpack(r.x, a_, b_);
        fitted_ = true;
        return r.converged;
    }

    /// Sigma_t for t = 0..T-1 of `x` (each conditioning on rows before t), with fixed parameters.
    [[nodiscard]] std::vector<Matrix> path(const Matrix& x) const {
        if (!fitted_) {
            throw invalid_input("diag BEKK: fit before forecasting");
        }
        return recursion(x, a_, b_);
    }

    [[nodiscard]] const Vector& a() const noexcept { return a_; }
    [[nodiscard]] const Vector& b() const noexcept { return b_; }
    [[nodiscard]] const Matrix& target() const noexcept { return S_; }

private:
    void unpack(const Vector& z, Vector& a, Vector& b) const {
        const Eigen::Index d = z.size() / 2;
        a = z.head(d);
        b = z.tail(d);
        TransformOptions t;
        t.rho_bar = opt_.rho_bar;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double r = a(i) * a(i) + b(i) * b(i);
            const double c = std::sqrt(detail::squash_ratio(r, t));
            a(i) *= c;
            b(i) *= c;
        }
    }

    [[nodiscard]] std::vector<Matrix> recursion(const Matrix& x, const Vector& a, const Vector& b) const {
        const Eigen::Index d = x.cols();
        const Matrix aa = a * a.transpose();
        const Matrix bb = b * b.transpose();
        const Matrix cbar = (Matrix::Ones(d, d) - aa - bb).cwiseProduct(S_);
        std::vector<Matrix> out(static_cast<std::size_t>(x.rows()));
        Matrix sigma = S_;
        for (Eigen::Index t = 0; t < x.rows(); ++t) {
            if (t > 0) {
                const Vector prev = x.row(t - 1).transpose();
                sigma = cbar + aa.cwiseProduct(prev * prev.transpose()) + bb.cwiseProduct(sigma);
            }
            out[static_cast<std::size_t>(t)] = sigma;
        }
        return out;
    }

    [[nodiscard]] double objective(const Matrix& x, const Vector& z) const {
        Vector a, b;
        unpack(z, a, b);
        const std::vector<Matrix> sig = recursion(x, a, b);
        double acc = 0.0;
        for (Eigen::Index t = 0; t < x.rows(); ++t) {
            Eigen::LLT<Matrix> llt(sig[static_cast<std::size_t>(t)]);
            if (llt.info() != Eigen::Success) {
                return std::numeric_limits<double>::infinity();
            }
            const Matrix L = llt.matrixL();
            const Vector w = L.triangularView<Eigen::Lower>().solve(x.row(t).transpose());
            acc += 2.0 * L.diagonal().array().log().sum() + w.squaredNorm();
        }
        return acc / (2.0 * static_cast<double>(x.rows()));
    }

    Options opt_{};
    Vector a_;
    Vector b_;
    Matrix S_;
    bool fitted_ = false;
};

struct ForecastOptions {
    FitOptions fit{};
    double lambda = 0.94;  ///< RiskMetrics decay
    Eigen::Index full_bekk_max_dim = 16;
};

/// Covariance forecasts of vec(X_t) (column-major vec, mn x mn) for the test times
/// t = n_train..T-1, each conditioning on X_0..X_{t-1} with parameters estimated on X_0..X_{n_train-1}.
struct CovForecasts {
    Model model = Model::matrix_garch;
    std::vector<Matrix> cov;
    std::vector<std::string> failures;  ///< per-block fit failures (the block falls back to equal_sample)
    bool converged = true;
};

/// Per-time m x n matrices of forecast entry variances (the diagonal of each covariance).
inline std::vector<Matrix> entry_variances(const CovForecasts& f, Eigen::Index m, Eigen::Index n) {
    std::vector<Matrix> out;
    out.reserve(f.cov.size());
    for (const auto& s : f.cov) {
        out.push_back(linalg::unvec(s.diagonal(), m, n));
    }
    return out;
}

namespace detail {

// rows = time, columns = the selected vec indices
inline Matrix gather(const MatrixPanel& panel, const std::vector<Eigen::Index>& idx, std::size_t first,
                     std::size_t count) {
    Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t t = 0; t < count; ++t) {
        const Matrix& x = panel[first + t];
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = x(idx[k] % x.rows(), idx[k] / x.rows());
        }
    }
    return out;
}

inline Matrix sample_second_moment(const MatrixPanel& panel, std::size_t count) {
    const Eigen::Index mn = panel.rows() * panel.cols();
    Matrix s = Matrix::Zero(mn, mn);
    for (std::size_t t = 0; t < count; ++t) {
        const Vector v = linalg::vec(panel[t]);
        s.noalias() += v * v.transpose();
    }
    return s / static_cast<double>(count);
}

inline std::vector<std::vector<Eigen::Index>> blocks_for(Model model, Eigen::Index m, Eigen::Index n) {
    std::vector<std::vector<Eigen::Index>> blocks;
    switch (model) {
        case Model::univariate_garch:
            for (Eigen::Index k = 0; k < m * n; ++k) {
                blocks.push_back({k});
            }
            break;
        case Model::diag_bekk_vt_column:
            for (Eigen::Index j = 0; j < n; ++j) {
                std::vector<Eigen::Index> b;
                for (Eigen::Index i = 0; i < m; ++i) {
                    b.push_back(j * m + i);
                }
                blocks.push_back(b);
            }
            break;
        case Model::diag_bekk_vt_row:
            for (Eigen::Index i = 0; i < m; ++i) {
                std::vector<Eigen::Index> b;
                for (Eigen::Index j = 0; j < n; ++j) {
                    b.push_back(j * m + i);
                }
                blocks.push_back(b);
            }
            break;
        default: {
            std::vector<Eigen::Index> all(static_cast<std::size_t>(m * n));
            for (Eigen::Index k = 0; k < m * n; ++k) {
                all[static_cast<std::size_t>(k)] = k;
            }
            blocks.push_back(all);
        }
    }
    return blocks;
}

}  // namespace detail

inline CovForecasts baseline_forecasts(const MatrixPanel& panel, Model model, std::size_t n_train,
                                       const ForecastOptions& opt = {}) {
    const std::size_t T = panel.size();
    if (n_train < 2 || n_train >= T) {
        throw invalid_input("baseline_forecasts: need 2 <= n_train < T");
    }
    const Eigen::Index m = panel.rows();
    const Eigen::Index n = panel.cols();
    const Eigen::Index mn = m * n;
    const std::size_t H = T - n_train;
    CovForecasts out;
    out.model = model;
    const Matrix sample = detail::sample_second_moment(panel, n_train);
    out.cov.assign(H, Matrix::Zero(mn, mn));

    switch (model) {
        case Model::equal_sample:
            out.cov.assign(H, sample);
            return out;
        case Model::riskmetrics: {
            if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0)) {
                throw invalid_input("riskmetrics: lambda must lie in [0, 1]");
            }
            Matrix s = sample;
            for (std::size_t t = 1; t < T; ++t) {
                const Vector v = linalg::vec(panel[t - 1]);
                s = (1.0 - opt.lambda) * (v * v.transpose()) + opt.lambda * s;
                if (t >= n_train) {
                    out.cov[t - n_train] = s;
                }
            }
            return out;
        }
        case Model::matrix_garch: {
            const PreparedPanel train(panel.slice(0, n_train));
            FitResult fr = fit(train, opt.fit);
            out.converged = fr.converged;
            const StatePath path = filter(PreparedPanel(panel), fr.theta_hat);
            for (std::size_t t = n_train; t < T; ++t) {
                out.cov[t - n_train] = linalg::kron(path.V[t], path.U[t]);
            }
            return out;
        }
        case Model::diag_bekk_vt_full:
            if (mn > opt.full_bekk_max_dim) {
                throw invalid_input("diag_bekk_vt_full: mn = " + std::to_string(mn) + " exceeds the limit of " +
                                    std::to_string(opt.full_bekk_max_dim));
            }
            break;
        default:
            break;
    }

    // block models: univariate GARCH per entry, or diagonal VT-BEKK per column / row / whole vector
    for (const auto& block : detail::blocks_for(model, m, n)) {
        const auto bd = static_cast<Eigen::Index>(block.size());
        std::vector<Matrix> path;
        try {
            if (model == Model::univariate_garch) {
                const MatrixPanel series = panel.entry(block[0] % m, block[0] / m);
                FitOptions fo = opt.fit;
                fo.start.reset();
                FitResult fr = fit(PreparedPanel(series.slice(0, n_train)), fo);
                out.converged = out.converged && fr.converged;
                const StatePath sp = filter(PreparedPanel(series), fr.theta_hat);
                for (std::size_t t = 0; t < T; ++t) {
                    path.push_back(sp.U[t]);
                }
            } else {
                DiagBekkVT bekk;
                out.converged = bekk.fit(detail::gather(panel, block, 0, n_train)) && out.converged;
                path = bekk.path(detail::gather(panel, block, 0, T));
            }
        } catch (const std::exception& e) {
            out.failures.push_back(std::string(to_string(model)) + " block starting at vec index " +
                                   std::to_string(block[0]) + ": " + e.what());
            path.assign(T, Matrix());
            for (auto& s : path) {
                s.resize(bd, bd);
                for (Eigen::Index r = 0; r < bd; ++r) {
                    for (Eigen::Index c = 0; c < bd; ++c) {
                        s(r, c) = sample(block[static_cast<std::size_t>(r)], block[static_cast<std::size_t>(c)]);
                    }
                }
            }
        }
        for (std::size_t t = n_train; t < T; ++t) {
            for (Eigen::Index r = 0; r < bd; ++r) {
                for (Eigen::Index c = 0; c < bd; ++c) {
                    out.cov[t - n_train](block[static_cast<std::size_t>(r)], block[static_cast<std::size_t>(c)]) =
                        path[t](r, c);
                }
            }
        }
    }
    return out;
}

}  // namespace mgarch
