#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"
#include "mgarch/theta.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace mgarch {

/// Panel plus the per-time outer products X X' and X' X every recursion consumes.
class PreparedPanel {
public:
    explicit PreparedPanel(MatrixPanel panel) : panel_(std::move(panel)) {
        const std::size_t T = panel_.size();
        xxt_.reserve(T);
        xtx_.reserve(T);
        sq_.reserve(T);
        for (const auto& x : panel_) {
            xxt_.push_back(x * x.transpose());
            xtx_.push_back(x.transpose() * x);
            sq_.push_back(x.squaredNorm());
        }
    }

    [[nodiscard]] const MatrixPanel& panel() const noexcept { return panel_; }
    [[nodiscard]] std::size_t size() const noexcept { return panel_.size(); }
    [[nodiscard]] Eigen::Index rows() const noexcept { return panel_.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return panel_.cols(); }
    [[nodiscard]] const Matrix& x(std::size_t t) const { return panel_[t]; }
    [[nodiscard]] const Matrix& xxt(std::size_t t) const { return xxt_[t]; }
    [[nodiscard]] const Matrix& xtx(std::size_t t) const { return xtx_[t]; }
    [[nodiscard]] double sq_norm(std::size_t t) const { return sq_[t]; }

private:
    MatrixPanel panel_;
    std::vector<Matrix> xxt_;
    std::vector<Matrix> xtx_;
    std::vector<double> sq_;
};

/// Filtered quantities for t = 0..T-1 (0-based; entry t conditions on X_0..X_{t-1}).
struct StatePath {
    std::vector<Matrix> S1;
    std::vector<Matrix> S2;
    std::vector<double> y;
    std::vector<Matrix> U;
    std::vector<Matrix> V;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
};

struct FilterOptions {
    /// Also produce the one-step-ahead state T (conditioning on the whole panel).
    bool append_forecast = false;
};

namespace detail {

inline void check_dims(const Theta& th, Eigen::Index m, Eigen::Index n) {
    if (th.m() != m || th.n() != n) {
        throw invalid_input("theta dims (" + std::to_string(th.m()) + "x" + std::to_string(th.n()) +
                            ") do not match panel dims (" + std::to_string(m) + "x" + std::to_string(n) + ")");
    }
}

/// Adds A P A' to `out` honoring the side structure.
inline void add_sandwich(Matrix& out, const Matrix& a, const Matrix& p, Structure s) {
    if (s == Structure::diagonal) {
        const auto d = a.diagonal();
        out.noalias() += (d * d.transpose()).cwiseProduct(p);
    } else {
        out.noalias() += a * p * a.transpose();
    }
}

/// S_t = A0 A0' + sum_j A_j P_{t-j} A_j' + sum_j G_j S_{t-j} G_j' with zero pre-sample values.
///
/// `outer(t)` returns X_t X_t' (row side) or X_t' X_t (column side).
template <class Outer>
void side_recursion(const SideParams& sp, std::size_t T_out, std::size_t T_data, Outer&& outer,
                    std::vector<Matrix>& S) {
    const Matrix intercept = sp.A0 * sp.A0.transpose();
    S.assign(T_out, Matrix());
    for (std::size_t t = 0; t < T_out; ++t) {
        Matrix s = intercept;
        for (std::size_t j = 0; j < sp.arch.size(); ++j) {
            if (t >= j + 1 && t - j - 1 < T_data) {
                add_sandwich(s, sp.arch[j], outer(t - j - 1), sp.structure);
            }
        }
        for (std::size_t j = 0; j < sp.garch.size(); ++j) {
            if (t >= j + 1) {
                add_sandwich(s, sp.garch[j], S[t - j - 1], sp.structure);
            }
        }
        S[t] = std::move(s);
    }
}

template <class SqNorm>
void trace_recursion(const TraceParams& tp, std::size_t T_out, std::size_t T_data, SqNorm&& sq,
                     std::vector<double>& y) {
    y.assign(T_out, 0.0);
    for (std::size_t t = 0; t < T_out; ++t) {
        double v = tp.w;
        for (std::size_t j = 0; j < tp.alpha.size(); ++j) {
            if (t >= j + 1 && t - j - 1 < T_data) {
                v += tp.alpha[j] * sq(t - j - 1);
            }
        }
        for (std::size_t j = 0; j < tp.beta.size(); ++j) {
            if (t >= j + 1) {
                v += tp.beta[j] * y[t - j - 1];
            }
        }
        y[t] = v;
    }
}

inline void normalize_states(StatePath& path) {
    const std::size_t T = path.y.size();
    path.U.resize(T);
    path.V.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double tr1 = path.S1[t].trace();
        const double tr2 = path.S2[t].trace();
        if (!(tr1 > 0.0) || !(tr2 > 0.0) || !std::isfinite(tr1) || !std::isfinite(tr2)) {
            throw numerical_error("filter: trace of S1 or S2 is numerically zero at t = " + std::to_string(t));
        }
        path.U[t] = (path.y[t] / tr1) * path.S1[t];
        path.V[t] = path.S2[t] / tr2;
    }
}

}  // namespace detail

/// Runs the matrix GARCH recursions over a prepared panel.
///
/// Initial values are X_0 = 0, S_{1,0} = 0, S_{2,0} = 0, y_0 = 0, so the first state is
/// S_1 = A0 A0', S_2 = B0 B0', y = w. U_t = y_t S_{1,t} / tr(S_{1,t}) and V_t = S_{2,t} / tr(S_{2,t}).
inline StatePath filter(const PreparedPanel& data, const Theta& th, FilterOptions opt = {}) {
    validate(th);
    detail::check_dims(th, data.rows(), data.cols());
    const std::size_t T = data.size();
    const std::size_t T_out = T + (opt.append_forecast ? 1 : 0);
    StatePath path;
    detail::side_recursion(th.row, T_out, T, [&](std::size_t t) -> const Matrix& { return data.xxt(t); }, path.S1);
    detail::side_recursion(th.col, T_out, T, [&](std::size_t t) -> const Matrix& { return data.xtx(t); }, path.S2);
    detail::trace_recursion(th.trace, T_out, T, [&](std::size_t t) { return data.sq_norm(t); }, path.y);
    detail::normalize_states(path);
    return path;
}

inline StatePath filter(const MatrixPanel& panel, const Theta& th, FilterOptions opt = {}) {
    return filter(PreparedPanel(panel), th, opt);
}

/// One-step-ahead state after the last observation: (U_{T+1}, V_{T+1}, y_{T+1}).
struct ForecastState {
    Matrix U;
    Matrix V;
    double y = 0.0;
};

inline ForecastState predict_next(const PreparedPanel& data, const Theta& th) {
    StatePath p = filter(data, th, {.append_forecast = true});
    return {p.U.back(), p.V.back(), p.y.back()};
}

namespace detail {
inline void check_index(const StatePath& s, std::size_t t) {
    if (t >= s.size()) {
        throw invalid_input("state index " + std::to_string(t) + " out of range [0, " + std::to_string(s.size()) +
                            ")");
    }
}
}  // namespace detail

/// Conditional covariance of vec(X_t): V_t (x) U_t (mn x mn).
inline Matrix sigma(const StatePath& s, std::size_t t) {
    detail::check_index(s, t);
    return linalg::kron(s.V[t], s.U[t]);
}

/// E(X_t X_t' | F_{t-1}) = tr(V_t) U_t = U_t.
inline Matrix conditional_row_cov(const StatePath& s, std::size_t t) {
    detail::check_index(s, t);
    return s.V[t].trace() * s.U[t];
}

/// E(X_t' X_t | F_{t-1}) = tr(U_t) V_t = y_t V_t.
inline Matrix conditional_col_cov(const StatePath& s, std::size_t t) {
    detail::check_index(s, t);
    return s.U[t].trace() * s.V[t];
}

}  // namespace mgarch
