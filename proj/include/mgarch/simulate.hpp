#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"
#include "mgarch/theta.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mgarch {

using Rng = std::mt19937_64;

/// Independent generator for replication `stream` of a study seeded with `seed`; `tag` separates
/// sub-streams of one replication.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint32_t tag = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffu), static_cast<std::uint32_t>(stream >> 32),
                      0x6d676172u, tag};
    return Rng(seq);
}

enum class InnovationKind { matrix_normal, standardized_matrix_t };

/// Law of Z_t: zero mean, E[vec(Z) vec(Z)'] = I_mn.
struct InnovationLaw {
    InnovationKind kind = InnovationKind::matrix_normal;
    double dof = 0.0;  ///< matrix-t only
    Eigen::Index m = 1;
    Eigen::Index n = 1;

    static InnovationLaw normal(Eigen::Index m, Eigen::Index n) {
        return {InnovationKind::matrix_normal, 0.0, m, n};
    }
    static InnovationLaw student(Eigen::Index m, Eigen::Index n, double nu) {
        return {InnovationKind::standardized_matrix_t, nu, m, n};
    }
};

inline void check_law(const InnovationLaw& law) {
    if (law.m <= 0 || law.n <= 0) {
        throw invalid_input("innovation law: dims must be positive");
    }
    if (law.kind == InnovationKind::standardized_matrix_t && !(law.dof > 2.0)) {
        throw invalid_input("innovation law: matrix-t needs dof > 2 for a finite variance");
    }
}

/// One draw of Z_t.
///
/// The standardized matrix t is W / sqrt(s) * sqrt((nu - 2) / nu) with W ~ MN(0, I_m, I_n) and
/// s ~ chi2(nu) / nu independent, so every entry has unit variance and entries are uncorrelated.
/// The mixing variable s is drawn from `scale_rng`, so normal and matrix-t panels built from the
/// same seed share W.
inline Matrix draw_innovation(const InnovationLaw& law, Rng& rng, Rng& scale_rng) {
    check_law(law);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(law.m, law.n);
    for (Eigen::Index j = 0; j < law.n; ++j) {
        for (Eigen::Index i = 0; i < law.m; ++i) {
            z(i, j) = normal(rng);
        }
    }
    if (law.kind == InnovationKind::standardized_matrix_t) {
        std::chi_squared_distribution<double> chi(law.dof);
        const double s = chi(scale_rng) / law.dof;
        z *= std::sqrt((law.dof - 2.0) / law.dof / s);
    }
    return z;
}

inline Matrix draw_innovation(const InnovationLaw& law, Rng& rng) { return draw_innovation(law, rng, rng); }

struct SimulateOptions {
    std::size_t burn_in = 500;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    /// Receives a message when theta is outside the stationary region; simulation still runs.
    std::function<void(const std::string&)> on_warning;
};

/// Generates T observations X_t = U_t^{1/2} Z_t V_t^{1/2} (symmetric roots) along the recursion,
/// discarding the first `burn_in` draws. Deterministic given (seed, stream).
inline MatrixPanel simulate(const Theta& th, std::size_t T, const InnovationLaw& law, const SimulateOptions& opt = {}) {
    validate(th);
    check_law(law);
    if (law.m != th.m() || law.n != th.n()) {
        throw invalid_input("simulate: innovation dims do not match theta");
    }
    if (T == 0) {
        throw invalid_input("simulate: T must be positive");
    }
    if (!is_stationary(th, 1.0) && opt.on_warning) {
        opt.on_warning("simulate: theta violates the stationarity conditions; the panel may explode");
    }
    Rng rng = make_rng(opt.seed, opt.stream);
    Rng scale_rng = make_rng(opt.seed, opt.stream, 1);
    const Eigen::Index m = th.m();
    const Eigen::Index n = th.n();
    const std::size_t total = T + opt.burn_in;
    const auto lags = static_cast<std::size_t>(th.order().max_lag());

    // rolling histories, most recent first
    std::vector<Matrix> S1_hist(lags, Matrix::Zero(m, m));
    std::vector<Matrix> S2_hist(lags, Matrix::Zero(n, n));
    std::vector<Matrix> P_hist(lags, Matrix::Zero(m, m));
    std::vector<Matrix> Q_hist(lags, Matrix::Zero(n, n));
    std::vector<double> y_hist(lags, 0.0);
    std::vector<double> sq_hist(lags, 0.0);
    const Matrix C1 = th.row.A0 * th.row.A0.transpose();
    const Matrix C2 = th.col.A0 * th.col.A0.transpose();

    MatrixPanel out = MatrixPanel::with_dims(m, n);
    for (std::size_t t = 0; t < total; ++t) {
        Matrix S1 = C1;
        Matrix S2 = C2;
        double y = th.trace.w;
        for (std::size_t j = 0; j < th.row.arch.size(); ++j) {
            detail::add_sandwich(S1, th.row.arch[j], P_hist[j], th.row.structure);
            detail::add_sandwich(S2, th.col.arch[j], Q_hist[j], th.col.structure);
            y += th.trace.alpha[j] * sq_hist[j];
        }
        for (std::size_t j = 0; j < th.row.garch.size(); ++j) {
            detail::add_sandwich(S1, th.row.garch[j], S1_hist[j], th.row.structure);
            detail::add_sandwich(S2, th.col.garch[j], S2_hist[j], th.col.structure);
            y += th.trace.beta[j] * y_hist[j];
        }
        const Matrix U = (y / S1.trace()) * S1;
        const Matrix V = S2 / S2.trace();
        const Matrix x = linalg::sqrt_psd(linalg::symmetrize(U)) * draw_innovation(law, rng, scale_rng) *
                         linalg::sqrt_psd(linalg::symmetrize(V));
        if (!x.allFinite()) {
            throw numerical_error("simulate: path diverged at step " + std::to_string(t));
        }
        for (std::size_t j = lags; j-- > 1;) {
            S1_hist[j] = S1_hist[j - 1];
            S2_hist[j] = S2_hist[j - 1];
            P_hist[j] = P_hist[j - 1];
            Q_hist[j] = Q_hist[j - 1];
            y_hist[j] = y_hist[j - 1];
            sq_hist[j] = sq_hist[j - 1];
        }
        if (lags > 0) {
            S1_hist[0] = S1;
            S2_hist[0] = S2;
            P_hist[0] = x * x.transpose();
            Q_hist[0] = x.transpose() * x;
            y_hist[0] = y;
            sq_hist[0] = x.squaredNorm();
        }
        if (t >= opt.burn_in) {
            out.push_back(x);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Designs used by the Monte Carlo studies.

namespace designs {

inline Matrix lower_intercept_3x3() {
    Matrix a0(3, 3);
    a0 << 1.0, 0.0, 0.0,  //
        0.4, 0.4, 0.0,    //
        0.4, 0.4, 0.4;
    return a0;
}

/// 3 x 3 estimation design: w = 0.4, alpha = 0.3, beta = 0.6, A1 = B1 = 0.3 I, A2 = B2 = 0.6 I.
inline Theta estimation_design() {
    Theta th;
    th.trace = {0.4, {0.3}, {0.6}};
    for (auto* side : {&th.row, &th.col}) {
        *side = SideParams::constant(3, Structure::diagonal, {1, 1});
        side->A0 = lower_intercept_3x3();
        side->arch[0] = 0.3 * Matrix::Identity(3, 3);
        side->garch[0] = 0.6 * Matrix::Identity(3, 3);
    }
    return th;
}

/// Factor dynamics for the factor-model studies: the estimation design with identity intercepts, so
/// the k1 x k2 factors are uncorrelated with comparable scale.
inline Theta factor_design(Eigen::Index k1 = 3, Eigen::Index k2 = 3) {
    Theta th;
    th.trace = {0.4, {0.3}, {0.6}};
    th.row = SideParams::constant(k1, Structure::diagonal, {1, 1});
    th.col = SideParams::constant(k2, Structure::diagonal, {1, 1});
    for (auto* side : {&th.row, &th.col}) {
        side->arch[0] = 0.3 * Matrix::Identity(side->dim, side->dim);
        side->garch[0] = 0.6 * Matrix::Identity(side->dim, side->dim);
    }
    return th;
}

enum class PowerCase { arch = 1, garch = 2 };

/// Order-(2,2) design of the portmanteau study. Case 1 puts 0.038 d on the second ARCH lag,
/// case 2 on the second GARCH lag; d = 0 is the order-(1,1) null model.
inline Theta power_design(PowerCase which, int d) {
    const double delta = 0.038 * static_cast<double>(d);
    const double d1 = which == PowerCase::arch ? delta : 0.0;
    const double d2 = which == PowerCase::garch ? delta : 0.0;
    Theta th;
    th.trace = {0.4, {0.3, d1}, {0.3, d2}};
    for (auto* side : {&th.row, &th.col}) {
        *side = SideParams::constant(3, Structure::diagonal, {2, 2});
        side->A0 = lower_intercept_3x3();
        side->arch[0] = 0.3 * Matrix::Identity(3, 3);
        side->garch[0] = 0.3 * Matrix::Identity(3, 3);
        side->arch[1] = d1 * Matrix::Identity(3, 3);
        side->garch[1] = d2 * Matrix::Identity(3, 3);
    }
    return th;
}

/// The null model of the power design written at order (1,1).
inline Theta power_null_design() {
    Theta th;
    th.trace = {0.4, {0.3}, {0.3}};
    for (auto* side : {&th.row, &th.col}) {
        *side = SideParams::constant(3, Structure::diagonal, {1, 1});
        side->A0 = lower_intercept_3x3();
        side->arch[0] = 0.3 * Matrix::Identity(3, 3);
        side->garch[0] = 0.3 * Matrix::Identity(3, 3);
    }
    return th;
}

}  // namespace designs
}  // namespace mgarch
