#pragma once

#include "mgarch/diagnose.hpp"
#include "mgarch/errors.hpp"
#include "mgarch/estimate.hpp"
#include "mgarch/evaluate.hpp"
#include "mgarch/factor.hpp"
#include "mgarch/portfolio.hpp"
#include "mgarch/simulate.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace mgarch::study {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must be written by index,
/// so the output does not depend on scheduling. The first exception is rethrown after joining.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

inline FitOptions single_start() {
    FitOptions f;
    f.multistarts = 1;
    return f;
}

// ---------------------------------------------------------------------------
// Estimation accuracy (bias / SE / AE tables)

struct EstimationStudyOptions {
    Theta truth = designs::estimation_design();
    InnovationLaw law = InnovationLaw::normal(3, 3);
    std::size_t T = 2000;
    std::size_t reps = 200;
    std::uint64_t seed = 1;
    std::size_t burn_in = 0;
    unsigned threads = 1;
    FitOptions fit = single_start();
};

struct EstimationStudy {
    std::vector<std::string> names;
    Vector truth;
    Vector bias;
    Vector se;        ///< root mean squared error about the true value
    Vector sd;        ///< standard deviation of the estimates
    Vector ae;        ///< mean of the sandwich standard errors
    Vector coverage;  ///< share of nominal 95% intervals covering the truth
    std::vector<bool> active;
    std::size_t used = 0;
    std::size_t failed = 0;
    std::vector<std::string> failures;
    std::vector<Vector> estimates;  ///< per replication; empty when the replication failed
};

inline EstimationStudy estimation_study(const EstimationStudyOptions& opt) {
    if (opt.reps == 0 || opt.T == 0) {
        throw invalid_input("estimation_study: reps and T must be positive");
    }
    validate(opt.truth);
    const ThetaShape shape = ThetaShape::of(opt.truth);
    FitOptions fo = opt.fit;
    fo.structure = shape.structure;
    fo.order = shape.order;
    fo.compute_sandwich = true;

    std::vector<Vector> est(opt.reps);
    std::vector<Vector> ses(opt.reps);
    std::vector<std::string> err(opt.reps);
    parallel_for(opt.reps, opt.threads, [&](std::size_t r) {
        try {
            SimulateOptions so;
            so.seed = opt.seed;
            so.stream = r;
            so.burn_in = opt.burn_in;
            const MatrixPanel x = simulate(opt.truth, opt.T, opt.law, so);
            FitOptions f = fo;
            f.seed = opt.seed ^ (0x9e3779b97f4a7c15ULL * (r + 1));
            const FitResult res = fit(x, f);
            if (!res.has_sandwich) {
                err[r] = "replication " + std::to_string(r) + ": " + res.sandwich_error;
                return;
            }
            est[r] = to_natural(res.theta_hat);
            ses[r] = res.std_errors;
        } catch (const std::exception& e) {
            err[r] = "replication " + std::to_string(r) + ": " + e.what();
        }
    });

    EstimationStudy out;
    out.names = param_names(shape);
    out.truth = to_natural(opt.truth);
    out.active = active_mask(shape);
    const Eigen::Index p = out.truth.size();
    Vector sum = Vector::Zero(p);
    Vector sum2 = Vector::Zero(p);
    Vector ae = Vector::Zero(p);
    Vector cover = Vector::Zero(p);
    for (std::size_t r = 0; r < opt.reps; ++r) {
        if (est[r].size() == 0) {
            ++out.failed;
            out.failures.push_back(err[r]);
            continue;
        }
        ++out.used;
        const Vector d = est[r] - out.truth;
        sum += d;
        sum2 += d.cwiseProduct(d);
        ae += ses[r];
        for (Eigen::Index i = 0; i < p; ++i) {
            cover(i) += std::abs(d(i)) <= 1.959963984540054 * ses[r](i) ? 1.0 : 0.0;
        }
    }
    out.estimates = std::move(est);
    if (out.used == 0) {
        throw numerical_error("estimation_study: every replication failed; first error: " + out.failures.front());
    }
    const double k = static_cast<double>(out.used);
    out.bias = sum / k;
    out.se = (sum2 / k).cwiseSqrt();
    out.sd = (sum2 / k - out.bias.cwiseProduct(out.bias)).cwiseMax(0.0).cwiseSqrt() *
             (out.used > 1 ? std::sqrt(k / (k - 1.0)) : 1.0);
    out.ae = ae / k;
    out.coverage = cover / k;
    return out;
}

// ---------------------------------------------------------------------------
// Portmanteau size and power

struct PowerStudyOptions {
    designs::PowerCase which = designs::PowerCase::arch;
    std::vector<int> d_values{0, 2, 4, 6, 8, 10};
    std::vector<int> lags{2, 4, 6, 8};
    std::size_t T = 2000;
    std::size_t reps = 200;
    std::uint64_t seed = 1;
    std::size_t burn_in = 0;
    double alpha = 0.05;
    unsigned threads = 1;
    DiagnoseOptions diagnose{};
    FitOptions fit = single_start();
};

struct PowerPoint {
    int d = 0;
    int L = 0;
    double rejection = 0.0;
    double mean_Q = 0.0;
    std::size_t used = 0;
    std::size_t failed = 0;
};

struct PowerStudy {
    std::vector<PowerPoint> points;  ///< d-major, then lag
    std::vector<std::string> failures;

    [[nodiscard]] const PowerPoint& at(int d, int L) const {
        for (const auto& p : points) {
            if (p.d == d && p.L == L) {
                return p;
            }
        }
        throw invalid_input("PowerStudy: no point for d = " + std::to_string(d) + ", L = " + std::to_string(L));
    }
};

/// Simulates the order-(2,2) design at each d, fits the order-(1,1) model and tests with Q_T(L).
/// Replication r at strength d uses stream (d << 32) | r.
inline PowerStudy power_study(const PowerStudyOptions& opt) {
    if (opt.reps == 0 || opt.lags.empty() || opt.d_values.empty()) {
        throw invalid_input("power_study: reps, lags and d values must be non-empty");
    }
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
        throw invalid_input("power_study: alpha must lie in (0, 1)");
    }
    for (int L : opt.lags) {
        if (L < 1 || static_cast<std::size_t>(L) >= opt.T) {
            throw invalid_input("power_study: lags must satisfy 1 <= L < T");
        }
    }
    for (int d : opt.d_values) {
        if (d < 0) {
            throw invalid_input("power_study: d must be non-negative");
        }
    }
    FitOptions fo = opt.fit;
    fo.order = {1, 1};
    fo.compute_sandwich = true;
    const std::size_t nd = opt.d_values.size();
    const std::size_t nl = opt.lags.size();
    const std::size_t jobs = nd * opt.reps;
    std::vector<std::vector<double>> pvals(jobs);
    std::vector<std::vector<double>> qs(jobs);
    std::vector<std::string> err(jobs);

    parallel_for(jobs, opt.threads, [&](std::size_t job) {
        const std::size_t di = job / opt.reps;
        const std::size_t r = job % opt.reps;
        const int d = opt.d_values[di];
        try {
            SimulateOptions so;
            so.seed = opt.seed;
            so.stream = (static_cast<std::uint64_t>(d) << 32) | r;
            so.burn_in = opt.burn_in;
            const Theta truth = designs::power_design(opt.which, d);
            const PreparedPanel x(simulate(truth, opt.T, InnovationLaw::normal(truth.m(), truth.n()), so));
            FitOptions f = fo;
            f.seed = so.stream + 1;
            const FitResult res = fit(x, f);
            const PortmanteauParts parts = portmanteau_parts(x, res);
            std::vector<double> p(nl);
            std::vector<double> q(nl);
            for (std::size_t li = 0; li < nl; ++li) {
                const DiagnosticReport rep = portmanteau(parts, opt.lags[li], opt.diagnose);
                p[li] = rep.p_value;
                q[li] = rep.Q;
            }
            pvals[job] = std::move(p);
            qs[job] = std::move(q);
        } catch (const std::exception& e) {
            err[job] = "d = " + std::to_string(d) + ", replication " + std::to_string(r) + ": " + e.what();
        }
    });

    PowerStudy out;
    for (std::size_t di = 0; di < nd; ++di) {
        for (std::size_t li = 0; li < nl; ++li) {
            PowerPoint pt;
            pt.d = opt.d_values[di];
            pt.L = opt.lags[li];
            for (std::size_t r = 0; r < opt.reps; ++r) {
                const std::size_t job = di * opt.reps + r;
                if (pvals[job].empty()) {
                    ++pt.failed;
                    continue;
                }
                ++pt.used;
                pt.rejection += pvals[job][li] < opt.alpha ? 1.0 : 0.0;
                pt.mean_Q += qs[job][li];
            }
            if (pt.used > 0) {
                pt.rejection /= static_cast<double>(pt.used);
                pt.mean_Q /= static_cast<double>(pt.used);
            }
            out.points.push_back(pt);
        }
    }
    for (const auto& e : err) {
        if (!e.empty()) {
            out.failures.push_back(e);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix factor GARCH data

struct FactorDgp {
    Eigen::Index m = 10;
    Eigen::Index n = 10;
    Theta factor_theta = designs::factor_design();  ///< k1 x k2 factor dynamics
    double noise_sd = 1.0;
    std::size_t burn_in = 500;
};

struct FactorSample {
    MatrixPanel panel;
    Matrix R;  ///< m x k1, R'R = m I
    Matrix C;  ///< n x k2, C'C = n I
    MatrixPanel factors;
};

/// X_t = R F_t C' + E_t with F_t a matrix GARCH and E_t iid N(0, noise_sd^2).
/// Loadings are sqrt(dim) times the orthonormal factor of a Gaussian matrix.
inline FactorSample simulate_factor_garch(const FactorDgp& dgp, std::size_t T, std::uint64_t seed,
                                          std::uint64_t stream = 0) {
    const Eigen::Index k1 = dgp.factor_theta.m();
    const Eigen::Index k2 = dgp.factor_theta.n();
    if (k1 > dgp.m || k2 > dgp.n) {
        throw invalid_input("simulate_factor_garch: factor dims exceed panel dims");
    }
    if (!(dgp.noise_sd >= 0.0)) {
        throw invalid_input("simulate_factor_garch: noise_sd must be non-negative");
    }
    Rng rng = make_rng(seed, stream, 2);
    std::normal_distribution<double> z;
    auto loading = [&](Eigen::Index d, Eigen::Index k) {
        Matrix g(d, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) {
                g(i, j) = z(rng);
            }
        }
        const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(d, k);
        return Matrix(std::sqrt(static_cast<double>(d)) * q);
    };
    FactorSample out;
    out.R = loading(dgp.m, k1);
    out.C = loading(dgp.n, k2);
    SimulateOptions so;
    so.seed = seed;
    so.stream = stream;
    so.burn_in = dgp.burn_in;
    out.factors = simulate(dgp.factor_theta, T, InnovationLaw::normal(k1, k2), so);
    out.panel = MatrixPanel::with_dims(dgp.m, dgp.n);
    for (std::size_t t = 0; t < T; ++t) {
        Matrix x = out.R * out.factors[t] * out.C.transpose();
        for (Eigen::Index j = 0; j < dgp.n; ++j) {
            for (Eigen::Index i = 0; i < dgp.m; ++i) {
                x(i, j) += dgp.noise_sd * z(rng);
            }
        }
        out.panel.push_back(std::move(x));
    }
    return out;
}

struct FactorStudyOptions {
    FactorDgp dgp{};
    std::vector<std::size_t> T_values{300, 600, 1200};
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    Eigen::Index k_max = 0;  ///< 0 means min(m, n) - 1, capped at 8
    unsigned threads = 1;
};

struct FactorStudyPoint {
    std::size_t T = 0;
    double select_rate = 0.0;    ///< share of replications selecting the true (k1, k2)
    double row_distance = 0.0;   ///< mean subspace distance of the row loadings
    double col_distance = 0.0;
};

inline std::vector<FactorStudyPoint> factor_study(const FactorStudyOptions& opt) {
    if (opt.reps == 0 || opt.T_values.empty()) {
        throw invalid_input("factor_study: reps and T values must be non-empty");
    }
    const Eigen::Index k1 = opt.dgp.factor_theta.m();
    const Eigen::Index k2 = opt.dgp.factor_theta.n();
    const Eigen::Index k_max =
        opt.k_max > 0 ? opt.k_max : std::min<Eigen::Index>(8, std::min(opt.dgp.m, opt.dgp.n) - 1);
    const std::size_t nt = opt.T_values.size();
    std::vector<std::array<double, 3>> res(nt * opt.reps);
    parallel_for(res.size(), opt.threads, [&](std::size_t job) {
        const std::size_t ti = job / opt.reps;
        const std::size_t r = job % opt.reps;
        const FactorSample s = simulate_factor_garch(opt.dgp, opt.T_values[ti], opt.seed, (ti << 32) | r);
        const auto sel = eigenvalue_ratio(s.panel, k_max);
        const Loadings l = estimate_loadings(s.panel, k1, k2);
        res[job] = {sel.first == k1 && sel.second == k2 ? 1.0 : 0.0, subspace_distance(l.R, s.R),
                    subspace_distance(l.C, s.C)};
    });
    std::vector<FactorStudyPoint> out;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        FactorStudyPoint pt;
        pt.T = opt.T_values[ti];
        for (std::size_t r = 0; r < opt.reps; ++r) {
            const auto& v = res[ti * opt.reps + r];
            pt.select_rate += v[0];
            pt.row_distance += v[1];
            pt.col_distance += v[2];
        }
        const double k = static_cast<double>(opt.reps);
        pt.select_rate /= k;
        pt.row_distance /= k;
        pt.col_distance /= k;
        out.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Portfolio backtests on synthetic factor panels

struct PortfolioStudyOptions {
    FactorDgp dgp{};
    std::size_t T_train = 500;
    std::size_t T_test = 100;
    std::size_t reps = 50;
    std::uint64_t seed = 1;
    bool constrained = false;
    int refit_every = 100;
    std::vector<Engine> engines{Engine::mf_garch, Engine::equal_weights};
    unsigned threads = 1;
};

struct PortfolioStudy {
    std::vector<Engine> engines;
    std::vector<std::vector<double>> SD;  ///< [engine][replication]
    std::vector<std::vector<double>> AV;
    std::vector<std::vector<double>> IR;
    std::vector<std::size_t> flagged;     ///< per engine, total flagged test periods

    /// Share of replications where engine a has SD no larger than engine b.
    [[nodiscard]] double sd_win_rate(std::size_t a, std::size_t b) const {
        std::size_t wins = 0;
        for (std::size_t r = 0; r < SD[a].size(); ++r) {
            wins += SD[a][r] <= SD[b][r] ? 1 : 0;
        }
        return SD[a].empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(SD[a].size());
    }
};

inline PortfolioStudy portfolio_study(const PortfolioStudyOptions& opt) {
    if (opt.reps == 0 || opt.engines.empty()) {
        throw invalid_input("portfolio_study: reps and engines must be non-empty");
    }
    const std::size_t ne = opt.engines.size();
    PortfolioStudy out;
    out.engines = opt.engines;
    out.SD.assign(ne, std::vector<double>(opt.reps));
    out.AV.assign(ne, std::vector<double>(opt.reps));
    out.IR.assign(ne, std::vector<double>(opt.reps));
    std::vector<std::vector<std::size_t>> flags(ne, std::vector<std::size_t>(opt.reps, 0));
    parallel_for(opt.reps, opt.threads, [&](std::size_t r) {
        const FactorSample s = simulate_factor_garch(opt.dgp, opt.T_train + opt.T_test, opt.seed, r);
        for (std::size_t e = 0; e < ne; ++e) {
            BacktestOptions bo;
            bo.engine = opt.engines[e];
            bo.T_train = opt.T_train;
            bo.T_test = opt.T_test;
            bo.constrained = opt.constrained;
            bo.refit_every = opt.refit_every;
            bo.factor.garch.multistarts = 1;
            bo.factor.garch.compute_sandwich = false;
            bo.factor.garch.seed = opt.seed + r;
            const BacktestResult b = rolling_backtest(s.panel, bo);
            out.SD[e][r] = b.SD;
            out.AV[e][r] = b.AV;
            out.IR[e][r] = b.IR;
            flags[e][r] = static_cast<std::size_t>(std::count(b.flagged.begin(), b.flagged.end(), true));
        }
    });
    out.flagged.assign(ne, 0);
    for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t r = 0; r < opt.reps; ++r) {
            out.flagged[e] += flags[e][r];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Out-of-sample variance forecasts on the estimation design

struct ForecastStudyOptions {
    Theta truth = designs::estimation_design();
    std::size_t T = 1000;
    std::size_t n_test = 100;
    std::size_t reps = 50;
    std::uint64_t seed = 1;
    std::size_t burn_in = 0;
    std::vector<Model> models{Model::matrix_garch, Model::univariate_garch, Model::diag_bekk_vt_column,
                              Model::diag_bekk_vt_row};
    unsigned threads = 1;
};

struct ForecastStudy {
    std::vector<Model> models;
    std::vector<std::vector<double>> mse;  ///< [model][replication]
    std::vector<std::vector<double>> mae;
    std::vector<std::vector<double>> qlike;
    std::vector<std::string> failures;

    [[nodiscard]] double mean(const std::vector<std::vector<double>>& loss, std::size_t model) const {
        double s = 0.0;
        for (double v : loss[model]) {
            s += v;
        }
        return loss[model].empty() ? 0.0 : s / static_cast<double>(loss[model].size());
    }

    /// Share of replications where model a has loss no larger than model b.
    [[nodiscard]] double win_rate(const std::vector<std::vector<double>>& loss, std::size_t a, std::size_t b) const {
        std::size_t wins = 0;
        for (std::size_t r = 0; r < loss[a].size(); ++r) {
            wins += loss[a][r] <= loss[b][r] ? 1 : 0;
        }
        return loss[a].empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(loss[a].size());
    }
};

inline ForecastStudy forecast_study(const ForecastStudyOptions& opt) {
    if (opt.reps == 0 || opt.models.empty() || opt.n_test == 0 || opt.n_test + 2 > opt.T) {
        throw invalid_input("forecast_study: need reps > 0, models, and 0 < n_test <= T - 2");
    }
    const std::size_t nm = opt.models.size();
    ForecastStudy out;
    out.models = opt.models;
    out.mse.assign(nm, std::vector<double>(opt.reps));
    out.mae.assign(nm, std::vector<double>(opt.reps));
    out.qlike.assign(nm, std::vector<double>(opt.reps));
    std::vector<std::vector<std::string>> errs(opt.reps);
    const std::size_t n_train = opt.T - opt.n_test;
    parallel_for(opt.reps, opt.threads, [&](std::size_t r) {
        SimulateOptions so;
        so.seed = opt.seed;
        so.stream = r;
        so.burn_in = opt.burn_in;
        const MatrixPanel x = simulate(opt.truth, opt.T, InnovationLaw::normal(opt.truth.m(), opt.truth.n()), so);
        const std::vector<Matrix> realized(x.data().begin() + static_cast<std::ptrdiff_t>(n_train), x.data().end());
        for (std::size_t k = 0; k < nm; ++k) {
            ForecastOptions fo;
            fo.fit.multistarts = 1;
            fo.fit.compute_sandwich = false;
            fo.fit.seed = opt.seed + r;
            const CovForecasts f = baseline_forecasts(x, opt.models[k], n_train, fo);
            for (const auto& msg : f.failures) {
                errs[r].push_back("replication " + std::to_string(r) + ": " + msg);
            }
            const Losses l = entry_losses(entry_variances(f, x.rows(), x.cols()), realized);
            out.mse[k][r] = l.mse;
            out.mae[k][r] = l.mae;
            out.qlike[k][r] = l.qlike;
        }
    });
    for (const auto& e : errs) {
        out.failures.insert(out.failures.end(), e.begin(), e.end());
    }
    return out;
}

}  // namespace mgarch::study
