#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

namespace {

Matrix random_spd(Rng& rng, Eigen::Index d) {
    std::normal_distribution<double> z;
    Matrix g(d, d + 2);
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            g(i, j) = z(rng);
        }
    }
    return linalg::symmetrize(g * g.transpose() / static_cast<double>(d) + 0.05 * Matrix::Identity(d, d));
}

}  // namespace

TEST(Portfolio, TwoAssetDiagonal) {
    Matrix s(2, 2);
    s << 1.0, 0.0, 0.0, 2.0;
    const Vector w = mvp_unconstrained(s);
    EXPECT_NEAR(w(0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(w(1), 1.0 / 3.0, 1e-15);
    const Vector wc = mvp_constrained(s);
    EXPECT_NEAR(wc(0), 2.0 / 3.0, 1e-12);
    EXPECT_LT(kkt_residual(s, wc), 1e-12);
}

TEST(Portfolio, UnconstrainedMatchesClosedForm) {
    Rng rng = make_rng(61);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix s = random_spd(rng, 2 + rep % 9);
        const Vector inv1 = s.inverse() * Vector::Ones(s.rows());
        const Vector oracle = inv1 / inv1.sum();
        EXPECT_LT((mvp_unconstrained(s) - oracle).lpNorm<Eigen::Infinity>(), 1e-12);
    }
}

TEST(Portfolio, ConstrainedSatisfiesKkt) {
    Rng rng = make_rng(62);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int binding = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix s = random_spd(rng, 3 + rep % 20);
        const Vector w = mvp_constrained(s);
        EXPECT_LT(kkt_residual(s, w), 1e-6);
        EXPECT_GE(w.minCoeff(), 0.0);
        EXPECT_NEAR(w.sum(), 1.0, 1e-12);
        binding += (w.array() == 0.0).any() ? 1 : 0;
        // no random feasible point does better
        for (int k = 0; k < 20; ++k) {
            Vector v(s.rows());
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                v(i) = -std::log(u(rng) + 1e-300);
            }
            v /= v.sum();
            EXPECT_LE(w.dot(s * w), v.dot(s * v) + 1e-12);
        }
    }
    EXPECT_GT(binding, 10);
}

TEST(Portfolio, RejectsBadCovariances) {
    Matrix s(2, 2);
    s << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(mvp_unconstrained(s), invalid_input);
    Matrix singular = Matrix::Ones(2, 2);
    EXPECT_THROW(mvp_unconstrained(singular), numerical_error);
}

TEST(Portfolio, CumulativeReturnsThreePeriods) {
    const auto c = cumulative_returns({10.0, -10.0, 5.0});
    ASSERT_EQ(c.size(), 3u);
    EXPECT_NEAR(c[0], 0.1, 1e-15);
    EXPECT_NEAR(c[1], -0.01, 1e-15);
    EXPECT_NEAR(c[2], 0.0395, 1e-15);
}

TEST(Portfolio, PerformanceSummary) {
    const PerformanceSummary s = summarize_returns({1.0, 2.0, 3.0}, 4.0);
    EXPECT_DOUBLE_EQ(s.AV, 8.0);
    EXPECT_DOUBLE_EQ(s.SD, 2.0);
    EXPECT_DOUBLE_EQ(s.IR, 4.0);
    EXPECT_THROW(summarize_returns({1.0}, 252.0), invalid_input);
}

TEST(Portfolio, EngineNamesRoundTrip) {
    for (Engine e : {Engine::mf_garch, Engine::riskmetrics, Engine::equal_weights, Engine::sample}) {
        EXPECT_EQ(engine_from_string(to_string(e)), e);
    }
    EXPECT_THROW(engine_from_string("dcc"), invalid_input);
}

TEST(Portfolio, EqualWeightAndSampleBacktests) {
    Rng rng = make_rng(63);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 2, 2, 80);
    BacktestOptions o;
    o.engine = Engine::equal_weights;
    o.T_train = 50;
    o.T_test = 30;
    const BacktestResult eq = rolling_backtest(x, o);
    ASSERT_EQ(eq.returns.size(), 30u);
    EXPECT_NEAR(eq.returns[0], x[50].sum() / 4.0, 1e-15);
    o.engine = Engine::sample;
    const BacktestResult sm = rolling_backtest(x, o);
    const Vector w = mvp_unconstrained(detail::window_covariance(x.slice(5, 50)));
    EXPECT_LT((sm.weights[5] - w).norm(), 1e-12);
    EXPECT_NEAR(sm.returns[5], w.dot(linalg::vec(x[55])), 1e-12);
    EXPECT_EQ(std::count(sm.flagged.begin(), sm.flagged.end(), true), 0);
    o.T_train = 60;
    EXPECT_THROW(rolling_backtest(x, o), invalid_input);
}

TEST(Portfolio, FactorEngineBeatsEqualWeights) {
    const study::FactorSample s = study::simulate_factor_garch({}, 400, 64);
    BacktestOptions o;
    o.T_train = 300;
    o.T_test = 100;
    o.refit_every = 100;
    o.factor.garch.multistarts = 1;
    o.factor.garch.compute_sandwich = false;
    o.engine = Engine::mf_garch;
    const BacktestResult mf = rolling_backtest(s.panel, o);
    o.engine = Engine::equal_weights;
    const BacktestResult eq = rolling_backtest(s.panel, o);
    EXPECT_EQ(std::count(mf.flagged.begin(), mf.flagged.end(), true), 0);
    EXPECT_LT(mf.SD, eq.SD);
    o.engine = Engine::mf_garch;
    o.constrained = true;
    const BacktestResult mfc = rolling_backtest(s.panel, o);
    for (const auto& w : mfc.weights) {
        EXPECT_GE(w.minCoeff(), 0.0);
    }
}
