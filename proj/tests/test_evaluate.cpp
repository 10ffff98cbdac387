#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

TEST(Evaluate, EntryLossesOnHandExample) {
    Matrix f1(1, 2), f2(1, 2), r1(1, 2), r2(1, 2);
    f1 << 1.0, 2.0;
    f2 << 4.0, 1.0;
    r1 << 1.0, 1.0;   // squares 1, 1
    r2 << 2.0, -3.0;  // squares 4, 9
    const Losses l = entry_losses({f1, f2}, {r1, r2});
    // MSE: t1 (0 + 1) / 2, t2 (0 + 64) / 2
    EXPECT_DOUBLE_EQ(l.mse_series[0], 0.5);
    EXPECT_DOUBLE_EQ(l.mse_series[1], 32.0);
    EXPECT_DOUBLE_EQ(l.mse, 16.25);
    EXPECT_DOUBLE_EQ(l.mse_sum, 32.5);
    EXPECT_DOUBLE_EQ(l.mae, (0.5 + 4.0) / 2.0);
    const double q1 = (std::log(1.0) + 1.0 + std::log(2.0) + 0.5) / 2.0;
    const double q2 = (std::log(4.0) + 1.0 + std::log(1.0) + 9.0) / 2.0;
    EXPECT_NEAR(l.qlike, (q1 + q2) / 2.0, 1e-15);
    EXPECT_TRUE(l.qlike_defined);
    f2(0, 1) = 0.0;
    const Losses bad = entry_losses({f1, f2}, {r1, r2});
    EXPECT_FALSE(bad.qlike_defined);
    EXPECT_TRUE(std::isnan(bad.qlike));
}

TEST(Evaluate, DieboldMarianoNeedsTenPoints) {
    const std::vector<double> a(9, 1.0), b(9, 2.0);
    EXPECT_THROW(dm_test(a, b), invalid_input);
    EXPECT_THROW(dm_test(std::vector<double>(12, 1.0), std::vector<double>(11, 1.0)), invalid_input);
}

TEST(Evaluate, DieboldMarianoSignAndSymmetry) {
    Rng rng = make_rng(51);
    std::normal_distribution<double> z;
    std::vector<double> a(100), b(100);
    for (std::size_t t = 0; t < 100; ++t) {
        b[t] = 1.0 + 0.2 * z(rng);
        a[t] = b[t] + 0.5 + 0.2 * z(rng);
    }
    const DmResult ab = dm_test(a, b);
    const DmResult ba = dm_test(b, a);
    EXPECT_TRUE(ab.defined);
    EXPECT_GT(ab.stat, 0.0);
    EXPECT_NEAR(ab.stat, -ba.stat, 1e-12);
    EXPECT_LT(ab.p_value, 0.01);
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-15);
    EXPECT_FALSE(dm_test(a, a).defined);
}

TEST(Evaluate, DieboldMarianoBartlettOracle) {
    // H = 27 -> lag floor(27^(1/3)) = 3
    std::vector<double> a(27), b(27, 0.0);
    for (std::size_t t = 0; t < 27; ++t) {
        a[t] = std::sin(0.7 * static_cast<double>(t)) + 0.3;
    }
    const double h = 27.0;
    double mean = 0.0;
    for (double v : a) {
        mean += v / h;
    }
    auto gamma = [&](std::size_t j) {
        double s = 0.0;
        for (std::size_t t = j; t < 27; ++t) {
            s += (a[t] - mean) * (a[t - j] - mean);
        }
        return s / h;
    };
    const double lrv = gamma(0) + 2.0 * (0.75 * gamma(1) + 0.5 * gamma(2) + 0.25 * gamma(3));
    EXPECT_NEAR(dm_test(a, b).stat, mean / std::sqrt(lrv / h), 1e-12);
}

TEST(Evaluate, Stars) {
    EXPECT_EQ(stars(0.005), "***");
    EXPECT_EQ(stars(0.03), "**");
    EXPECT_EQ(stars(0.07), "*");
    EXPECT_EQ(stars(0.2), "");
    EXPECT_EQ(stars(std::nan("")), "");
}

TEST(Evaluate, ModelNamesRoundTrip) {
    for (Model m : {Model::matrix_garch, Model::univariate_garch, Model::diag_bekk_vt_column, Model::diag_bekk_vt_row,
                    Model::diag_bekk_vt_full, Model::riskmetrics, Model::equal_sample}) {
        EXPECT_EQ(model_from_string(to_string(m)), m);
    }
    EXPECT_THROW(model_from_string("dcc"), invalid_input);
}

TEST(Evaluate, RiskMetricsWithUnitDecayIsTheSampleMoment) {
    Rng rng = make_rng(52);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 2, 2, 60);
    ForecastOptions fo;
    fo.lambda = 1.0;
    const CovForecasts rm = baseline_forecasts(x, Model::riskmetrics, 40, fo);
    const CovForecasts eq = baseline_forecasts(x, Model::equal_sample, 40, fo);
    ASSERT_EQ(rm.cov.size(), 20u);
    for (std::size_t t = 0; t < 20; ++t) {
        EXPECT_LT((rm.cov[t] - eq.cov[t]).norm(), 1e-12);
    }
    Matrix s = Matrix::Zero(4, 4);
    for (std::size_t t = 0; t < 40; ++t) {
        const Vector v = linalg::vec(x[t]);
        s += v * v.transpose() / 40.0;
    }
    EXPECT_LT((eq.cov[5] - s).norm(), 1e-12);
}

TEST(Evaluate, RiskMetricsRecursion) {
    Rng rng = make_rng(53);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 1, 2, 30);
    ForecastOptions fo;
    fo.lambda = 0.9;
    const CovForecasts rm = baseline_forecasts(x, Model::riskmetrics, 20, fo);
    const Vector v = linalg::vec(x[20]);
    const Matrix next = 0.1 * v * v.transpose() + 0.9 * rm.cov[0];
    EXPECT_LT((rm.cov[1] - next).norm(), 1e-12);
}

TEST(Evaluate, BlockStructureOfBekkBaselines) {
    const auto col = detail::blocks_for(Model::diag_bekk_vt_column, 3, 2);
    ASSERT_EQ(col.size(), 2u);
    EXPECT_EQ(col[1], (std::vector<Eigen::Index>{3, 4, 5}));
    const auto row = detail::blocks_for(Model::diag_bekk_vt_row, 3, 2);
    ASSERT_EQ(row.size(), 3u);
    EXPECT_EQ(row[2], (std::vector<Eigen::Index>{2, 5}));
    EXPECT_EQ(detail::blocks_for(Model::univariate_garch, 3, 2).size(), 6u);
}

TEST(Evaluate, DiagBekkFitsAndStaysPositive) {
    Rng rng = make_rng(54);
    // scalar GARCH-like vector series with common volatility
    std::normal_distribution<double> z;
    Matrix x(800, 3);
    double h = 1.0;
    for (Eigen::Index t = 0; t < 800; ++t) {
        if (t > 0) {
            h = 0.1 + 0.1 * x.row(t - 1).squaredNorm() / 3.0 + 0.8 * h;
        }
        for (Eigen::Index j = 0; j < 3; ++j) {
            x(t, j) = std::sqrt(h) * z(rng);
        }
    }
    DiagBekkVT bekk;
    bekk.fit(x);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_LT(bekk.a()(i) * bekk.a()(i) + bekk.b()(i) * bekk.b()(i), 1.0);
    }
    for (const auto& s : bekk.path(x)) {
        EXPECT_GT(linalg::eigenvalues_descending(s).minCoeff(), 0.0);
    }
    EXPECT_THROW(DiagBekkVT().path(x), invalid_input);
}

TEST(Evaluate, MatrixGarchForecastsAreFilteredStates) {
    SimulateOptions so;
    so.seed = 55;
    const MatrixPanel x = simulate(designs::estimation_design(), 500, InnovationLaw::normal(3, 3), so);
    ForecastOptions fo;
    fo.fit.multistarts = 1;
    fo.fit.compute_sandwich = false;
    const CovForecasts f = baseline_forecasts(x, Model::matrix_garch, 450, fo);
    ASSERT_EQ(f.cov.size(), 50u);
    const FitResult fr = fit(x.slice(0, 450), fo.fit);
    const StatePath p = filter(x, fr.theta_hat);
    EXPECT_LT((f.cov[10] - sigma(p, 460)).norm(), 1e-12);
    const auto ev = entry_variances(f, 3, 3);
    EXPECT_NEAR(ev[10].sum(), p.y[460], 1e-10);
}

TEST(Evaluate, FullBekkDimensionLimit) {
    Rng rng = make_rng(56);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 5, 4, 100);
    EXPECT_THROW(baseline_forecasts(x, Model::diag_bekk_vt_full, 80), invalid_input);
    EXPECT_THROW(baseline_forecasts(x, Model::equal_sample, 100), invalid_input);
}
