#include "test_util.hpp"

#include <gtest/gtest.h>

#include <atomic>

using namespace mgarch;

TEST(ParallelFor, VisitsEveryIndexOnceAndPropagatesErrors) {
    std::vector<std::atomic<int>> hits(37);
    study::parallel_for(hits.size(), 3, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) {
        EXPECT_EQ(h.load(), 1);
    }
    EXPECT_THROW(study::parallel_for(5, 2,
                                     [](std::size_t i) {
                                         if (i == 3) {
                                             throw numerical_error("boom");
                                         }
                                     }),
                 numerical_error);
}

TEST(EstimationStudy, DeterministicAcrossThreadCounts) {
    study::EstimationStudyOptions o;
    o.T = 400;
    o.reps = 3;
    o.seed = 5;
    const study::EstimationStudy a = study::estimation_study(o);
    o.threads = 2;
    const study::EstimationStudy b = study::estimation_study(o);
    ASSERT_EQ(a.used + a.failed, 3u);
    EXPECT_EQ(a.names.size(), static_cast<std::size_t>(a.truth.size()));
    EXPECT_EQ(a.used, b.used);
    for (std::size_t r = 0; r < a.estimates.size(); ++r) {
        EXPECT_EQ(a.estimates[r], b.estimates[r]);
    }
    if (a.used > 0) {
        EXPECT_TRUE(a.ae.allFinite());
        // RMSE^2 = bias^2 + (k - 1) / k * sd^2
        const double k = static_cast<double>(a.used);
        const Vector rmse2 = a.bias.array().square() + (k - 1.0) / k * a.sd.array().square();
        EXPECT_LT((rmse2 - a.se.array().square().matrix()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_GE(a.coverage.minCoeff(), 0.0);
        EXPECT_LE(a.coverage.maxCoeff(), 1.0);
    }
}

TEST(EstimationStudy, RejectsEmptyDesign) {
    study::EstimationStudyOptions o;
    o.reps = 0;
    EXPECT_THROW(study::estimation_study(o), invalid_input);
}

TEST(PowerStudy, ProducesOnePointPerStrengthAndLag) {
    study::PowerStudyOptions o;
    o.d_values = {0, 10};
    o.lags = {2, 4};
    o.T = 600;
    o.reps = 2;
    const study::PowerStudy s = study::power_study(o);
    ASSERT_EQ(s.points.size(), 4u);
    for (const auto& p : s.points) {
        EXPECT_EQ(p.used + p.failed, 2u);
        EXPECT_GE(p.rejection, 0.0);
        EXPECT_LE(p.rejection, 1.0);
    }
    EXPECT_EQ(s.at(10, 4).L, 4);
    EXPECT_THROW((void)s.at(3, 2), invalid_input);
}

TEST(FactorStudy, SelectsTrueNumbersAndShrinksDistance) {
    study::FactorStudyOptions o;
    o.T_values = {300, 1200};
    o.reps = 10;
    const auto pts = study::factor_study(o);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_GE(pts[0].select_rate, 0.9);
    EXPECT_GE(pts[1].select_rate, 0.9);
    EXPECT_LT(pts[1].row_distance, pts[0].row_distance);
    EXPECT_LT(pts[1].col_distance, pts[0].col_distance);
}

TEST(FactorStudy, SimulatedLoadingsAreScaledOrthonormal) {
    const study::FactorSample s = study::simulate_factor_garch({}, 50, 3);
    EXPECT_LT((s.R.transpose() * s.R - 10.0 * Matrix::Identity(3, 3)).norm(), 1e-10);
    EXPECT_LT((s.C.transpose() * s.C - 10.0 * Matrix::Identity(3, 3)).norm(), 1e-10);
    EXPECT_EQ(s.panel.size(), 50u);
    EXPECT_EQ(s.factors.size(), 50u);
}

TEST(PortfolioStudy, RecordsEveryEngine) {
    study::PortfolioStudyOptions o;
    o.T_train = 300;
    o.reps = 2;
    o.engines = {Engine::mf_garch, Engine::equal_weights, Engine::sample};
    const study::PortfolioStudy s = study::portfolio_study(o);
    ASSERT_EQ(s.SD.size(), 3u);
    for (const auto& sd : s.SD) {
        EXPECT_EQ(sd.size(), 2u);
    }
    EXPECT_GE(s.sd_win_rate(0, 1), 0.0);
}

TEST(ForecastStudy, RecordsLossesPerModel) {
    study::ForecastStudyOptions o;
    o.T = 500;
    o.n_test = 50;
    o.reps = 1;
    const study::ForecastStudy s = study::forecast_study(o);
    ASSERT_EQ(s.mse.size(), o.models.size());
    for (std::size_t k = 0; k < s.models.size(); ++k) {
        EXPECT_GT(s.mean(s.mse, k), 0.0);
        EXPECT_GT(s.mean(s.mae, k), 0.0);
        EXPECT_EQ(s.win_rate(s.mse, k, k), 1.0);
    }
    o.n_test = 499;
    EXPECT_THROW(study::forecast_study(o), invalid_input);
}
