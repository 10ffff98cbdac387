#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
    double kurt = 0.0;
    double cross = 0.0;  ///< mean product of entries (0,0) and (1,2)
};

Moments innovation_moments(const InnovationLaw& law, std::size_t draws, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Rng scale = make_rng(seed, 0, 1);
    Moments mo;
    double m4 = 0.0;
    const double cells = static_cast<double>(law.m * law.n);
    for (std::size_t k = 0; k < draws; ++k) {
        const Matrix z = draw_innovation(law, rng, scale);
        mo.mean += z.sum() / cells;
        mo.var += z.squaredNorm() / cells;
        m4 += z.array().pow(4).sum() / cells;
        mo.cross += z(0, 0) * z(1, 2);
    }
    const double d = static_cast<double>(draws);
    mo.mean /= d;
    mo.var /= d;
    mo.kurt = (m4 / d) / (mo.var * mo.var);
    mo.cross /= d;
    return mo;
}

}  // namespace

TEST(Simulate, MatrixNormalInnovationMoments) {
    const Moments mo = innovation_moments(InnovationLaw::normal(3, 3), 40000, 1);
    EXPECT_NEAR(mo.mean, 0.0, 0.01);
    EXPECT_NEAR(mo.var, 1.0, 0.02);
    EXPECT_NEAR(mo.kurt, 3.0, 0.1);
    EXPECT_NEAR(mo.cross, 0.0, 0.02);
}

TEST(Simulate, MatrixTInnovationMoments) {
    const double nu = 15.0;
    const Moments mo = innovation_moments(InnovationLaw::student(3, 3, nu), 60000, 2);
    EXPECT_NEAR(mo.mean, 0.0, 0.01);
    EXPECT_NEAR(mo.var, 1.0, 0.03);
    EXPECT_NEAR(mo.kurt, 3.0 * (nu - 2.0) / (nu - 4.0), 0.25);
    EXPECT_NEAR(mo.cross, 0.0, 0.02);
}

TEST(Simulate, MatrixTSharesGaussianDraws) {
    Rng a = make_rng(5);
    Rng sa = make_rng(5, 0, 1);
    Rng b = make_rng(5);
    Rng sb = make_rng(5, 0, 1);
    const Matrix zn = draw_innovation(InnovationLaw::normal(2, 3), a, sa);
    const Matrix zt = draw_innovation(InnovationLaw::student(2, 3, 10.0), b, sb);
    const Matrix ratio = zt.array() / zn.array();
    EXPECT_LT((ratio.array() - ratio(0, 0)).abs().maxCoeff(), 1e-12);
}

TEST(Simulate, RejectsBadLaws) {
    EXPECT_THROW(check_law(InnovationLaw::student(2, 2, 2.0)), invalid_input);
    EXPECT_THROW(simulate(designs::estimation_design(), 10, InnovationLaw::normal(2, 3)), invalid_input);
    EXPECT_THROW(simulate(designs::estimation_design(), 0, InnovationLaw::normal(3, 3)), invalid_input);
}

TEST(Simulate, DeterministicGivenSeedAndStream) {
    const Theta th = designs::estimation_design();
    SimulateOptions o;
    o.seed = 42;
    o.stream = 3;
    const MatrixPanel a = simulate(th, 50, InnovationLaw::normal(3, 3), o);
    const MatrixPanel b = simulate(th, 50, InnovationLaw::normal(3, 3), o);
    ASSERT_EQ(a.size(), 50u);
    for (std::size_t t = 0; t < 50; ++t) {
        EXPECT_EQ(a[t], b[t]);
    }
    o.stream = 4;
    const MatrixPanel c = simulate(th, 50, InnovationLaw::normal(3, 3), o);
    EXPECT_NE(a[0], c[0]);
}

TEST(Simulate, BurnInDropsLeadingDraws) {
    const Theta th = designs::estimation_design();
    SimulateOptions o;
    o.seed = 8;
    o.burn_in = 0;
    const MatrixPanel full = simulate(th, 15, InnovationLaw::normal(3, 3), o);
    o.burn_in = 5;
    const MatrixPanel tail = simulate(th, 10, InnovationLaw::normal(3, 3), o);
    for (std::size_t t = 0; t < 10; ++t) {
        EXPECT_LT((tail[t] - full[t + 5]).norm(), 1e-14);
    }
}

TEST(Simulate, UnconditionalScale) {
    // E ||X_t||^2 = E y_t = w / (1 - alpha - beta) = 4 at the estimation design
    SimulateOptions o;
    o.seed = 9;
    const MatrixPanel x = simulate(designs::estimation_design(), 40000, InnovationLaw::normal(3, 3), o);
    double s = 0.0;
    for (const auto& m : x) {
        s += m.squaredNorm();
    }
    EXPECT_NEAR(s / 40000.0, 4.0, 0.3);
}

TEST(Simulate, WarnsOutsideStationaryRegion) {
    Theta th = designs::estimation_design();
    th.trace.beta[0] = 0.8;
    bool warned = false;
    SimulateOptions o;
    o.burn_in = 0;
    o.on_warning = [&](const std::string&) { warned = true; };
    simulate(th, 5, InnovationLaw::normal(3, 3), o);
    EXPECT_TRUE(warned);
}

TEST(Simulate, PowerDesignNestsNull) {
    const Theta null = designs::power_null_design();
    const Theta d0 = designs::power_design(designs::PowerCase::garch, 0);
    EXPECT_EQ(d0.order(), (Order{2, 2}));
    EXPECT_DOUBLE_EQ(d0.trace.alpha[1], 0.0);
    const Theta d10 = designs::power_design(designs::PowerCase::garch, 10);
    EXPECT_NEAR(d10.trace.beta[1], 0.38, 1e-15);
    EXPECT_NEAR(d10.row.garch[1](2, 2), 0.38, 1e-15);
    SimulateOptions o;
    o.seed = 3;
    const MatrixPanel a = simulate(null, 20, InnovationLaw::normal(3, 3), o);
    const MatrixPanel b = simulate(d0, 20, InnovationLaw::normal(3, 3), o);
    for (std::size_t t = 0; t < 20; ++t) {
        EXPECT_LT((a[t] - b[t]).norm(), 1e-12);
    }
}
