#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

TEST(Theta, ParameterCountOfEstimationDesign) {
    const Theta th = designs::estimation_design();
    const ThetaShape s = ThetaShape::of(th);
    // trace: w, alpha, beta; each 3x3 side: 5 free intercepts + 3 + 3 diagonal entries
    EXPECT_EQ(param_count(s), 25u);
    EXPECT_EQ(param_names(s).size(), 25u);
    EXPECT_EQ(param_names(s)[0], "w");
    ThetaShape full = s;
    full.structure = Structure::full;
    EXPECT_EQ(param_count(full), 3u + 2u * (5u + 18u));
    ThetaShape two = s;
    two.order = {2, 2};
    EXPECT_EQ(param_count(two), 5u + 2u * (5u + 12u));
}

TEST(Theta, NaturalVectorRoundTrip) {
    Rng rng = make_rng(3);
    for (Structure st : {Structure::diagonal, Structure::full}) {
        for (Order o : {Order{1, 1}, Order{2, 2}, Order{1, 0}}) {
            const Theta th = fixtures::random_theta(rng, 3, 2, st, o);
            const ThetaShape s = ThetaShape::of(th);
            const Vector v = to_natural(th);
            ASSERT_EQ(static_cast<std::size_t>(v.size()), param_count(s));
            EXPECT_LT((to_natural(from_natural(v, s)) - v).norm(), 1e-15);
        }
    }
}

TEST(Theta, PackUnpackRoundTrip) {
    Rng rng = make_rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const Theta th = fixtures::random_theta(rng, 3, 3, rep % 2 ? Structure::full : Structure::diagonal);
        const Vector z = pack(th);
        const Theta back = unpack(z, ThetaShape::of(th));
        EXPECT_LT((to_natural(back) - to_natural(th)).lpNorm<Eigen::Infinity>(), 1e-10);
    }
}

TEST(Theta, UnpackAlwaysStationary) {
    Rng rng = make_rng(5);
    std::normal_distribution<double> z(0.0, 3.0);
    const ThetaShape s{3, 2, Structure::full, {1, 1}};
    for (int rep = 0; rep < 200; ++rep) {
        Vector v(static_cast<Eigen::Index>(param_count(s)));
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v(i) = z(rng);
        }
        const Theta th = unpack(v, s);
        EXPECT_NO_THROW(validate(th));
        EXPECT_TRUE(is_stationary(th));
    }
}

TEST(Theta, SquashIsMonotoneAndInvertible) {
    const TransformOptions o;
    double prev = -1.0;
    for (double r = 0.0; r < 1.5; r += 0.005) {
        const double s = detail::squash(r, o);
        EXPECT_GT(s, prev);
        EXPECT_LT(s, o.rho_bar);
        EXPECT_NEAR(detail::unsquash(s, o), r, 1e-6 * std::max(1.0, r));
        prev = s;
    }
}

TEST(Theta, ValidateRejectsBadBundles) {
    Theta th = designs::estimation_design();
    th.row.A0(0, 0) = 2.0;
    EXPECT_THROW(validate(th), invalid_input);
    th = designs::estimation_design();
    th.trace.w = -0.1;
    EXPECT_THROW(validate(th), invalid_input);
    th = designs::estimation_design();
    th.row.A0(0, 1) = 0.3;
    EXPECT_THROW(validate(th), invalid_input);
    th = designs::estimation_design();
    th.col.structure = Structure::full;
    EXPECT_THROW(validate(th), invalid_input);
    EXPECT_THROW(check_order({3, 1}), invalid_input);
}

TEST(Theta, StationarityOfDesigns) {
    EXPECT_TRUE(is_stationary(designs::estimation_design()));
    EXPECT_TRUE(is_stationary(designs::power_design(designs::PowerCase::arch, 10)));
    Theta th = designs::estimation_design();
    th.trace.beta[0] = 0.75;
    EXPECT_FALSE(is_stationary(th));
    EXPECT_NEAR(designs::estimation_design().row.persistence(), 0.45, 1e-12);
}

TEST(Theta, CanonicalSignsArePositive) {
    Theta th = designs::estimation_design();
    th.row.arch[0] *= -1.0;
    th.col.garch[0] *= -1.0;
    const Theta c = canonicalize_signs(th);
    EXPECT_EQ(to_natural(c), to_natural(designs::estimation_design()));
}
