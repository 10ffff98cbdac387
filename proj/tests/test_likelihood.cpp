#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

namespace {

/// Independent dense oracle: recursions written out directly, Sigma_t = V_t (x) U_t assembled in
/// full, Gaussian quasi-likelihood from a generic LDLT.
double dense_nll(const Theta& th, const MatrixPanel& x) {
    const Eigen::Index m = th.m();
    const Eigen::Index n = th.n();
    const std::size_t T = x.size();
    std::vector<Matrix> S1(T), S2(T);
    std::vector<double> y(T);
    const Matrix C1 = th.row.A0 * th.row.A0.transpose();
    const Matrix C2 = th.col.A0 * th.col.A0.transpose();
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        S1[t] = C1;
        S2[t] = C2;
        y[t] = th.trace.w;
        for (std::size_t j = 0; j < th.trace.alpha.size(); ++j) {
            if (t >= j + 1) {
                const Matrix& xl = x[t - j - 1];
                S1[t] += th.row.arch[j] * xl * xl.transpose() * th.row.arch[j].transpose();
                S2[t] += th.col.arch[j] * xl.transpose() * xl * th.col.arch[j].transpose();
                y[t] += th.trace.alpha[j] * (xl * xl.transpose()).trace();
            }
        }
        for (std::size_t j = 0; j < th.trace.beta.size(); ++j) {
            if (t >= j + 1) {
                S1[t] += th.row.garch[j] * S1[t - j - 1] * th.row.garch[j].transpose();
                S2[t] += th.col.garch[j] * S2[t - j - 1] * th.col.garch[j].transpose();
                y[t] += th.trace.beta[j] * y[t - j - 1];
            }
        }
        const Matrix U = y[t] * S1[t] / S1[t].trace();
        const Matrix V = S2[t] / S2[t].trace();
        Matrix sigma(m * n, m * n);
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = 0; b < n; ++b) {
                sigma.block(a * m, b * m, m, m) = V(a, b) * U;
            }
        }
        Vector v(m * n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < m; ++i) {
                v(j * m + i) = x[t](i, j);
            }
        }
        const Eigen::FullPivLU<Matrix> lu(sigma);
        total += std::log(std::abs(lu.determinant())) + v.dot(lu.solve(v));
    }
    return total / (2.0 * static_cast<double>(T));
}

}  // namespace

TEST(Likelihood, MatchesDenseAssemblyOracle) {
    Rng rng = make_rng(11);
    for (Structure st : {Structure::diagonal, Structure::full}) {
        for (Order o : {Order{1, 1}, Order{2, 2}}) {
            const Theta th = fixtures::random_theta(rng, 2, 2, st, o);
            const MatrixPanel x = fixtures::gaussian_panel(rng, 2, 2, 5);
            const double a = neg_loglik(th, x);
            const double b = dense_nll(th, x);
            EXPECT_LT(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(b))) << a << " vs " << b;
        }
    }
    const Theta th = fixtures::random_theta(rng, 3, 2, Structure::full);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 3, 2, 7);
    EXPECT_NEAR(neg_loglik(th, x), dense_nll(th, x), 1e-10);
}

TEST(Likelihood, ScalarCaseIsGarch11) {
    Rng rng = make_rng(12);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 1, 1, 400);
    Theta th;
    th.trace = {0.3, {0.12}, {0.8}};
    th.row = SideParams::constant(1);
    th.col = SideParams::constant(1);
    double acc = 0.0;
    double h = th.trace.w;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (t > 0) {
            h = 0.3 + 0.12 * x[t - 1](0, 0) * x[t - 1](0, 0) + 0.8 * h;
        }
        acc += std::log(h) + x[t](0, 0) * x[t](0, 0) / h;
    }
    const double oracle = acc / (2.0 * static_cast<double>(x.size()));
    EXPECT_NEAR(neg_loglik(th, x), oracle, 1e-10);
    // the unidentified side dynamics cannot move the likelihood
    th.row.arch[0](0, 0) = 0.4;
    th.col.garch[0](0, 0) = 0.7;
    EXPECT_NEAR(neg_loglik(th, x), oracle, 1e-10);
}

TEST(Likelihood, TraceIdentitiesOnRandomDraws) {
    Rng rng = make_rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        const Theta th = fixtures::random_theta(rng, 3, 4, rep % 2 ? Structure::full : Structure::diagonal,
                                               rep % 3 == 0 ? Order{2, 2} : Order{1, 1});
        const MatrixPanel x = fixtures::gaussian_panel(rng, 3, 4, 30);
        const StatePath p = filter(x, th, {.append_forecast = true});
        ASSERT_EQ(p.size(), 31u);
        for (std::size_t t = 0; t < p.size(); ++t) {
            EXPECT_NEAR(p.V[t].trace(), 1.0, 1e-10);
            EXPECT_NEAR(p.U[t].trace(), p.y[t], 1e-10 * p.y[t]);
            EXPECT_NEAR(sigma(p, t).trace(), p.y[t], 1e-10 * p.y[t]);
            EXPECT_LT((conditional_col_cov(p, t) - p.y[t] * p.V[t]).norm(), 1e-10 * p.y[t]);
        }
    }
}

TEST(Likelihood, ZeroInitialValues) {
    const Theta th = designs::estimation_design();
    Rng rng = make_rng(14);
    const StatePath p = filter(fixtures::gaussian_panel(rng, 3, 3, 3), th);
    EXPECT_DOUBLE_EQ(p.y[0], 0.4);
    EXPECT_LT((p.S1[0] - th.row.A0 * th.row.A0.transpose()).norm(), 1e-15);
}

TEST(Likelihood, SignFlipInvariance) {
    Rng rng = make_rng(15);
    const Theta th = fixtures::random_theta(rng, 3, 2, Structure::full);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 3, 2, 50);
    Theta flipped = th;
    flipped.row.arch[0] *= -1.0;
    flipped.col.garch[0] *= -1.0;
    EXPECT_NEAR(neg_loglik(th, x), neg_loglik(flipped, x), 1e-13);
    EXPECT_NEAR(neg_loglik(canonicalize_signs(flipped), x), neg_loglik(th, x), 1e-13);
}

TEST(Likelihood, PerObservationMeanIsObjective) {
    Rng rng = make_rng(16);
    const Theta th = fixtures::random_theta(rng, 2, 3);
    const PreparedPanel x(fixtures::gaussian_panel(rng, 2, 3, 40));
    const auto l = per_observation_nll(th, x);
    double s = 0.0;
    for (double v : l) {
        s += v;
    }
    EXPECT_NEAR(s / 40.0, neg_loglik(th, x), 1e-12);
}

TEST(Likelihood, AdjointGradientMatchesFiniteDifferences) {
    Rng rng = make_rng(17);
    for (int rep = 0; rep < 6; ++rep) {
        const Structure st = rep % 2 ? Structure::full : Structure::diagonal;
        const Order o = rep >= 4 ? Order{2, 2} : Order{1, 1};
        const Theta th = fixtures::random_theta(rng, 3, 2, st, o);
        const PreparedPanel x(fixtures::gaussian_panel(rng, 3, 2, 60));
        const ValueAndGradient vg = value_and_gradient(th, x);
        EXPECT_NEAR(vg.value, neg_loglik(th, x), 1e-12);
        const ThetaShape s = ThetaShape::of(th);
        const Vector v = to_natural(th);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(v(i)));
            Vector up = v;
            Vector dn = v;
            up(i) += h;
            dn(i) -= h;
            const double fd = (neg_loglik(from_natural(up, s), x) - neg_loglik(from_natural(dn, s), x)) / (2.0 * h);
            EXPECT_NEAR(vg.gradient(i), fd, 1e-6 * std::max(1.0, std::abs(fd))) << "parameter " << i;
        }
    }
}

TEST(Likelihood, CentralDifferenceAgreesWithRichardson) {
    Rng rng = make_rng(18);
    const Theta th = fixtures::random_theta(rng, 3, 3);
    const PreparedPanel x(fixtures::gaussian_panel(rng, 3, 3, 80));
    const Vector v = pack(th);
    const Vector g = gradient(th, x, {}, 1.0);
    const Vector g_half = gradient(th, x, {}, 0.5);
    const Vector rich = (4.0 * g_half - g) / 3.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        EXPECT_LE(std::abs(g(i) - rich(i)), 1e-4 * std::max(1e-3, std::abs(rich(i)))) << "parameter " << i;
    }
}
