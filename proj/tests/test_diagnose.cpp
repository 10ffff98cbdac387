#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mgarch;

namespace {

PortmanteauParts gaussian_parts(std::size_t T, Eigen::Index m, Eigen::Index n, std::vector<double> c) {
    PortmanteauParts p;
    p.c = std::move(c);
    p.c.resize(T, 0.0);
    p.a = Matrix::Zero(static_cast<Eigen::Index>(T), 2);
    p.b = Matrix::Zero(static_cast<Eigen::Index>(T), 2);
    p.C0 = Matrix::Identity(2, 2);
    p.C1 = Matrix::Identity(2, 2);
    const double mn = static_cast<double>(m * n);
    p.kappa = 2.0 * mn;
    p.eta = Vector::Constant(m * n, 2.0);
    return p;
}

}  // namespace

TEST(Diagnose, AlternatingQuadraticFormsGiveNegativeFirstAutocorrelation) {
    std::vector<double> c;
    for (int t = 0; t < 40; ++t) {
        c.push_back(t % 2 == 0 ? 1.0 : -1.0);
    }
    const Vector r = detail::autocorr(c, 2);
    EXPECT_LT(r(0), 0.0);
    EXPECT_NEAR(r(0), -39.0 / 40.0, 1e-12);
    EXPECT_NEAR(r(1), 38.0 / 40.0, 1e-12);
    EXPECT_THROW(detail::autocorr(std::vector<double>(10, 0.0), 1), numerical_error);
}

TEST(Diagnose, OmegaIsIdentityWithoutEstimationEffect) {
    const PortmanteauParts p = gaussian_parts(50, 3, 2, {});
    for (OmegaLeading lead : {OmegaLeading::eta_squared, OmegaLeading::kappa_squared}) {
        const Matrix om = omega_hat(p, 4, {lead});
        EXPECT_LT((om - Matrix::Identity(4, 4)).norm(), 1e-14);
    }
}

TEST(Diagnose, QEqualsTSumOfSquaresWhenOmegaIsIdentity) {
    Rng rng = make_rng(31);
    std::normal_distribution<double> z;
    std::vector<double> c(200);
    for (auto& v : c) {
        v = z(rng);
    }
    const PortmanteauParts p = gaussian_parts(200, 2, 2, c);
    const DiagnosticReport rep = portmanteau(p, 3);
    EXPECT_NEAR(rep.Q, 200.0 * rep.R_hat.squaredNorm(), 1e-10);
    EXPECT_NEAR(rep.p_value, linalg::chi_square_sf(rep.Q, 3.0), 1e-14);
}

TEST(Diagnose, ResidualsAreWhitenedObservations) {
    Rng rng = make_rng(32);
    const Theta th = fixtures::random_theta(rng, 3, 2);
    const MatrixPanel x = fixtures::gaussian_panel(rng, 3, 2, 30);
    const MatrixPanel z = residuals(x, th);
    const StatePath p = filter(x, th);
    for (std::size_t t = 0; t < 30; ++t) {
        const Matrix back = linalg::sqrt_psd(p.U[t]) * z[t] * linalg::sqrt_psd(p.V[t]);
        EXPECT_LT((back - x[t]).norm(), 1e-10);
    }
    EXPECT_THROW(residual_autocorr(x, th, 0), invalid_input);
    EXPECT_THROW(residual_autocorr(x, th, 30), invalid_input);
}

TEST(Diagnose, RequiresSandwich) {
    Rng rng = make_rng(33);
    const PreparedPanel x(fixtures::gaussian_panel(rng, 2, 2, 50));
    FitResult f;
    f.theta_hat = fixtures::random_theta(rng, 2, 2);
    EXPECT_THROW(portmanteau_parts(x, f), numerical_error);
}

TEST(Diagnose, CorrectModelIsNotRejectedOnAverage) {
    // mean of Q_T(L) under the null is about L; a handful of replications keeps this fast
    double q_sum = 0.0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
        SimulateOptions o;
        o.seed = 34;
        o.stream = static_cast<std::uint64_t>(r);
        o.burn_in = 0;
        const PreparedPanel x(simulate(designs::power_null_design(), 1500, InnovationLaw::normal(3, 3), o));
        FitOptions fo;
        fo.multistarts = 1;
        const FitResult f = fit(x, fo);
        q_sum += portmanteau(x, f, 4).Q;
    }
    EXPECT_LT(q_sum / reps, 12.0);
}

TEST(Diagnose, DetectsOmittedSecondLag) {
    SimulateOptions o;
    o.seed = 35;
    o.burn_in = 0;
    const PreparedPanel x(simulate(designs::power_design(designs::PowerCase::arch, 10), 3000,
                                   InnovationLaw::normal(3, 3), o));
    FitOptions fo;
    fo.multistarts = 1;
    const FitResult f = fit(x, fo);
    const auto reps = portmanteau(x, f, std::vector<int>{2, 4});
    EXPECT_LT(reps[0].p_value, 0.01);
    EXPECT_LT(reps[1].p_value, 0.01);
}
