#include "antipgd/diagnostics.hpp"
#include "antipgd/optimizers.hpp"
#include "antipgd/quad_regression.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace antipgd {
namespace {

Vector valley_point() {
    const WideningValley wv(2);
    Vector u(2);
    u << 1.0, 0.0;
    return wv.point(u, 2.0);
}

TEST(ModifiedLoss, HandValues) {
    const WideningValley wv(2);
    const Vector z = valley_point();
    EXPECT_DOUBLE_EQ(modified_loss(default_modified_loss(wv, 0.0), z), wv.loss(z));
    EXPECT_DOUBLE_EQ(modified_loss(default_modified_loss(wv, 0.1), z), 2.45);
}

TEST(ModifiedGrad, HandValues) {
    const WideningValley wv(2);
    const Vector z = valley_point();
    EXPECT_EQ(modified_grad(default_modified_loss(wv, 0.0), z), wv.grad(z));
    Vector expected(3);
    expected << 4.1, 0.0, 2.4;
    EXPECT_LT((modified_grad(default_modified_loss(wv, 0.1), z) - expected).norm(), 1e-14);
}

TEST(ModifiedGrad, FiniteDifferenceMethodAgreesWithAnalytic) {
    const QuadRegression qr(gen_quad_regression(6, 5, 2, 3, 4));
    const Vector z = Vector::LinSpaced(6, -0.7, 0.9);
    ModifiedLossSpec analytic = default_modified_loss(qr, 0.2);
    ModifiedLossSpec fd = analytic;
    fd.method = TraceGradMethod::FiniteDifference;
    EXPECT_LT(relative_error(modified_grad(fd, z), modified_grad(analytic, z)), 1e-7);
    const Vector numeric = fd_gradient([&](const Vector& x) { return modified_loss(analytic, x); }, z, 1e-6);
    EXPECT_LT(relative_error(modified_grad(analytic, z), numeric), 1e-7);
}

TEST(ModifiedLoss, RejectsInvalidSpecs) {
    const WideningValley wv(2);
    ModifiedLossSpec spec = default_modified_loss(wv, -1.0);
    EXPECT_THROW(modified_loss(spec, valley_point()), ValidationError);
    spec.sigma2 = 0.1;
    spec.h = -1.0;
    EXPECT_THROW(modified_grad(spec, valley_point()), ValidationError);
}

TEST(Sharpness, OneDimensionalQuadratic) {
    const DiagonalQuadratic q(Vector::Constant(1, 2.0));
    const auto est = expected_sharpness_mc(q, Vector::Zero(1), 0.1, 100000, 3);
    EXPECT_LT(std::abs(est.value - 0.01), 3 * est.std_error);
}

TEST(Sharpness, VanishesAsScaleShrinks) {
    const DiagonalQuadratic q(Vector::Constant(3, 1.5));
    const double big = expected_sharpness_mc(q, Vector::Zero(3), 0.1, 2000, 1).value;
    const double small = expected_sharpness_mc(q, Vector::Zero(3), 1e-4, 2000, 1).value;
    EXPECT_LT(std::abs(small), 1e-6 * std::abs(big));
}

TEST(Sharpness, RecoversValleyTrace) {
    // A minimiser on the valley floor, so the first-order term vanishes.
    const WideningValley wv(10);
    const Vector w = wv.point(Vector::Constant(10, 0.4), 0.0);
    const double s = 1e-2;
    const auto est = expected_sharpness_mc(wv, w, s, 100000, 5);
    const double trace = wv.hessian_trace(w);
    EXPECT_LT(std::abs(est.value / (0.5 * s * s) - trace) / trace, 0.05);
}

TEST(Sharpness, RejectsInvalidArguments) {
    const ZeroLoss z(2);
    EXPECT_THROW(expected_sharpness_mc(z, Vector::Zero(2), 0.0, 5000, 1), ValidationError);
    EXPECT_THROW(expected_sharpness_mc(z, Vector::Zero(2), 0.1, 999, 1), ValidationError);
}

TEST(ConditionalMean, ZeroNoiseIsGradientStep) {
    const WideningValley wv(3);
    const Vector z = Vector::LinSpaced(4, 0.2, 1.0);
    EXPECT_EQ(conditional_mean_exact(wv, z, 0.1, 0.0), z - 0.1 * wv.grad(z));
}

TEST(ConditionalMean, PolynomialValleyMatchesModifiedGradientExactly) {
    // The valley's gradient is cubic, so the symmetric average reproduces
    // grad L + sigma^2/2 grad tr H with no higher-order remainder.
    const WideningValley wv(3);
    const Vector z = Vector::LinSpaced(4, -0.4, 0.9);
    for (const double sigma : {0.2, 0.1, 0.05}) {
        const Vector exact = conditional_mean_exact(wv, z, 0.1, sigma);
        const Vector predicted = z - 0.1 * modified_grad(default_modified_loss(wv, sigma * sigma), z);
        EXPECT_LT((exact - predicted).norm(), 1e-15);
    }
}

TEST(ConditionalMean, OneDimensionalQuadraticIsExact) {
    const DiagonalQuadratic q(Vector::Constant(1, 3.0));
    const Vector z = Vector::Constant(1, 0.7);
    const Vector exact = conditional_mean_exact(q, z, 0.05, 0.3);
    const Vector predicted = z - 0.05 * modified_grad(default_modified_loss(q, 0.09), z);
    EXPECT_LE((exact - predicted).norm(), 1e-12);
}

TEST(ConditionalMean, RemainderScalesAsSigmaToTheFourth) {
    Matrix dirs(3, 3);
    dirs << 1.0, 0.3, -0.5, -0.4, 0.9, 0.2, 0.6, -0.1, 1.1;
    const LogCosh lc(dirs);
    Vector z(3);
    z << 0.3, -0.5, 0.8;
    const std::vector<double> sigmas = {0.2, 0.1, 0.05, 0.025};
    std::vector<double> residuals;
    for (const double sigma : sigmas) {
        const Vector exact = conditional_mean_exact(lc, z, 0.1, sigma);
        const Vector predicted = z - 0.1 * modified_grad(default_modified_loss(lc, sigma * sigma), z);
        residuals.push_back((exact - predicted).norm());
    }
    EXPECT_GE(loglog_slope(sigmas, residuals), 3.5);
}

TEST(ConditionalMean, RejectsLargeDimension) {
    const ZeroLoss z(21);
    EXPECT_THROW(conditional_mean_exact(z, Vector::Zero(21), 0.1, 0.1), ValidationError);
}

TEST(LogLogSlope, RecoversPowerLaw) {
    const std::vector<double> x = {1.0, 2.0, 4.0, 8.0};
    std::vector<double> y;
    for (const double v : x) {
        y.push_back(3.0 * std::pow(v, 2.5));
    }
    EXPECT_NEAR(loglog_slope(x, y), 2.5, 1e-12);
}

TEST(AvgRegGrad, ZeroAtMinimumOfModifiedLoss) {
    const DiagonalQuadratic q(Vector::Constant(4, 2.0));
    const std::vector<Vector> at_min(10, Vector::Zero(4));
    EXPECT_EQ(avg_reg_grad_sqnorm(at_min, default_modified_loss(q, 0.3)), 0.0);
    EXPECT_THROW(avg_reg_grad_sqnorm(std::vector<Vector>{}, default_modified_loss(q, 0.3)), ValidationError);
}

TEST(AvgRegGrad, ZFormRunOnRegressionDecreasesTheRegularisedGradient) {
    const QuadRegression qr(gen_quad_regression(20, 10, 3, 5, 2));
    const ModifiedLossSpec spec = default_modified_loss(qr, 0.05 * 0.05);
    NoiseStream stream({.distribution = Distribution::SymmetricBernoulli,
                        .sigma = 0.05,
                        .correlation = Correlation::Anticorrelated,
                        .dim = 20,
                        .seed = 7});
    Vector z0 = Vector::Constant(20, 0.5);
    const ZFormRun zr = run_zform(qr, z0, stream, 0.01, 5000);
    const double start = modified_grad(spec, z0).squaredNorm();
    EXPECT_LT(avg_reg_grad_sqnorm(zr.iterates, spec), 0.1 * start);
}

TEST(FiniteDiff, ValleyAtRandomPoints) {
    const WideningValley wv(7);
    Xoshiro256pp rng(1);
    std::vector<Vector> pts;
    for (int p = 0; p < 20; ++p) {
        Vector w(8);
        for (Index i = 0; i < 8; ++i) {
            w[i] = rng.standard_normal();
        }
        pts.push_back(w);
    }
    const auto report = finite_diff_check(wv, pts);
    EXPECT_EQ(report.n_points, 20U);
    EXPECT_LT(report.max_grad_rel_error, 1e-5);
    EXPECT_LT(report.max_trace_rel_error, 1e-4);
}

}  // namespace
}  // namespace antipgd
