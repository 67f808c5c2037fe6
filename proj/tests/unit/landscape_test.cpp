#include "antipgd/diagnostics.hpp"
#include "antipgd/landscape.hpp"
#include "antipgd/matrix_sensing.hpp"
#include "antipgd/quad_regression.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <numeric>
#include <vector>

namespace antipgd {
namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (const double x : xs) {
        v[i++] = x;
    }
    return v;
}

QuadRegression identity_regression() {
    QuadRegressionData data;
    data.X = Matrix::Identity(2, 2);
    data.y = vec({1.0, 0.0});
    data.X_test = data.X;
    data.y_test = data.y;
    return QuadRegression(data);
}

TEST(WideningValley, ZeroOnValleyFloor) {
    const WideningValley wv(4);
    EXPECT_EQ(wv.loss(wv.point(vec({1.0, -2.0, 3.0, 0.5}), 0.0)), 0.0);
}

TEST(WideningValley, HandValues) {
    const WideningValley wv(2);
    const Vector w = wv.point(vec({1.0, 0.0}), 2.0);
    EXPECT_DOUBLE_EQ(wv.loss(w), 2.0);
    EXPECT_EQ(wv.grad(w), vec({4.0, 0.0, 2.0}));
    EXPECT_DOUBLE_EQ(WideningValley(3).hessian_trace(vec({1.0, 1.0, 1.0, 2.0})), 15.0);
    EXPECT_DOUBLE_EQ(wv.u_sqnorm(w), 1.0);
}

TEST(WideningValley, RejectsWrongDimension) {
    const WideningValley wv(2);
    EXPECT_THROW(wv.loss(vec({1.0, 2.0})), ValidationError);
    EXPECT_THROW(WideningValley(0), ValidationError);
}

TEST(SparseValley, SpuriousBlockIsAWideningValley) {
    const SparseValley sv(3, vec({0.5, -1.0}));
    const WideningValley wv(3);
    // With the informative block at zero, the spurious block sees exactly the valley.
    const Vector u = vec({0.3, -0.7, 1.1});
    const double v = 1.7;
    Vector w = Vector::Zero(sv.dim());
    w.segment(2, 3) = u;
    w[5] = v;
    EXPECT_DOUBLE_EQ(sv.loss(w), wv.loss(wv.point(u, v)));
    EXPECT_DOUBLE_EQ(sv.u_sqnorm(w), u.squaredNorm());
}

TEST(QuadRegression, HandValues) {
    const QuadRegression qr = identity_regression();
    const Vector w = vec({1.0, 1.0});
    // r = (0, 1); L = |r|^2 / (4 * 2)
    EXPECT_DOUBLE_EQ(qr.loss(w), 0.125);
    // grad = (1/M)(X^T r) . w = (0, 0.5)
    EXPECT_EQ(qr.grad(w), vec({0.0, 0.5}));
}

TEST(QuadRegression, ScalarTraceIsThreeWSquared) {
    QuadRegressionData data;
    data.X = Matrix::Ones(1, 1);
    data.y = Vector::Zero(1);
    const QuadRegression qr(data);
    for (const double w : {-1.5, 0.0, 0.4, 2.0}) {
        EXPECT_DOUBLE_EQ(qr.hessian_trace(vec({w})), 3.0 * w * w);
        EXPECT_DOUBLE_EQ(qr.loss(vec({w})), w * w * w * w / 4.0);
    }
}

TEST(QuadRegression, InterpolatesAtGroundTruth) {
    const QuadRegression qr(gen_quad_regression(100, 40, 10, 100, 5));
    EXPECT_EQ(qr.loss(qr.data().w_star), 0.0);
    EXPECT_EQ(qr.test_loss(qr.data().w_star), 0.0);
}

TEST(QuadRegression, GenerationShapesAndDeterminism) {
    const auto a = gen_quad_regression(100, 40, 10, 100, 17);
    const auto b = gen_quad_regression(100, 40, 10, 100, 17);
    const auto c = gen_quad_regression(100, 40, 10, 100, 18);
    EXPECT_EQ(a.X.rows(), 40);
    EXPECT_EQ(a.X.cols(), 100);
    EXPECT_EQ(a.X_test.rows(), 100);
    EXPECT_EQ(a.w_star.sum(), 10.0);
    EXPECT_EQ(a.X, b.X);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.X_test, b.X_test);
    EXPECT_NE(a.X, c.X);
}

TEST(QuadRegression, PerExampleGradients) {
    const QuadRegression qr(gen_quad_regression(8, 6, 3, 4, 2));
    Xoshiro256pp rng(3);
    Vector w(8);
    for (Index i = 0; i < 8; ++i) {
        w[i] = rng.standard_normal();
    }
    std::vector<Index> all(6);
    std::iota(all.begin(), all.end(), Index{0});
    EXPECT_LT((qr.per_example_grad(w, all) - qr.grad(w)).norm(), 1e-14 * (1.0 + qr.grad(w).norm()));

    Vector averaged = Vector::Zero(8);
    for (Index i = 0; i < 6; ++i) {
        const std::vector<Index> one = {i};
        const Vector gi = qr.per_example_grad(w, one);
        // Single-example form: (x_i^T (w.w) - y_i) x_i . w
        const Vector x = qr.data().X.row(i).transpose();
        const double r = x.dot(w.cwiseProduct(w)) - qr.data().y[i];
        EXPECT_LT((gi - r * x.cwiseProduct(w)).norm(), 1e-13);
        averaged += gi;
    }
    averaged /= 6.0;
    EXPECT_LT((averaged - qr.grad(w)).norm(), 1e-13);
}

TEST(QuadRegression, RejectsBadBatch) {
    const QuadRegression qr(gen_quad_regression(4, 3, 1, 2, 2));
    const std::vector<Index> bad = {3};
    EXPECT_THROW(qr.per_example_grad(Vector::Zero(4), bad), ValidationError);
    EXPECT_THROW(qr.per_example_grad(Vector::Zero(4), std::span<const Index>{}), ValidationError);
}

TEST(QuadRegression, ModelOutputGradientMatchesFiniteDifferences) {
    const QuadRegression qr(gen_quad_regression(6, 5, 2, 3, 9));
    const Vector w = vec({0.3, -0.2, 1.1, 0.7, -0.5, 0.05});
    const Vector fd = fd_gradient([&qr](const Vector& x) { return qr.model_output_sum(x); }, w, 1e-6);
    EXPECT_LT(relative_error(qr.model_output_grad_sum(w), fd), 1e-8);
}

TEST(MatrixSensing, ZeroLossAndGradientAtGroundTruth) {
    const MatrixSensing ms(gen_matrix_sensing(6, 2, 30, 0.0, 10, 4));
    const Vector u = ms.ground_truth_factor();
    EXPECT_LT(ms.loss(u), 1e-28);
    EXPECT_LT(ms.grad(u).norm(), 1e-13);
    EXPECT_LT(ms.test_loss(u), 1e-28);
}

TEST(MatrixSensing, RotatedFactorIsAlsoAMinimiser) {
    const auto data = gen_matrix_sensing(5, 2, 20, 0.0, 5, 8);
    const MatrixSensing ms(data);
    // U Q for orthogonal Q has the same Gram matrix.
    Xoshiro256pp rng(1);
    Matrix G(5, 5);
    for (Index i = 0; i < 5; ++i) {
        for (Index j = 0; j < 5; ++j) {
            G(i, j) = rng.standard_normal();
        }
    }
    const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ();
    const Vector u0 = ms.ground_truth_factor();
    RowMajorMatrix U = Eigen::Map<const RowMajorMatrix>(u0.data(), 5, 5) * Q;
    const Vector u = Eigen::Map<const Vector>(U.data(), U.size());
    EXPECT_LT(ms.loss(u), 1e-26);
}

TEST(MatrixSensing, GenerationProperties) {
    const auto data = gen_matrix_sensing(20, 5, 100, 0.01, 100, 3);
    EXPECT_EQ(data.A.rows(), 100);
    EXPECT_EQ(data.A.cols(), 400);
    for (Index i = 0; i < data.A.rows(); ++i) {
        const Eigen::Map<const RowMajorMatrix> Ai(data.A.row(i).data(), 20, 20);
        EXPECT_EQ(Matrix(Ai), Matrix(Ai.transpose()));
    }
    const double top =
        Eigen::SelfAdjointEigenSolver<Matrix>(data.X_star, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    EXPECT_NEAR(top, 1.0, 1e-12);
    const auto again = gen_matrix_sensing(20, 5, 100, 0.01, 100, 3);
    EXPECT_EQ(data.A, again.A);
    EXPECT_EQ(data.y, again.y);
}

TEST(MatrixSensing, PerExampleGradientsAverageToFullGradient) {
    const MatrixSensing ms(gen_matrix_sensing(4, 2, 7, 0.1, 3, 6));
    Xoshiro256pp rng(5);
    Vector w(16);
    for (Index i = 0; i < 16; ++i) {
        w[i] = rng.standard_normal();
    }
    Vector averaged = Vector::Zero(16);
    for (Index i = 0; i < 7; ++i) {
        const std::vector<Index> one = {i};
        averaged += ms.per_example_grad(w, one);
    }
    averaged /= 7.0;
    EXPECT_LT((averaged - ms.grad(w)).norm(), 1e-12 * (1.0 + ms.grad(w).norm()));
}

// Every landscape: gradient, trace and trace-gradient against finite differences.
std::vector<std::unique_ptr<Landscape>> all_landscapes() {
    std::vector<std::unique_ptr<Landscape>> out;
    out.push_back(std::make_unique<WideningValley>(5));
    out.push_back(std::make_unique<SparseValley>(4, vec({0.7, -0.3})));
    out.push_back(std::make_unique<QuadRegression>(gen_quad_regression(12, 8, 3, 5, 21)));
    out.push_back(std::make_unique<MatrixSensing>(gen_matrix_sensing(4, 2, 10, 0.1, 5, 22)));
    Matrix dirs(3, 4);
    dirs << 1.0, 0.5, -0.2, 0.0, 0.3, -1.0, 0.8, 0.4, -0.6, 0.2, 0.1, 1.2;
    out.push_back(std::make_unique<LogCosh>(dirs));
    out.push_back(std::make_unique<DiagonalQuadratic>(vec({2.0, 0.5, 3.0})));
    return out;
}

TEST(AllLandscapes, DerivativesMatchFiniteDifferences) {
    Xoshiro256pp rng(2024);
    for (const auto& l : all_landscapes()) {
        std::vector<Vector> points;
        for (int p = 0; p < 5; ++p) {
            Vector w(l->dim());
            for (Index i = 0; i < w.size(); ++i) {
                w[i] = rng.standard_normal();
            }
            points.push_back(w);
        }
        const FiniteDiffReport report = finite_diff_check(*l, points);
        EXPECT_LT(report.max_grad_rel_error, 1e-5) << l->name();
        EXPECT_LT(report.max_trace_rel_error, 1e-4) << l->name();
        for (const Vector& w : points) {
            const Vector fd = fd_gradient([&l](const Vector& x) { return l->hessian_trace(x); }, w, 1e-5);
            EXPECT_LT(relative_error(l->hessian_trace_grad(w), fd, 1e-8), 1e-6) << l->name();
        }
    }
}

TEST(ZeroLoss, EverythingVanishes) {
    const ZeroLoss z(3);
    const Vector w = vec({1.0, 2.0, 3.0});
    EXPECT_EQ(z.loss(w), 0.0);
    EXPECT_TRUE(z.grad(w).isZero(0.0));
    EXPECT_EQ(z.hessian_trace(w), 0.0);
    const std::vector<Vector> pts = {w};
    const auto report = finite_diff_check(z, pts);
    EXPECT_EQ(report.max_grad_rel_error, 0.0);
    EXPECT_EQ(report.max_trace_rel_error, 0.0);
}

TEST(Capabilities, UnsupportedQueriesThrow) {
    const WideningValley wv(2);
    const std::vector<Index> batch = {0};
    EXPECT_THROW(wv.per_example_grad(Vector::Zero(3), batch), UnsupportedError);
    EXPECT_THROW(wv.test_loss(Vector::Zero(3)), UnsupportedError);
    EXPECT_THROW(wv.model_output_sum(Vector::Zero(3)), UnsupportedError);
}

}  // namespace
}  // namespace antipgd
