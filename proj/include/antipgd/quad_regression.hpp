#ifndef ANTIPGD_QUAD_REGRESSION_HPP
#define ANTIPGD_QUAD_REGRESSION_HPP

#include "antipgd/landscape.hpp"
#include "antipgd/rng.hpp"

#include <cstdint>
#include <utility>

namespace antipgd {

struct QuadRegressionData {
    Matrix X;
    Vector y;
    Matrix X_test;
    Vector y_test;
    Vector w_star;
    std::uint64_t seed = 0;
};

/**
 * Quadratically parametrised linear regression
 *   L(w) = 1/(4M) |X (w.w) - y|^2,  f_w(x) = x^T (w.w).
 *
 *   grad  = 1/M [X^T r] . w                     with r = X (w.w) - y
 *   H     = 2/M diag(w) X^T X diag(w) + 1/M diag(X^T r)
 *   tr H  = 2/M sum_j w_j^2 |X_j|^2 + 1/M sum_j (X^T r)_j
 *         = 2/M sum_j w_j^2 |X_j|^2 + 1/M (X 1)^T r
 */
class QuadRegression final : public Landscape {
public:
    explicit QuadRegression(QuadRegressionData data) : data_(std::move(data)) {
        require(data_.X.rows() == data_.y.size(), "QuadRegression: X and y row counts differ");
        require(data_.X.rows() > 0 && data_.X.cols() > 0, "QuadRegression: empty design matrix");
        require(data_.X_test.rows() == data_.y_test.size(),
                "QuadRegression: X_test and y_test row counts differ");
        require(data_.X_test.rows() == 0 || data_.X_test.cols() == data_.X.cols(),
                "QuadRegression: X_test has the wrong number of columns");
        column_sqnorms_ = data_.X.colwise().squaredNorm().transpose();
        column_sums_ = data_.X.colwise().sum().transpose();
        row_sums_ = data_.X.rowwise().sum();
        gram_row_sums_ = data_.X.transpose() * (data_.X * Vector::Ones(data_.X.cols()));
    }

    std::string name() const override { return "quad_regression"; }
    Index dim() const override { return data_.X.cols(); }
    Index num_examples() const override { return data_.X.rows(); }
    Capabilities capabilities() const override {
        return {.has_per_example = true,
                .has_model_outputs = true,
                .has_test_set = data_.X_test.rows() > 0,
                .has_trace_grad = true};
    }

    const QuadRegressionData& data() const { return data_; }

    double loss(const Vector& w) const override {
        check_dim(w);
        return residual(data_.X, data_.y, w).squaredNorm() / (4.0 * m());
    }

    Vector grad(const Vector& w) const override {
        check_dim(w);
        const Vector r = residual(data_.X, data_.y, w);
        return (data_.X.transpose() * r).cwiseProduct(w) / m();
    }

    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        const Vector r = residual(data_.X, data_.y, w);
        const double curvature = 2.0 * w.array().square().matrix().dot(column_sqnorms_);
        return (curvature + row_sums_.dot(r)) / m();
    }

    Vector hessian_trace_grad(const Vector& w) const override {
        check_dim(w);
        return (4.0 * column_sqnorms_.cwiseProduct(w) + 2.0 * gram_row_sums_.cwiseProduct(w)) / m();
    }

    Vector per_example_grad(const Vector& w, std::span<const Index> batch) const override {
        check_dim(w);
        check_batch(batch);
        const Vector w2 = w.array().square().matrix();
        Vector acc = Vector::Zero(dim());
        for (const Index i : batch) {
            const double r = data_.X.row(i).dot(w2) - data_.y[i];
            acc += r * data_.X.row(i).transpose();
        }
        return acc.cwiseProduct(w) / static_cast<double>(batch.size());
    }

    double test_loss(const Vector& w) const override {
        check_dim(w);
        require(data_.X_test.rows() > 0, "QuadRegression: no test set");
        return residual(data_.X_test, data_.y_test, w).squaredNorm() /
               (4.0 * static_cast<double>(data_.X_test.rows()));
    }

    double model_output_sum(const Vector& w) const override {
        check_dim(w);
        return column_sums_.dot(w.array().square().matrix());
    }

    Vector model_output_grad_sum(const Vector& w) const override {
        check_dim(w);
        return 2.0 * column_sums_.cwiseProduct(w);
    }

private:
    double m() const { return static_cast<double>(data_.X.rows()); }

    static Vector residual(const Matrix& X, const Vector& y, const Vector& w) {
        return X * w.array().square().matrix() - y;
    }

    QuadRegressionData data_;
    Vector column_sqnorms_;
    Vector column_sums_;
    Vector row_sums_;
    Vector gram_row_sums_;
};

/**
 * Sparse ground truth w_star = (1, ..., 1, 0, ..., 0) with n_nonzero ones,
 * X and X_test with i.i.d. standard normal entries (filled row by row,
 * training matrix first), y = X (w_star . w_star) and likewise for the test
 * targets.
 */
inline QuadRegressionData gen_quad_regression(Index d, Index M, Index n_nonzero, Index M_test,
                                              std::uint64_t seed) {
    require(d >= 1, "gen_quad_regression: d must be >= 1");
    require(M >= 1, "gen_quad_regression: M must be >= 1");
    require(M_test >= 1, "gen_quad_regression: M_test must be >= 1");
    require(n_nonzero >= 0 && n_nonzero <= d, "gen_quad_regression: n_nonzero must be in [0, d]");

    Xoshiro256pp rng(seed);
    auto fill = [&rng](Matrix& m) {
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index j = 0; j < m.cols(); ++j) {
                m(i, j) = rng.standard_normal();
            }
        }
    };

    QuadRegressionData data;
    data.seed = seed;
    data.X.resize(M, d);
    data.X_test.resize(M_test, d);
    fill(data.X);
    fill(data.X_test);
    data.w_star = Vector::Zero(d);
    data.w_star.head(n_nonzero).setOnes();
    const Vector target = data.w_star.array().square().matrix();
    data.y = data.X * target;
    data.y_test = data.X_test * target;
    return data;
}

}  // namespace antipgd

#endif  // ANTIPGD_QUAD_REGRESSION_HPP
