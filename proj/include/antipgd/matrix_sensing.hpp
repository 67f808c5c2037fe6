#ifndef ANTIPGD_MATRIX_SENSING_HPP
#define ANTIPGD_MATRIX_SENSING_HPP

#include "antipgd/landscape.hpp"
#include "antipgd/rng.hpp"

#include <cmath>
#include <cstdint>
#include <utility>

namespace antipgd {

/// Measurement matrices are stored one per row, flattened row-major (n*n columns).
struct MatrixSensingData {
    Index n = 0;
    Index rank = 0;
    RowMajorMatrix A;
    Vector y;
    RowMajorMatrix A_test;
    Vector y_test;
    Matrix V_star;  // n x rank, X_star = V_star V_star^T
    Matrix X_star;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Low-rank matrix sensing with a square factor U in R^{n x n}:
 *   L(U) = 1/M sum_i 1/2 (y_i - <A_i, U U^T>)^2.
 *
 * Parameters are U flattened row-major. With r_i the residual and A_i
 * symmetric:
 *   grad_U L_i          = -2 r_i A_i U
 *   d^2 L_i / dU_ab^2   = 4 (A_i U)_ab^2 - 2 r_i (A_i)_aa
 *   tr H                = 1/M sum_i [4 |A_i U|_F^2 - 2 n r_i tr(A_i)]
 *   grad_U tr H         = 1/M sum_i (8 A_i^2 + 4 n tr(A_i) A_i) U
 */
class MatrixSensing final : public Landscape {
public:
    explicit MatrixSensing(MatrixSensingData data) : data_(std::move(data)) {
        const Index n = data_.n;
        require(n > 0, "MatrixSensing: n must be positive");
        require(data_.A.rows() == data_.y.size() && data_.A.rows() > 0,
                "MatrixSensing: A and y row counts differ or are empty");
        require(data_.A.cols() == n * n, "MatrixSensing: A must have n*n columns");
        require(data_.A_test.rows() == data_.y_test.size(),
                "MatrixSensing: A_test and y_test row counts differ");
        require(data_.A_test.rows() == 0 || data_.A_test.cols() == n * n,
                "MatrixSensing: A_test must have n*n columns");

        const Index M = data_.A.rows();
        traces_.resize(M);
        Matrix a_sum = Matrix::Zero(n, n);
        trace_grad_operator_ = Matrix::Zero(n, n);
        for (Index i = 0; i < M; ++i) {
            const Matrix Ai = measurement(data_.A, i);
            traces_[i] = Ai.trace();
            a_sum += Ai;
            trace_grad_operator_ +=
                8.0 * Ai * Ai + 4.0 * static_cast<double>(n) * traces_[i] * Ai;
        }
        trace_grad_operator_ /= static_cast<double>(M);
        measurement_sum_ = a_sum;
    }

    std::string name() const override { return "matrix_sensing"; }
    Index dim() const override { return data_.n * data_.n; }
    Index num_examples() const override { return data_.A.rows(); }
    Capabilities capabilities() const override {
        return {.has_per_example = true,
                .has_model_outputs = true,
                .has_test_set = data_.A_test.rows() > 0,
                .has_trace_grad = true};
    }

    const MatrixSensingData& data() const { return data_; }

    /// Factor U = [V_star, 0] with U U^T = X_star, flattened.
    Vector ground_truth_factor() const {
        RowMajorMatrix U = RowMajorMatrix::Zero(data_.n, data_.n);
        U.leftCols(data_.rank) = data_.V_star;
        return Eigen::Map<const Vector>(U.data(), U.size());
    }

    double loss(const Vector& w) const override {
        check_dim(w);
        return 0.5 * residuals(data_.A, data_.y, w).squaredNorm() / static_cast<double>(num_examples());
    }

    Vector grad(const Vector& w) const override {
        check_dim(w);
        const Vector r = residuals(data_.A, data_.y, w);
        return weighted_grad(data_.A.transpose() * r, w, -2.0 / static_cast<double>(num_examples()));
    }

    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        const auto U = as_matrix(w);
        const Vector r = residuals(data_.A, data_.y, w);
        const double n = static_cast<double>(data_.n);
        double total = 0.0;
        for (Index i = 0; i < num_examples(); ++i) {
            const Matrix Ai = measurement(data_.A, i);
            total += 4.0 * (Ai * U).squaredNorm() - 2.0 * n * r[i] * traces_[i];
        }
        return total / static_cast<double>(num_examples());
    }

    Vector hessian_trace_grad(const Vector& w) const override {
        check_dim(w);
        RowMajorMatrix g = trace_grad_operator_ * as_matrix(w);
        return Eigen::Map<const Vector>(g.data(), g.size());
    }

    Vector per_example_grad(const Vector& w, std::span<const Index> batch) const override {
        check_dim(w);
        check_batch(batch);
        const Vector p = gram(w);
        Vector weighted = Vector::Zero(dim());
        for (const Index i : batch) {
            const double r = data_.y[i] - data_.A.row(i).dot(p);
            weighted += r * data_.A.row(i).transpose();
        }
        return weighted_grad(weighted, w, -2.0 / static_cast<double>(batch.size()));
    }

    double test_loss(const Vector& w) const override {
        check_dim(w);
        require(data_.A_test.rows() > 0, "MatrixSensing: no test set");
        return 0.5 * residuals(data_.A_test, data_.y_test, w).squaredNorm() /
               static_cast<double>(data_.A_test.rows());
    }

    double model_output_sum(const Vector& w) const override {
        check_dim(w);
        const auto U = as_matrix(w);
        return (measurement_sum_.cwiseProduct(U * U.transpose())).sum();
    }

    Vector model_output_grad_sum(const Vector& w) const override {
        check_dim(w);
        RowMajorMatrix g = 2.0 * measurement_sum_ * as_matrix(w);
        return Eigen::Map<const Vector>(g.data(), g.size());
    }

private:
    using ConstRowMap = Eigen::Map<const RowMajorMatrix>;

    ConstRowMap as_matrix(const Vector& w) const { return ConstRowMap(w.data(), data_.n, data_.n); }

    static Matrix measurement(const RowMajorMatrix& A, Index i) {
        const Index n = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(A.cols()))));
        return ConstRowMap(A.row(i).data(), n, n);
    }

    /// U U^T flattened row-major.
    Vector gram(const Vector& w) const {
        const auto U = as_matrix(w);
        RowMajorMatrix P = U * U.transpose();
        return Eigen::Map<const Vector>(P.data(), P.size());
    }

    Vector residuals(const RowMajorMatrix& A, const Vector& y, const Vector& w) const {
        return y - A * gram(w);
    }

    /// scale * reshape(weighted_sum) * U, flattened. weighted_sum = sum_i c_i vec(A_i).
    Vector weighted_grad(const Vector& weighted_sum, const Vector& w, double scale) const {
        const ConstRowMap G(weighted_sum.data(), data_.n, data_.n);
        RowMajorMatrix g = scale * (G * as_matrix(w));
        return Eigen::Map<const Vector>(g.data(), g.size());
    }

    MatrixSensingData data_;
    Vector traces_;
    Matrix measurement_sum_;
    Matrix trace_grad_operator_;
};

/**
 * V_star has standard normal entries and is rescaled so X_star = V V^T has
 * unit spectral norm. Each A_i = (G + G^T)/2 with G standard normal.
 * Training labels carry noise_std Gaussian noise; test labels are exact.
 * Draw order: V_star, training A_i, training label noise, test A_i.
 */
inline MatrixSensingData gen_matrix_sensing(Index n, Index r, Index M, double noise_std, Index M_test,
                                            std::uint64_t seed) {
    require(n >= 1, "gen_matrix_sensing: n must be >= 1");
    require(r >= 1 && r <= n, "gen_matrix_sensing: rank must be in [1, n]");
    require(M >= 1, "gen_matrix_sensing: M must be >= 1");
    require(M_test >= 0, "gen_matrix_sensing: M_test must be >= 0");
    require(noise_std >= 0.0 && std::isfinite(noise_std), "gen_matrix_sensing: noise_std must be >= 0");

    Xoshiro256pp rng(seed);
    MatrixSensingData data;
    data.n = n;
    data.rank = r;
    data.noise_std = noise_std;
    data.seed = seed;

    data.V_star.resize(n, r);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < r; ++j) {
            data.V_star(i, j) = rng.standard_normal();
        }
    }
    const Matrix unscaled = data.V_star * data.V_star.transpose();
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(unscaled, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .maxCoeff();
    data.V_star /= std::sqrt(top);
    data.X_star = data.V_star * data.V_star.transpose();

    auto fill_measurements = [&](RowMajorMatrix& A, Index count) {
        A.resize(count, n * n);
        for (Index k = 0; k < count; ++k) {
            Matrix G(n, n);
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < n; ++j) {
                    G(i, j) = rng.standard_normal();
                }
            }
            const RowMajorMatrix sym = 0.5 * (G + G.transpose());
            A.row(k) = Eigen::Map<const Vector>(sym.data(), sym.size()).transpose();
        }
    };

    RowMajorMatrix x_star_rm = data.X_star;
    const Eigen::Map<const Vector> x_star_vec(x_star_rm.data(), x_star_rm.size());

    fill_measurements(data.A, M);
    data.y = data.A * x_star_vec;
    for (Index i = 0; i < M; ++i) {
        data.y[i] += noise_std * rng.standard_normal();
    }
    fill_measurements(data.A_test, M_test);
    data.y_test = data.A_test * x_star_vec;
    return data;
}

}  // namespace antipgd

#endif  // ANTIPGD_MATRIX_SENSING_HPP
