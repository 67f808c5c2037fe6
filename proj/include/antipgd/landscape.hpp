#ifndef ANTIPGD_LANDSCAPE_HPP
#define ANTIPGD_LANDSCAPE_HPP

#include "antipgd/types.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace antipgd {

struct Capabilities {
    bool has_per_example = false;
    bool has_model_outputs = false;
    bool has_test_set = false;
    bool has_valley_view = false;
    bool has_trace_grad = false;
};

/**
 * A differentiable training loss over a flat parameter vector.
 *
 * loss, grad and hessian_trace are pure functions of w. Optional
 * capabilities are advertised through capabilities(); calling an optional
 * method the landscape does not provide throws UnsupportedError.
 */
class Landscape {
public:
    virtual ~Landscape() = default;

    virtual std::string name() const = 0;
    virtual Index dim() const = 0;
    virtual Index num_examples() const { return 1; }
    virtual Capabilities capabilities() const { return {}; }

    virtual double loss(const Vector& w) const = 0;
    virtual Vector grad(const Vector& w) const = 0;
    virtual double hessian_trace(const Vector& w) const = 0;

    /// Gradient of w -> tr(hessian(w)), where available in closed form.
    virtual Vector hessian_trace_grad(const Vector& /*w*/) const {
        throw UnsupportedError(name() + ": no analytic Hessian-trace gradient");
    }

    /// Gradient of the mean loss over a subset of examples.
    virtual Vector per_example_grad(const Vector& /*w*/, std::span<const Index> /*batch*/) const {
        throw UnsupportedError(name() + ": no per-example structure");
    }

    virtual double test_loss(const Vector& /*w*/) const {
        throw UnsupportedError(name() + ": no test set");
    }

    /// Sum over training inputs of the model output f_w(x_i).
    virtual double model_output_sum(const Vector& /*w*/) const {
        throw UnsupportedError(name() + ": no model outputs");
    }

    /// Sum over training inputs of grad_w f_w(x_i).
    virtual Vector model_output_grad_sum(const Vector& /*w*/) const {
        throw UnsupportedError(name() + ": no model outputs");
    }

    /// Squared norm of the valley coordinate block (the u in (u, v)).
    virtual double u_sqnorm(const Vector& /*w*/) const {
        throw UnsupportedError(name() + ": no valley view");
    }

protected:
    void check_dim(const Vector& w) const {
        if (w.size() != dim()) {
            throw ValidationError(name() + ": parameter has dimension " + std::to_string(w.size()) +
                                  ", expected " + std::to_string(dim()));
        }
    }

    void check_batch(std::span<const Index> batch) const {
        require(!batch.empty(), name() + ": empty batch");
        for (const Index i : batch) {
            require(i >= 0 && i < num_examples(), name() + ": example index out of range");
        }
    }
};

/// L == 0. Used for the telescoping checks.
class ZeroLoss final : public Landscape {
public:
    explicit ZeroLoss(Index dim) : dim_(dim) { require(dim > 0, "ZeroLoss: dim must be positive"); }

    std::string name() const override { return "zero"; }
    Index dim() const override { return dim_; }
    Capabilities capabilities() const override { return {.has_trace_grad = true}; }

    double loss(const Vector& w) const override {
        check_dim(w);
        return 0.0;
    }
    Vector grad(const Vector& w) const override {
        check_dim(w);
        return Vector::Zero(dim_);
    }
    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        return 0.0;
    }
    Vector hessian_trace_grad(const Vector& w) const override { return grad(w); }

private:
    Index dim_;
};

/// L(z) = 1/2 sum_i lambda_i z_i^2.
class DiagonalQuadratic final : public Landscape {
public:
    explicit DiagonalQuadratic(Vector curvatures) : curvatures_(std::move(curvatures)) {
        require(curvatures_.size() > 0, "DiagonalQuadratic: need at least one coordinate");
    }

    std::string name() const override { return "quadratic"; }
    Index dim() const override { return curvatures_.size(); }
    Capabilities capabilities() const override { return {.has_trace_grad = true}; }

    double loss(const Vector& w) const override {
        check_dim(w);
        return 0.5 * (curvatures_.array() * w.array().square()).sum();
    }
    Vector grad(const Vector& w) const override {
        check_dim(w);
        return curvatures_.cwiseProduct(w);
    }
    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        return curvatures_.sum();
    }
    Vector hessian_trace_grad(const Vector& w) const override {
        check_dim(w);
        return Vector::Zero(dim());
    }

    const Vector& curvatures() const { return curvatures_; }

private:
    Vector curvatures_;
};

/**
 * Widening valley L(u, v) = 1/2 v^2 |u|^2 with u in R^d.
 *
 * Layout: w = (u_0, ..., u_{d-1}, v).
 *   grad      = (v^2 u, |u|^2 v)
 *   tr H      = d v^2 + |u|^2
 *   grad tr H = (2u, 2 d v)
 */
class WideningValley final : public Landscape {
public:
    explicit WideningValley(Index d) : d_(d) { require(d > 0, "WideningValley: d must be positive"); }

    std::string name() const override { return "widening_valley"; }
    Index dim() const override { return d_ + 1; }
    Index valley_dim() const { return d_; }
    Capabilities capabilities() const override {
        return {.has_valley_view = true, .has_trace_grad = true};
    }

    double loss(const Vector& w) const override {
        check_dim(w);
        const double v = w[d_];
        return 0.5 * v * v * w.head(d_).squaredNorm();
    }

    Vector grad(const Vector& w) const override {
        check_dim(w);
        const double v = w[d_];
        Vector g(dim());
        g.head(d_) = (v * v) * w.head(d_);
        g[d_] = w.head(d_).squaredNorm() * v;
        return g;
    }

    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        const double v = w[d_];
        return static_cast<double>(d_) * v * v + w.head(d_).squaredNorm();
    }

    Vector hessian_trace_grad(const Vector& w) const override {
        check_dim(w);
        Vector g(dim());
        g.head(d_) = 2.0 * w.head(d_);
        g[d_] = 2.0 * static_cast<double>(d_) * w[d_];
        return g;
    }

    double u_sqnorm(const Vector& w) const override {
        check_dim(w);
        return w.head(d_).squaredNorm();
    }

    /// (u, v) point with the given u and v.
    Vector point(const Vector& u, double v) const {
        require(u.size() == d_, "WideningValley::point: u has wrong dimension");
        Vector w(dim());
        w.head(d_) = u;
        w[d_] = v;
        return w;
    }

private:
    Index d_;
};

/**
 * One-hidden-unit linear network on sparse regression, population form:
 *   L(u, v) = 1/2 v^2 |u|^2 - 2 v u_{0:m}^T b
 * with u in R^{m+d}; the first m coordinates are informative and the last d
 * spurious. Layout w = (u_0, ..., u_{m+d-1}, v). Restricted to the spurious
 * block the loss is the widening valley plus a block-independent term.
 * The E[y^2] constant is dropped, so L may be negative.
 */
class SparseValley final : public Landscape {
public:
    SparseValley(Index spurious_dim, Vector b) : m_(b.size()), d_(spurious_dim), b_(std::move(b)) {
        require(m_ > 0, "SparseValley: need at least one informative coordinate");
        require(d_ > 0, "SparseValley: need at least one spurious coordinate");
    }

    std::string name() const override { return "sparse_valley"; }
    Index dim() const override { return m_ + d_ + 1; }
    Index informative_dim() const { return m_; }
    Index spurious_dim() const { return d_; }
    const Vector& b() const { return b_; }
    Capabilities capabilities() const override {
        return {.has_valley_view = true, .has_trace_grad = true};
    }

    double loss(const Vector& w) const override {
        check_dim(w);
        const double v = w[m_ + d_];
        return 0.5 * v * v * w.head(m_ + d_).squaredNorm() - 2.0 * v * w.head(m_).dot(b_);
    }

    Vector grad(const Vector& w) const override {
        check_dim(w);
        const Index n = m_ + d_;
        const double v = w[n];
        Vector g(dim());
        g.head(n) = (v * v) * w.head(n);
        g.head(m_) -= 2.0 * v * b_;
        g[n] = w.head(n).squaredNorm() * v - 2.0 * w.head(m_).dot(b_);
        return g;
    }

    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        const Index n = m_ + d_;
        const double v = w[n];
        return static_cast<double>(n) * v * v + w.head(n).squaredNorm();
    }

    Vector hessian_trace_grad(const Vector& w) const override {
        check_dim(w);
        const Index n = m_ + d_;
        Vector g(dim());
        g.head(n) = 2.0 * w.head(n);
        g[n] = 2.0 * static_cast<double>(n) * w[n];
        return g;
    }

    /// Squared norm of the spurious block u_{m:m+d}.
    double u_sqnorm(const Vector& w) const override {
        check_dim(w);
        return w.segment(m_, d_).squaredNorm();
    }

private:
    Index m_;
    Index d_;
    Vector b_;
};

/**
 * L(z) = sum_k log cosh(a_k^T z) for the rows a_k of `directions`.
 *
 * Smooth and non-polynomial, so Taylor remainders of every order are
 * nonzero. Used where the polynomial landscapes would make a remainder
 * vanish identically.
 */
class LogCosh final : public Landscape {
public:
    explicit LogCosh(Matrix directions) : directions_(std::move(directions)) {
        require(directions_.rows() > 0 && directions_.cols() > 0, "LogCosh: empty direction matrix");
        row_sqnorms_ = directions_.rowwise().squaredNorm();
    }

    std::string name() const override { return "logcosh"; }
    Index dim() const override { return directions_.cols(); }
    Capabilities capabilities() const override { return {.has_trace_grad = true}; }

    double loss(const Vector& w) const override {
        check_dim(w);
        const Vector s = directions_ * w;
        double total = 0.0;
        for (Index k = 0; k < s.size(); ++k) {
            total += log_cosh(s[k]);
        }
        return total;
    }

    Vector grad(const Vector& w) const override {
        check_dim(w);
        const Vector s = directions_ * w;
        return directions_.transpose() * s.array().tanh().matrix();
    }

    double hessian_trace(const Vector& w) const override {
        check_dim(w);
        const Vector s = directions_ * w;
        const Vector t = s.array().tanh().matrix();
        return ((1.0 - t.array().square()) * row_sqnorms_.array()).sum();
    }

    Vector hessian_trace_grad(const Vector& w) const override {
        check_dim(w);
        const Vector s = directions_ * w;
        const Eigen::ArrayXd t = s.array().tanh();
        const Eigen::ArrayXd weights = -2.0 * (1.0 - t.square()) * t * row_sqnorms_.array();
        return directions_.transpose() * weights.matrix();
    }

private:
    static double log_cosh(double x) {
        const double a = std::abs(x);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }

    Matrix directions_;
    Vector row_sqnorms_;
};

}  // namespace antipgd

#endif  // ANTIPGD_LANDSCAPE_HPP
