#ifndef ANTIPGD_DIAGNOSTICS_HPP
#define ANTIPGD_DIAGNOSTICS_HPP

#include "antipgd/landscape.hpp"
#include "antipgd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace antipgd {

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference gradient with a single step h for all coordinates.
template <typename Func>
Vector fd_gradient(Func&& f, const Vector& w, double h) {
    Vector g(w.size());
    Vector probe = w;
    for (Index i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double forward = f(probe);
        probe[i] = w[i] - h;
        const double backward = f(probe);
        probe[i] = w[i];
        g[i] = (forward - backward) / (2.0 * h);
    }
    return g;
}

/// sum_i (f(w + h e_i) - 2 f(w) + f(w - h e_i)) / h^2.
template <typename Func>
double fd_hessian_diagonal_sum(Func&& f, const Vector& w, double h) {
    const double centre = f(w);
    Vector probe = w;
    double total = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double forward = f(probe);
        probe[i] = w[i] - h;
        const double backward = f(probe);
        probe[i] = w[i];
        total += (forward - 2.0 * centre + backward) / (h * h);
    }
    return total;
}

inline double gradient_fd_step(const Vector& w) { return 1e-5 * (1.0 + w.norm()); }
inline double trace_fd_step(const Vector& w) { return 1e-4 * (1.0 + w.norm()); }

/// |a - b| / max(|b|, floor); zero when both vanish.
inline double relative_error(const Vector& value, const Vector& reference, double floor = 1e-12) {
    const double diff = (value - reference).norm();
    if (diff == 0.0) {
        return 0.0;
    }
    return diff / std::max(reference.norm(), floor);
}

inline double relative_error(double value, double reference, double floor = 1e-12) {
    const double diff = std::abs(value - reference);
    if (diff == 0.0) {
        return 0.0;
    }
    return diff / std::max(std::abs(reference), floor);
}

struct FiniteDiffReport {
    double max_grad_rel_error = 0.0;
    double max_trace_rel_error = 0.0;
    std::size_t n_points = 0;
};

/**
 * Compares grad against central differences of loss (h = 1e-5 (1 + |w|))
 * and hessian_trace against the second-difference diagonal sum of loss
 * (h = 1e-4 (1 + |w|)) at every point.
 */
inline FiniteDiffReport finite_diff_check(const Landscape& landscape, std::span<const Vector> points) {
    FiniteDiffReport report;
    auto f = [&landscape](const Vector& x) { return landscape.loss(x); };
    for (const Vector& w : points) {
        const Vector fd = fd_gradient(f, w, gradient_fd_step(w));
        report.max_grad_rel_error = std::max(report.max_grad_rel_error, relative_error(landscape.grad(w), fd));
        const double fd_trace = fd_hessian_diagonal_sum(f, w, trace_fd_step(w));
        report.max_trace_rel_error =
            std::max(report.max_trace_rel_error, relative_error(landscape.hessian_trace(w), fd_trace));
        ++report.n_points;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Modified loss  L~(z) = L(z) + sigma^2/2 tr H(z)

enum class TraceGradMethod { Analytic, FiniteDifference };

struct ModifiedLossSpec {
    const Landscape* landscape = nullptr;
    double sigma2 = 0.0;
    TraceGradMethod method = TraceGradMethod::Analytic;
    /// Step for FiniteDifference; 0 selects 1e-4 (1 + |z|).
    double h = 0.0;

    void validate() const {
        require(landscape != nullptr, "ModifiedLossSpec: landscape is null");
        require(sigma2 >= 0.0, "ModifiedLossSpec: sigma2 must be >= 0");
        require(h >= 0.0, "ModifiedLossSpec: finite-difference step must be >= 0");
    }
};

inline double modified_loss(const ModifiedLossSpec& spec, const Vector& z) {
    spec.validate();
    return spec.landscape->loss(z) + 0.5 * spec.sigma2 * spec.landscape->hessian_trace(z);
}

inline Vector trace_gradient(const ModifiedLossSpec& spec, const Vector& z) {
    if (spec.method == TraceGradMethod::Analytic) {
        return spec.landscape->hessian_trace_grad(z);
    }
    const double h = spec.h > 0.0 ? spec.h : trace_fd_step(z);
    return fd_gradient([&spec](const Vector& x) { return spec.landscape->hessian_trace(x); }, z, h);
}

inline Vector modified_grad(const ModifiedLossSpec& spec, const Vector& z) {
    spec.validate();
    Vector g = spec.landscape->grad(z);
    if (spec.sigma2 != 0.0) {
        g += 0.5 * spec.sigma2 * trace_gradient(spec, z);
    }
    return g;
}

/// Analytic when the landscape provides a trace gradient, finite differences otherwise.
inline ModifiedLossSpec default_modified_loss(const Landscape& landscape, double sigma2) {
    return {.landscape = &landscape,
            .sigma2 = sigma2,
            .method = landscape.capabilities().has_trace_grad ? TraceGradMethod::Analytic
                                                              : TraceGradMethod::FiniteDifference};
}

/// (1/N) sum_n |grad L~(z_n)|^2 over the given iterates.
inline double avg_reg_grad_sqnorm(std::span<const Vector> iterates, const ModifiedLossSpec& spec) {
    require(!iterates.empty(), "avg_reg_grad_sqnorm: empty trajectory");
    double total = 0.0;
    for (const Vector& z : iterates) {
        total += modified_grad(spec, z).squaredNorm();
    }
    return total / static_cast<double>(iterates.size());
}

// ---------------------------------------------------------------------------
// Expected sharpness  E_{eps ~ N(0, s^2 I)} L(w + eps) - L(w)

struct SharpnessEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
};

inline constexpr std::int64_t kMinSharpnessSamples = 1000;

inline SharpnessEstimate expected_sharpness_mc(const Landscape& landscape, const Vector& w_star, double s,
                                               std::int64_t n_samples, std::uint64_t seed) {
    require(s > 0.0, "expected_sharpness_mc: s must be > 0");
    require(n_samples >= kMinSharpnessSamples, "expected_sharpness_mc: need at least 1000 samples");
    Xoshiro256pp rng(seed);
    const double base = landscape.loss(w_star);
    Vector probe(w_star.size());
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::int64_t k = 0; k < n_samples; ++k) {
        for (Index i = 0; i < probe.size(); ++i) {
            probe[i] = w_star[i] + s * rng.standard_normal();
        }
        const double delta = landscape.loss(probe) - base;
        sum += delta;
        sumsq += delta * delta;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    return {.value = mean, .std_error = std::sqrt(var / n), .n_samples = n_samples};
}

// ---------------------------------------------------------------------------
// Exact conditional mean of one z-form step under symmetric Bernoulli noise

inline constexpr Index kMaxEnumerationDim = 20;

/// E[z - eta grad L(z + xi)] over all 2^dim sign patterns xi in {-sigma, +sigma}^dim.
inline Vector conditional_mean_exact(const Landscape& landscape, const Vector& z, double eta, double sigma) {
    const Index dim = landscape.dim();
    require(dim <= kMaxEnumerationDim, "conditional_mean_exact: dimension too large for enumeration");
    require(z.size() == dim, "conditional_mean_exact: z has the wrong dimension");
    require(sigma >= 0.0, "conditional_mean_exact: sigma must be >= 0");
    const std::uint64_t patterns = std::uint64_t{1} << dim;
    Vector mean_grad = Vector::Zero(dim);
    Vector probe(dim);
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        for (Index i = 0; i < dim; ++i) {
            probe[i] = z[i] + (((mask >> i) & 1U) != 0 ? sigma : -sigma);
        }
        mean_grad += landscape.grad(probe);
    }
    mean_grad /= static_cast<double>(patterns);
    return z - eta * mean_grad;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need two or more points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace antipgd

#endif  // ANTIPGD_DIAGNOSTICS_HPP
