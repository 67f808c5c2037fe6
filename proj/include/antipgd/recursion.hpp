#ifndef ANTIPGD_RECURSION_HPP
#define ANTIPGD_RECURSION_HPP

#include "antipgd/noise.hpp"
#include "antipgd/rng.hpp"
#include "antipgd/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <variant>
#include <vector>

// Second moments of the scalar-gain linear recursion
//   w_{k+1} = rho_k w_k + eps_k,   w in R^d,
// driven either by i.i.d. noise (eps_k = xi_k) or by its increments
// (eps_0 = xi_0, eps_k = xi_k - xi_{k-1}), with E|xi_k|^2 = d sigma^2.

namespace antipgd {

namespace recursion {

struct Constant {
    double rho = 0.0;
};

struct Sequence {
    std::vector<double> rhos;
};

/// rho_k drawn i.i.d. uniform on [lo, hi] at every step of every path.
struct UniformStochastic {
    double lo = 0.0;
    double hi = 1.0;
};

}  // namespace recursion

struct RhoSpec {
    std::variant<recursion::Constant, recursion::Sequence, recursion::UniformStochastic> mode;
    Index horizon = 0;

    void validate() const {
        require(horizon >= 1, "RhoSpec: horizon must be >= 1");
        if (const auto* c = std::get_if<recursion::Constant>(&mode)) {
            require(c->rho >= 0.0 && c->rho < 1.0, "RhoSpec: constant rho must lie in [0, 1)");
        } else if (const auto* s = std::get_if<recursion::Sequence>(&mode)) {
            require(static_cast<Index>(s->rhos.size()) >= horizon,
                    "RhoSpec: sequence shorter than horizon");
            for (const double r : s->rhos) {
                require(std::isfinite(r), "RhoSpec: sequence values must be finite");
            }
        } else {
            const auto& u = std::get<recursion::UniformStochastic>(mode);
            require(0.0 <= u.lo && u.lo <= u.hi && u.hi <= 1.0,
                    "RhoSpec: stochastic range must satisfy 0 <= lo <= hi <= 1");
        }
    }
};

/// Closed-form trajectory: values[k] = E|w_{k+1}|^2 for k = 0..K-1.
struct OraclePrediction {
    std::vector<double> values;
    std::optional<double> limit;
    Correlation mode = Correlation::Anticorrelated;
};

namespace detail {

inline void check_rho_const(double rho) {
    require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
}

}  // namespace detail

/**
 * E|w_{k+1}|^2 for constant rho.
 *
 * Anticorrelated: rho^{2(k+1)} |w_0|^2 + (1 + (1-rho)^2 (1-rho^{2k}) / (1-rho^2)) d sigma^2.
 * Uncorrelated:   rho^{2(k+1)} |w_0|^2 + (1-rho^{2(k+1)}) / (1-rho^2) d sigma^2.
 *
 * The anticorrelated sum runs over k terms (i = 0..k-1), hence rho^{2k}.
 */
inline double expected_sqnorm_const_rho(double rho, std::int64_t k, double w0_sqnorm, Index d,
                                        double sigma2, Correlation mode) {
    detail::check_rho_const(rho);
    require(k >= 0, "k must be >= 0");
    require(sigma2 >= 0.0 && w0_sqnorm >= 0.0, "sigma2 and |w0|^2 must be >= 0");
    const double r2 = rho * rho;
    const double dk = static_cast<double>(k);
    const double contraction = std::pow(r2, dk + 1.0) * w0_sqnorm;
    const double dsigma2 = static_cast<double>(d) * sigma2;
    if (mode == Correlation::Anticorrelated) {
        const double one_minus = 1.0 - rho;
        return contraction +
               (1.0 + one_minus * one_minus * (1.0 - std::pow(r2, dk)) / (1.0 - r2)) * dsigma2;
    }
    return contraction + (1.0 - std::pow(r2, dk + 1.0)) / (1.0 - r2) * dsigma2;
}

/// k -> infinity limits: 2 d sigma^2 / (1 + rho) and d sigma^2 / (1 - rho^2).
inline double limit_const_rho(double rho, Index d, double sigma2, Correlation mode) {
    detail::check_rho_const(rho);
    require(sigma2 >= 0.0, "sigma2 must be >= 0");
    const double dsigma2 = static_cast<double>(d) * sigma2;
    if (mode == Correlation::Anticorrelated) {
        return 2.0 * dsigma2 / (1.0 + rho);
    }
    return dsigma2 / (1.0 - rho * rho);
}

/**
 * nu_0 = 0, nu_k = rho_k^2 nu_{k-1} + (1 - rho_k)^2 for k >= 1.
 * Returns nu_0..nu_{K-1} for a sequence rho_0..rho_{K-1}; rho_0 only enters
 * through the range check.
 */
inline std::vector<double> nu_sequence(std::span<const double> rhos) {
    require(!rhos.empty(), "nu_sequence: empty rho sequence");
    for (const double r : rhos) {
        require(r >= 0.0 && r <= 1.0, "nu_sequence: rho values must lie in [0, 1]");
    }
    std::vector<double> nu(rhos.size());
    nu[0] = 0.0;
    for (std::size_t k = 1; k < rhos.size(); ++k) {
        const double r = rhos[k];
        nu[k] = r * r * nu[k - 1] + (1.0 - r) * (1.0 - r);
    }
    return nu;
}

/**
 * E|w_{k+1}|^2 for k = 0..K-1 given rho_0..rho_{K-1}.
 *
 * Evaluated in O(K) without forming the double products:
 *   P_k  = prod_{j<=k} rho_j^2                      = rho_k^2 P_{k-1}
 *   anticorrelated: nu_k = sum_{i<k} (1-rho_{i+1})^2 prod_{j=i+2}^k rho_j^2
 *                        = rho_k^2 nu_{k-1} + (1-rho_k)^2,   nu_0 = 0
 *   uncorrelated:   mu_k = sum_{i<=k} prod_{j=i+1}^k rho_j^2
 *                        = rho_k^2 mu_{k-1} + 1,             mu_0 = 1
 * giving P_k |w0|^2 + (1 + nu_k) d sigma^2 and P_k |w0|^2 + mu_k d sigma^2.
 * Empty products are 1.
 */
inline std::vector<double> expected_sqnorm_sequence(std::span<const double> rhos, double w0_sqnorm,
                                                    Index d, double sigma2, Correlation mode) {
    require(!rhos.empty(), "expected_sqnorm_sequence: empty rho sequence");
    require(sigma2 >= 0.0 && w0_sqnorm >= 0.0, "sigma2 and |w0|^2 must be >= 0");
    for (const double r : rhos) {
        require(std::isfinite(r), "expected_sqnorm_sequence: rho values must be finite");
    }
    const double dsigma2 = static_cast<double>(d) * sigma2;
    std::vector<double> out(rhos.size());
    double product = 1.0;
    double accumulated = mode == Correlation::Anticorrelated ? 0.0 : 1.0;
    for (std::size_t k = 0; k < rhos.size(); ++k) {
        const double r2 = rhos[k] * rhos[k];
        product *= r2;
        if (k > 0) {
            accumulated = mode == Correlation::Anticorrelated
                              ? r2 * accumulated + (1.0 - rhos[k]) * (1.0 - rhos[k])
                              : r2 * accumulated + 1.0;
        }
        const double noise = mode == Correlation::Anticorrelated ? 1.0 + accumulated : accumulated;
        out[k] = product * w0_sqnorm + noise * dsigma2;
    }
    return out;
}

/**
 * E|w_{k+1}|^2 averaged over i.i.d. uniform rho_k on [lo, hi], rho
 * independent of the noise. Since rho_k is independent of nu_{k-1},
 * E[nu_k] = E[rho^2] E[nu_{k-1}] + E[(1-rho)^2] and likewise for mu_k.
 */
inline OraclePrediction expected_sqnorm_uniform_rho(double lo, double hi, Index K, double w0_sqnorm,
                                                    Index d, double sigma2, Correlation mode) {
    require(0.0 <= lo && lo <= hi && hi <= 1.0, "uniform rho range must satisfy 0 <= lo <= hi <= 1");
    require(K >= 1, "K must be >= 1");
    double m2 = 0.0;
    double q = 0.0;
    if (hi > lo) {
        const double width = hi - lo;
        m2 = (hi * hi * hi - lo * lo * lo) / (3.0 * width);
        q = (std::pow(1.0 - lo, 3) - std::pow(1.0 - hi, 3)) / (3.0 * width);
    } else {
        m2 = lo * lo;
        q = (1.0 - lo) * (1.0 - lo);
    }
    const double dsigma2 = static_cast<double>(d) * sigma2;
    OraclePrediction pred;
    pred.mode = mode;
    pred.values.resize(static_cast<std::size_t>(K));
    double product = 1.0;
    double accumulated = mode == Correlation::Anticorrelated ? 0.0 : 1.0;
    for (Index k = 0; k < K; ++k) {
        product *= m2;
        if (k > 0) {
            accumulated = mode == Correlation::Anticorrelated ? m2 * accumulated + q : m2 * accumulated + 1.0;
        }
        const double noise = mode == Correlation::Anticorrelated ? 1.0 + accumulated : accumulated;
        pred.values[static_cast<std::size_t>(k)] = product * w0_sqnorm + noise * dsigma2;
    }
    if (m2 < 1.0) {
        pred.limit = mode == Correlation::Anticorrelated ? (1.0 + q / (1.0 - m2)) * dsigma2
                                                         : dsigma2 / (1.0 - m2);
    }
    return pred;
}

/// Closed-form prediction for any RhoSpec (stochastic mode averages over rho).
inline OraclePrediction predict(const RhoSpec& spec, double w0_sqnorm, Index d, double sigma2,
                                Correlation mode) {
    spec.validate();
    if (const auto* u = std::get_if<recursion::UniformStochastic>(&spec.mode)) {
        return expected_sqnorm_uniform_rho(u->lo, u->hi, spec.horizon, w0_sqnorm, d, sigma2, mode);
    }
    std::vector<double> rhos;
    if (const auto* c = std::get_if<recursion::Constant>(&spec.mode)) {
        rhos.assign(static_cast<std::size_t>(spec.horizon), c->rho);
    } else {
        const auto& s = std::get<recursion::Sequence>(spec.mode).rhos;
        rhos.assign(s.begin(), s.begin() + spec.horizon);
    }
    OraclePrediction pred;
    pred.mode = mode;
    pred.values = expected_sqnorm_sequence(rhos, w0_sqnorm, d, sigma2, mode);
    if (const auto* c = std::get_if<recursion::Constant>(&spec.mode)) {
        pred.limit = limit_const_rho(c->rho, d, sigma2, mode);
    }
    return pred;
}

/// Per-step Monte Carlo estimate; mean[k] and std_error[k] refer to |w_k|^2, k = 0..K.
struct SimulationResult {
    std::vector<double> mean;
    std::vector<double> std_error;
    std::int64_t n_samples = 0;
};

inline constexpr std::int64_t kMinRecursionSamples = 100;

/**
 * Simulates n_samples independent paths from w_0 = 0 (or w0 if given).
 *
 * Path s draws its noise from a NoiseStream seeded with
 * derive_seed(noise.seed, "path", s) and, in stochastic mode, its rho_k from
 * a generator seeded with derive_seed(noise.seed, "rho", s). Paths are
 * grouped in fixed blocks of 64 and reduced in block order, so the result
 * does not depend on the worker count.
 */
inline SimulationResult simulate_recursion(const RhoSpec& rho_spec, const NoiseSpec& noise,
                                           std::int64_t n_samples, const Vector* w0 = nullptr,
                                           unsigned workers = 1) {
    rho_spec.validate();
    noise.validate();
    require(n_samples >= kMinRecursionSamples, "simulate_recursion: need at least 100 samples");
    require(w0 == nullptr || w0->size() == noise.dim, "simulate_recursion: w0 has the wrong dimension");
    const Index K = rho_spec.horizon;
    const auto steps = static_cast<std::size_t>(K) + 1;

    constexpr std::int64_t kBlock = 64;
    const std::int64_t n_blocks = (n_samples + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> block_sum(static_cast<std::size_t>(n_blocks));
    std::vector<std::vector<double>> block_sumsq(static_cast<std::size_t>(n_blocks));

    auto run_block = [&](std::int64_t block) {
        std::vector<double> sum(steps, 0.0);
        std::vector<double> sumsq(steps, 0.0);
        Vector w(noise.dim);
        Vector eps(noise.dim);
        const std::int64_t first = block * kBlock;
        const std::int64_t last = std::min(n_samples, first + kBlock);
        for (std::int64_t s = first; s < last; ++s) {
            NoiseSpec path_noise = noise;
            path_noise.seed = derive_seed(noise.seed, "path", static_cast<std::uint64_t>(s));
            NoiseStream stream(path_noise);
            Xoshiro256pp rho_rng(derive_seed(noise.seed, "rho", static_cast<std::uint64_t>(s)));
            if (w0 != nullptr) {
                w = *w0;
            } else {
                w.setZero();
            }
            double sq = w.squaredNorm();
            sum[0] += sq;
            sumsq[0] += sq * sq;
            for (Index k = 0; k < K; ++k) {
                double rho = 0.0;
                if (const auto* c = std::get_if<recursion::Constant>(&rho_spec.mode)) {
                    rho = c->rho;
                } else if (const auto* q = std::get_if<recursion::Sequence>(&rho_spec.mode)) {
                    rho = q->rhos[static_cast<std::size_t>(k)];
                } else {
                    const auto& u = std::get<recursion::UniformStochastic>(rho_spec.mode);
                    rho = rho_rng.uniform(u.lo, u.hi);
                }
                stream.next_perturbation_into(eps);
                w = rho * w + eps;
                sq = w.squaredNorm();
                sum[static_cast<std::size_t>(k) + 1] += sq;
                sumsq[static_cast<std::size_t>(k) + 1] += sq * sq;
            }
        }
        block_sum[static_cast<std::size_t>(block)] = std::move(sum);
        block_sumsq[static_cast<std::size_t>(block)] = std::move(sumsq);
    };

    workers = std::max(1U, workers);
    if (workers == 1) {
        for (std::int64_t b = 0; b < n_blocks; ++b) {
            run_block(b);
        }
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                for (std::int64_t b = t; b < n_blocks; b += workers) {
                    run_block(b);
                }
            });
        }
    }

    SimulationResult result;
    result.n_samples = n_samples;
    result.mean.assign(steps, 0.0);
    result.std_error.assign(steps, 0.0);
    std::vector<double> sumsq(steps, 0.0);
    for (std::int64_t b = 0; b < n_blocks; ++b) {
        for (std::size_t k = 0; k < steps; ++k) {
            result.mean[k] += block_sum[static_cast<std::size_t>(b)][k];
            sumsq[k] += block_sumsq[static_cast<std::size_t>(b)][k];
        }
    }
    const double n = static_cast<double>(n_samples);
    for (std::size_t k = 0; k < steps; ++k) {
        const double mean = result.mean[k] / n;
        const double var = std::max(0.0, (sumsq[k] - n * mean * mean) / (n - 1.0));
        result.mean[k] = mean;
        result.std_error[k] = std::sqrt(var / n);
    }
    return result;
}

/// Iterates w_{k+1} = A_k w_k + eps_k and returns w_K.
inline Vector iterate_linear(std::span<const Matrix> A, const Vector& w0, std::span<const Vector> eps) {
    require(A.size() == eps.size(), "iterate_linear: A and eps lengths differ");
    Vector w = w0;
    for (std::size_t k = 0; k < A.size(); ++k) {
        w = A[k] * w + eps[k];
    }
    return w;
}

namespace detail {

/// prod_{j=from}^{to} A_j applied left-to-right in time (A_to ... A_from); identity when from > to.
inline Matrix ordered_product(std::span<const Matrix> A, std::ptrdiff_t from, std::ptrdiff_t to, Index n) {
    Matrix P = Matrix::Identity(n, n);
    for (std::ptrdiff_t j = from; j <= to; ++j) {
        P = A[static_cast<std::size_t>(j)] * P;
    }
    return P;
}

}  // namespace detail

/**
 * Variation of constants: with k = K-1,
 *   w_{k+1} = (prod_{j=0}^k A_j) w_0 + sum_{i=0}^k (prod_{j=i+1}^k A_j) eps_i.
 */
inline Vector variation_of_constants(std::span<const Matrix> A, const Vector& w0,
                                     std::span<const Vector> eps) {
    require(!A.empty() && A.size() == eps.size(), "variation_of_constants: bad lengths");
    const auto k = static_cast<std::ptrdiff_t>(A.size()) - 1;
    const Index n = w0.size();
    Vector w = detail::ordered_product(A, 0, k, n) * w0;
    for (std::ptrdiff_t i = 0; i <= k; ++i) {
        w += detail::ordered_product(A, i + 1, k, n) * eps[static_cast<std::size_t>(i)];
    }
    return w;
}

/**
 * Anticorrelated form with eps_0 = xi_0, eps_k = xi_k - xi_{k-1}:
 *   w_{k+1} = (prod A) w_0 + xi_k + sum_{i=0}^{k-1} (A_{i+1} - I)(prod_{j=i+2}^k A_j) xi_i.
 */
inline Vector variation_of_constants_anticorrelated(std::span<const Matrix> A, const Vector& w0,
                                                    std::span<const Vector> xi) {
    require(!A.empty() && A.size() == xi.size(), "variation_of_constants_anticorrelated: bad lengths");
    const auto k = static_cast<std::ptrdiff_t>(A.size()) - 1;
    const Index n = w0.size();
    Vector w = detail::ordered_product(A, 0, k, n) * w0 + xi[static_cast<std::size_t>(k)];
    for (std::ptrdiff_t i = 0; i < k; ++i) {
        const Matrix shifted = A[static_cast<std::size_t>(i + 1)] - Matrix::Identity(n, n);
        w += detail::ordered_product(A, i + 2, k, n) * shifted * xi[static_cast<std::size_t>(i)];
    }
    return w;
}

}  // namespace antipgd

#endif  // ANTIPGD_RECURSION_HPP
