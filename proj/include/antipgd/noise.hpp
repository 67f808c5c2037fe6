#ifndef ANTIPGD_NOISE_HPP
#define ANTIPGD_NOISE_HPP

#include "antipgd/rng.hpp"
#include "antipgd/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace antipgd {

enum class Distribution { SymmetricBernoulli, Gaussian };
enum class Correlation { Uncorrelated, Anticorrelated };

inline std::string_view to_string(Distribution d) {
    return d == Distribution::Gaussian ? "gaussian" : "bernoulli";
}

inline std::string_view to_string(Correlation c) {
    return c == Correlation::Anticorrelated ? "anticorrelated" : "uncorrelated";
}

inline Distribution parse_distribution(std::string_view name) {
    if (name == "bernoulli" || name == "symmetric_bernoulli") {
        return Distribution::SymmetricBernoulli;
    }
    if (name == "gaussian" || name == "normal") {
        return Distribution::Gaussian;
    }
    throw ValidationError("unknown noise distribution '" + std::string(name) + "'");
}

/// Per-coordinate noise model. sigma is the per-coordinate standard deviation.
struct NoiseSpec {
    Distribution distribution = Distribution::Gaussian;
    double sigma = 0.0;
    Correlation correlation = Correlation::Uncorrelated;
    Index dim = 1;
    std::uint64_t seed = 0;

    void validate() const {
        require(dim > 0, "noise dimension must be positive");
        require(sigma >= 0.0 && std::isfinite(sigma), "noise sigma must be finite and >= 0");
    }

    /// Per-coordinate variance of one emitted perturbation for n >= 1.
    double perturbation_variance() const {
        const double base = sigma * sigma;
        return correlation == Correlation::Anticorrelated ? 2.0 * base : base;
    }
};

/**
 * Seeded perturbation stream.
 *
 * Raw draws xi_0, xi_1, ... are i.i.d. with the configured distribution. In
 * anticorrelated mode the emitted perturbation is eps_0 = xi_0 and
 * eps_n = xi_n - xi_{n-1}, so partial sums of eps telescope to the latest xi.
 * next_xi and next_perturbation share one step counter; mixing them on the
 * same stream is allowed but the anticorrelated difference always refers to
 * the previous raw draw.
 */
class NoiseStream {
public:
    explicit NoiseStream(const NoiseSpec& spec)
        : spec_(validated(spec)), rng_(spec.seed), previous_(Vector::Zero(spec.dim)),
          current_(Vector::Zero(spec.dim)) {}

    const NoiseSpec& spec() const { return spec_; }
    std::uint64_t step() const { return step_; }

    /// Raw draw xi_n for the current step; advances the counter.
    const Vector& next_xi() {
        previous_.swap(current_);
        draw(current_);
        ++step_;
        return current_;
    }

    /// Emitted perturbation eps_n; advances the counter.
    Vector next_perturbation() {
        Vector out(spec_.dim);
        next_perturbation_into(out);
        return out;
    }

    void next_perturbation_into(Eigen::Ref<Vector> out) {
        const bool first = step_ == 0;
        next_xi();
        if (spec_.correlation == Correlation::Uncorrelated || first) {
            out = current_;
        } else {
            out = current_ - previous_;
        }
    }

    /// Most recent raw draw (zero before the first draw).
    const Vector& last_xi() const { return current_; }

private:
    static const NoiseSpec& validated(const NoiseSpec& spec) {
        spec.validate();
        return spec;
    }

    void draw(Vector& out) {
        const double sigma = spec_.sigma;
        if (sigma == 0.0) {
            out.setZero();
            return;
        }
        if (spec_.distribution == Distribution::SymmetricBernoulli) {
            for (Index i = 0; i < out.size(); ++i) {
                out[i] = sigma * rng_.sign();
            }
        } else {
            for (Index i = 0; i < out.size(); ++i) {
                out[i] = sigma * rng_.standard_normal();
            }
        }
    }

    NoiseSpec spec_;
    Xoshiro256pp rng_;
    Vector previous_;
    Vector current_;
    std::uint64_t step_ = 0;
};

inline constexpr std::int64_t kMinAutocorrelationSamples = 1000;

/**
 * Monte Carlo estimate of E[eps_{n+1}^T eps_n] / (d * Var(eps)).
 *
 * Pairs start at n = 1 so that the anticorrelated eps_0 = xi_0 (which has
 * variance sigma^2 rather than 2 sigma^2) does not enter the average.
 */
inline double lag1_autocorrelation(const NoiseSpec& spec, std::int64_t n_samples) {
    spec.validate();
    require(n_samples >= kMinAutocorrelationSamples,
            "lag1_autocorrelation needs at least 1000 samples");
    require(spec.sigma > 0.0, "lag1_autocorrelation needs sigma > 0");
    NoiseStream stream(spec);
    Vector prev = stream.next_perturbation();
    Vector next(spec.dim);
    stream.next_perturbation_into(prev);
    double acc = 0.0;
    for (std::int64_t n = 0; n < n_samples; ++n) {
        stream.next_perturbation_into(next);
        acc += next.dot(prev);
        prev.swap(next);
    }
    const double denom = static_cast<double>(n_samples) * static_cast<double>(spec.dim) *
                         spec.perturbation_variance();
    return acc / denom;
}

}  // namespace antipgd

#endif  // ANTIPGD_NOISE_HPP
