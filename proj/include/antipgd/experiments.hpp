#ifndef ANTIPGD_EXPERIMENTS_HPP
#define ANTIPGD_EXPERIMENTS_HPP

#include "antipgd/matrix_sensing.hpp"
#include "antipgd/optimizers.hpp"
#include "antipgd/quad_regression.hpp"

#include <algorithm>
#include <string>

// Default experiment settings. Manifests start from these and override
// individual fields.

namespace antipgd {

// ---------------------------------------------------------------------------
// Widening valley exit experiment

enum class ValleyEtaRule {
    AlphaOver2D,
    AlphaOverD,
};

struct ValleySettings {
    double alpha = 0.25;
    double D = 10.0;
    Index d = 100;
    ValleyEtaRule eta_rule = ValleyEtaRule::AlphaOver2D;

    void validate() const {
        require(alpha > 0.0 && alpha < 1.0, "valley: alpha must lie in (0, 1)");
        require(D > 0.0, "valley: D must be > 0");
        require(d >= 1, "valley: d must be >= 1");
    }

    double eta() const { return eta_rule == ValleyEtaRule::AlphaOver2D ? alpha / (2.0 * D) : alpha / D; }

    /// Largest admissible variance: min(alpha^3 D / 2, D / (8 alpha), alpha D / (2 d)).
    double sigma2() const {
        return std::min({alpha * alpha * alpha * D / 2.0, D / (8.0 * alpha), alpha * D / (2.0 * static_cast<double>(d))});
    }
};

/// Start on the valley floor with |u_0|^2 = D, symmetric Bernoulli noise at the admissible variance.
inline RunConfig valley_config(const ValleySettings& s, Variant variant, Index steps) {
    s.validate();
    RunConfig c;
    c.name = "valley_" + std::string(to_string(variant));
    c.variant = variant;
    c.eta = s.eta();
    c.steps = steps;
    c.distribution = Distribution::SymmetricBernoulli;
    c.sigma = std::sqrt(s.sigma2());
    c.init.kind = InitialPoint::Kind::ValleyFloor;
    c.init.valley_sqnorm = s.D;
    c.record_every = std::max<Index>(1, steps / 100);
    return c;
}

// ---------------------------------------------------------------------------
// Quadratically parametrised regression and matrix sensing

struct RegressionDefaults {
    static constexpr Index d = 100;
    static constexpr Index M = 40;
    static constexpr Index n_nonzero = 10;
    static constexpr Index M_test = 100;
    static constexpr double eta = 0.1;
    static constexpr double sgd_eta = 0.01;
    static constexpr double sigma = 0.05;
    static constexpr Index steps = 20000;
    static constexpr double init_scale = 0.5;
    static constexpr Index sgd_batch = 1;
};

struct SensingDefaults {
    static constexpr Index n = 20;
    static constexpr Index rank = 5;
    static constexpr Index M = 100;
    static constexpr Index M_test = 100;
    static constexpr double label_noise_std = 0.01;
    static constexpr double eta = 0.001;
    static constexpr double sigma = 0.1;
    static constexpr Index steps = 20000;
    static constexpr double init_scale = 1.0;
    static constexpr Index sgd_batch = 10;
};

/// Noise runs for the first 90% of the steps, then plain gradient steps to convergence.
inline Index default_noise_stop(Index steps) { return steps - steps / 10; }

inline QuadRegressionData default_regression_data(std::uint64_t seed) {
    using D = RegressionDefaults;
    return gen_quad_regression(D::d, D::M, D::n_nonzero, D::M_test, seed);
}

inline MatrixSensingData default_sensing_data(std::uint64_t seed) {
    using S = SensingDefaults;
    return gen_matrix_sensing(S::n, S::rank, S::M, S::label_noise_std, S::M_test, seed);
}

inline RunConfig regression_config(Variant variant, Index steps = RegressionDefaults::steps) {
    using D = RegressionDefaults;
    RunConfig c;
    c.name = "regression_" + std::string(to_string(variant));
    c.variant = variant;
    c.eta = uses_minibatch(variant) ? D::sgd_eta : D::eta;
    c.steps = steps;
    c.distribution = Distribution::Gaussian;
    c.sigma = D::sigma;
    c.noise_stop = default_noise_stop(steps);
    c.batch_size = uses_minibatch(variant) ? D::sgd_batch : 0;
    c.init.scale = D::init_scale;
    c.record_every = std::max<Index>(1, steps / 100);
    return c;
}

inline RunConfig sensing_config(Variant variant, Index steps = SensingDefaults::steps) {
    using S = SensingDefaults;
    RunConfig c;
    c.name = "sensing_" + std::string(to_string(variant));
    c.variant = variant;
    c.eta = S::eta;
    c.steps = steps;
    c.distribution = Distribution::Gaussian;
    c.sigma = S::sigma;
    c.noise_stop = default_noise_stop(steps);
    c.batch_size = uses_minibatch(variant) ? S::sgd_batch : 0;
    c.init.scale = S::init_scale;
    c.record_every = std::max<Index>(1, steps / 100);
    return c;
}

/// Sparse valley with five informative coordinates (b = 1) and 95 spurious ones.
inline SparseValley default_sparse_valley() { return SparseValley(95, Vector::Ones(5)); }

}  // namespace antipgd

#endif  // ANTIPGD_EXPERIMENTS_HPP
