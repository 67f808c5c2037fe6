#ifndef ANTIPGD_OPTIMIZERS_HPP
#define ANTIPGD_OPTIMIZERS_HPP

#include "antipgd/diagnostics.hpp"
#include "antipgd/landscape.hpp"
#include "antipgd/noise.hpp"
#include "antipgd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace antipgd {

enum class Variant { GD, PGD, AntiPGD, SGD, AntiSGD, LabelNoiseGD };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::GD: return "GD";
        case Variant::PGD: return "PGD";
        case Variant::AntiPGD: return "AntiPGD";
        case Variant::SGD: return "SGD";
        case Variant::AntiSGD: return "AntiSGD";
        case Variant::LabelNoiseGD: return "LabelNoiseGD";
    }
    return "?";
}

inline Variant parse_variant(std::string_view name) {
    for (const Variant v : {Variant::GD, Variant::PGD, Variant::AntiPGD, Variant::SGD, Variant::AntiSGD,
                            Variant::LabelNoiseGD}) {
        if (name == to_string(v)) {
            return v;
        }
    }
    throw ValidationError("unknown optimizer variant '" + std::string(name) + "'");
}

inline bool injects_parameter_noise(Variant v) {
    return v == Variant::PGD || v == Variant::AntiPGD || v == Variant::AntiSGD;
}

inline bool is_anticorrelated(Variant v) { return v == Variant::AntiPGD || v == Variant::AntiSGD; }

inline bool uses_minibatch(Variant v) { return v == Variant::SGD || v == Variant::AntiSGD; }

/// Which raw draw the first anticorrelated increment starts from.
enum class AntiStart {
    /// xi_0 is drawn at initialisation; the first applied perturbation is xi_1 - xi_0.
    IncrementFromInitialDraw,
    /// No priming draw; the first applied perturbation is xi_0 itself.
    FirstDrawDirect,
};

/// Forward applies xi_{n+1} - xi_n, Backward applies xi_n - xi_{n+1}.
enum class IncrementOrder { Forward, Backward };

struct InitialPoint {
    enum class Kind { StandardNormal, ValleyFloor, Given };
    Kind kind = Kind::StandardNormal;
    /// StandardNormal: per-coordinate standard deviation.
    double scale = 1.0;
    /// ValleyFloor: |u_0|^2, direction uniform on the sphere, v = 0.
    double valley_sqnorm = 10.0;
    /// Given: explicit starting point.
    Vector point;
};

struct RunConfig {
    std::string name = "run";
    Variant variant = Variant::GD;
    double eta = 0.01;
    Index steps = 1000;
    Distribution distribution = Distribution::Gaussian;
    double sigma = 0.0;
    /// Noise is applied on updates n -> n+1 with noise_start <= n < noise_stop.
    Index noise_start = 0;
    std::optional<Index> noise_stop;
    /// 0 means full batch.
    Index batch_size = 0;
    Index record_every = 1;
    InitialPoint init;
    AntiStart anti_start = AntiStart::IncrementFromInitialDraw;
    IncrementOrder increment_order = IncrementOrder::Forward;
    bool record_reg_grad = false;
    bool keep_snapshots = false;

    Index effective_noise_stop() const { return noise_stop.value_or(steps); }

    std::vector<std::string> validation_errors(const Landscape& landscape) const {
        std::vector<std::string> errors;
        auto check = [&errors, this](bool ok, const std::string& what) {
            if (!ok) {
                errors.push_back(name + ": " + what);
            }
        };
        check(std::isfinite(eta) && eta > 0.0, "eta must be > 0");
        check(steps >= 0, "steps must be >= 0");
        check(std::isfinite(sigma) && sigma >= 0.0, "sigma must be >= 0");
        check(record_every >= 1, "record_every must be >= 1");
        check(noise_start >= 0 && noise_start <= effective_noise_stop() && effective_noise_stop() <= steps,
              "noise schedule must satisfy 0 <= start <= stop <= steps");
        check(batch_size >= 0 && batch_size <= landscape.num_examples(), "batch size must be in [0, M]");
        const Capabilities caps = landscape.capabilities();
        if (uses_minibatch(variant)) {
            check(caps.has_per_example, "variant needs a landscape with per-example structure");
            check(batch_size >= 1, "mini-batch variants need batch_size >= 1");
        }
        if (variant == Variant::LabelNoiseGD) {
            check(caps.has_model_outputs, "label-noise GD needs a landscape with model outputs");
        }
        if (init.kind == InitialPoint::Kind::ValleyFloor) {
            check(caps.has_valley_view, "valley-floor initialisation needs a valley landscape");
            check(init.valley_sqnorm >= 0.0, "valley |u_0|^2 must be >= 0");
        }
        if (init.kind == InitialPoint::Kind::Given) {
            check(init.point.size() == landscape.dim(), "initial point has the wrong dimension");
        }
        if (init.kind == InitialPoint::Kind::StandardNormal) {
            check(init.scale >= 0.0, "initial scale must be >= 0");
        }
        return errors;
    }

    void validate(const Landscape& landscape) const {
        const auto errors = validation_errors(landscape);
        if (!errors.empty()) {
            std::string message = errors.front();
            for (std::size_t i = 1; i < errors.size(); ++i) {
                message += "; " + errors[i];
            }
            throw ValidationError(message);
        }
    }
};

struct TrajectoryRow {
    Index step = 0;
    double train_loss = 0.0;
    std::optional<double> test_loss;
    double hessian_trace = 0.0;
    std::optional<double> u_sqnorm;
    std::optional<double> reg_grad_sqnorm;
};

struct Trajectory {
    std::string config_name;
    std::uint64_t seed = 0;
    std::vector<TrajectoryRow> rows;
    bool diverged = false;
    std::optional<Index> diverged_at;
    Vector final_params;
    /// Parameters at every recorded row when RunConfig::keep_snapshots is set.
    std::vector<Vector> snapshots;
};

inline constexpr double kDivergenceLoss = 1e12;

// ---------------------------------------------------------------------------
// Single updates

/// Draws the perturbation for one parameter-noise step of the given variant.
inline Vector draw_perturbation(Variant variant, NoiseStream& stream,
                                IncrementOrder order = IncrementOrder::Forward) {
    if (!is_anticorrelated(variant)) {
        return stream.next_xi();
    }
    const Vector previous = stream.last_xi();
    const Vector& current = stream.next_xi();
    return order == IncrementOrder::Forward ? Vector(current - previous) : Vector(previous - current);
}

/**
 * One update of a parameter-noise variant.
 *
 * GD/PGD/AntiPGD use the full gradient; SGD/AntiSGD the mean gradient over
 * `batch`. PGD adds xi_{n+1}, AntiPGD and AntiSGD add xi_{n+1} - xi_n where
 * xi_n is the stream's last raw draw. With noise_active false (or sigma 0)
 * nothing is drawn and every variant takes its plain gradient step.
 */
inline Vector step(Variant variant, const Landscape& landscape, const Vector& w, NoiseStream& stream, double eta,
                   bool noise_active, std::span<const Index> batch = {},
                   IncrementOrder order = IncrementOrder::Forward) {
    require(variant != Variant::LabelNoiseGD, "step: use label_noise_step for label-noise GD");
    require(eta > 0.0, "step: eta must be > 0");
    Vector next = uses_minibatch(variant) ? Vector(w - eta * landscape.per_example_grad(w, batch))
                                          : Vector(w - eta * landscape.grad(w));
    if (noise_active && injects_parameter_noise(variant) && stream.spec().sigma != 0.0) {
        next += draw_perturbation(variant, stream, order);
    }
    return next;
}

/// z_{n+1} = z_n - eta grad L(z_n + xi_n).
inline Vector step_zform(const Landscape& landscape, const Vector& z, const Vector& xi, double eta) {
    require(eta > 0.0, "step_zform: eta must be > 0");
    return z - eta * landscape.grad(z + xi);
}

/**
 * Gradient step on the label-noised loss with one scalar draw per step:
 *   w_{n+1} = w_n - eta (grad L(w_n) + xi_{n+1} sum_i grad f_w(x_i)).
 * `stream` must be one-dimensional.
 */
inline Vector label_noise_step(const Landscape& landscape, const Vector& w, NoiseStream& stream, double eta,
                               bool noise_active = true) {
    require(landscape.capabilities().has_model_outputs, "label_noise_step: landscape has no model outputs");
    require(stream.spec().dim == 1, "label_noise_step: label noise stream must be one-dimensional");
    require(eta > 0.0, "label_noise_step: eta must be > 0");
    Vector g = landscape.grad(w);
    if (noise_active) {
        const double xi = stream.next_xi()[0];
        g += xi * landscape.model_output_grad_sum(w);
    }
    return w - eta * g;
}

// ---------------------------------------------------------------------------
// z-form driver

struct ZFormRun {
    /// z_0 .. z_{N-1}.
    std::vector<Vector> iterates;
    Vector final_point;
};

/// Runs the change-of-variables form for `steps` updates, drawing xi_n from `stream`.
inline ZFormRun run_zform(const Landscape& landscape, const Vector& z0, NoiseStream& stream, double eta,
                          Index steps) {
    require(steps >= 0, "run_zform: steps must be >= 0");
    ZFormRun out;
    out.iterates.reserve(static_cast<std::size_t>(steps));
    Vector z = z0;
    for (Index n = 0; n < steps; ++n) {
        out.iterates.push_back(z);
        const Vector& xi = stream.next_xi();
        z = step_zform(landscape, z, xi, eta);
    }
    out.final_point = std::move(z);
    return out;
}

// ---------------------------------------------------------------------------
// Mini-batch sampling

/// Shuffle-per-epoch sampling without replacement; the last batch of an epoch may be short.
class EpochSampler {
public:
    EpochSampler(Index n_examples, Index batch_size, std::uint64_t seed)
        : order_(static_cast<std::size_t>(n_examples)), batch_size_(batch_size), rng_(seed) {
        require(n_examples >= 1 && batch_size >= 1, "EpochSampler: sizes must be positive");
        std::iota(order_.begin(), order_.end(), Index{0});
        shuffle();
    }

    std::span<const Index> next_batch() {
        if (cursor_ >= order_.size()) {
            shuffle();
            cursor_ = 0;
        }
        const std::size_t count = std::min(static_cast<std::size_t>(batch_size_), order_.size() - cursor_);
        std::span<const Index> batch(order_.data() + cursor_, count);
        cursor_ += count;
        return batch;
    }

    std::size_t batches_per_epoch() const {
        return (order_.size() + static_cast<std::size_t>(batch_size_) - 1) / static_cast<std::size_t>(batch_size_);
    }

private:
    void shuffle() {
        for (std::size_t i = order_.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng_.below(i));
            std::swap(order_[i - 1], order_[j]);
        }
    }

    std::vector<Index> order_;
    Index batch_size_;
    Xoshiro256pp rng_;
    std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Run loop

namespace detail {

inline Vector initial_point(const RunConfig& config, const Landscape& landscape, std::uint64_t seed) {
    Xoshiro256pp rng(derive_seed(seed, "init", 0));
    switch (config.init.kind) {
        case InitialPoint::Kind::Given:
            return config.init.point;
        case InitialPoint::Kind::StandardNormal: {
            Vector w(landscape.dim());
            for (Index i = 0; i < w.size(); ++i) {
                w[i] = config.init.scale * rng.standard_normal();
            }
            return w;
        }
        case InitialPoint::Kind::ValleyFloor: {
            // Every landscape with a valley view stores u first and v last.
            const Index u_dim = landscape.dim() - 1;
            Vector w = Vector::Zero(landscape.dim());
            for (Index i = 0; i < u_dim; ++i) {
                w[i] = rng.standard_normal();
            }
            const double norm = w.head(u_dim).norm();
            if (norm > 0.0) {
                w.head(u_dim) *= std::sqrt(config.init.valley_sqnorm) / norm;
            }
            return w;
        }
    }
    return Vector::Zero(landscape.dim());
}

inline TrajectoryRow measure(const RunConfig& config, const Landscape& landscape, const Vector& w, Index step) {
    const Capabilities caps = landscape.capabilities();
    TrajectoryRow row;
    row.step = step;
    row.train_loss = landscape.loss(w);
    row.hessian_trace = landscape.hessian_trace(w);
    if (caps.has_test_set) {
        row.test_loss = landscape.test_loss(w);
    }
    if (caps.has_valley_view) {
        row.u_sqnorm = landscape.u_sqnorm(w);
    }
    if (config.record_reg_grad) {
        row.reg_grad_sqnorm =
            modified_grad(default_modified_loss(landscape, config.sigma * config.sigma), w).squaredNorm();
    }
    return row;
}

inline bool row_is_healthy(const TrajectoryRow& row) {
    auto finite = [](const std::optional<double>& x) { return !x || std::isfinite(*x); };
    return std::isfinite(row.train_loss) && std::isfinite(row.hessian_trace) && finite(row.test_loss) &&
           finite(row.u_sqnorm) && finite(row.reg_grad_sqnorm) && row.train_loss <= kDivergenceLoss;
}

}  // namespace detail

/**
 * Executes config.steps updates from the configured initial point.
 *
 * Sub-streams are derived from `seed`: derive_seed(seed, "noise", 0) for
 * parameter or label noise, "init" for the starting point and "batch" for
 * mini-batch order. Rows are recorded at step 0, every record_every steps
 * and at the final step. A non-finite iterate or metric, or a training loss
 * above 1e12, stops the run and sets the divergence flag.
 */
inline Trajectory run(const RunConfig& config, const Landscape& landscape, std::uint64_t seed) {
    config.validate(landscape);

    Trajectory traj;
    traj.config_name = config.name;
    traj.seed = seed;

    NoiseSpec noise;
    noise.distribution = config.distribution;
    noise.sigma = config.sigma;
    noise.correlation = is_anticorrelated(config.variant) ? Correlation::Anticorrelated : Correlation::Uncorrelated;
    noise.dim = config.variant == Variant::LabelNoiseGD ? 1 : landscape.dim();
    noise.seed = derive_seed(seed, "noise", 0);
    NoiseStream stream(noise);

    std::optional<EpochSampler> sampler;
    if (uses_minibatch(config.variant)) {
        sampler.emplace(landscape.num_examples(), config.batch_size, derive_seed(seed, "batch", 0));
    }

    Vector w = detail::initial_point(config, landscape, seed);
    if (is_anticorrelated(config.variant) && config.anti_start == AntiStart::IncrementFromInitialDraw) {
        stream.next_xi();
    }

    const Index stop = config.effective_noise_stop();
    auto record = [&](Index n) {
        TrajectoryRow row = detail::measure(config, landscape, w, n);
        if (!detail::row_is_healthy(row)) {
            traj.diverged = true;
            traj.diverged_at = n;
            return false;
        }
        traj.rows.push_back(row);
        if (config.keep_snapshots) {
            traj.snapshots.push_back(w);
        }
        return true;
    };

    if (record(0)) {
        for (Index n = 0; n < config.steps; ++n) {
            const bool noise_active = n >= config.noise_start && n < stop;
            if (config.variant == Variant::LabelNoiseGD) {
                w = label_noise_step(landscape, w, stream, config.eta, noise_active);
            } else {
                const std::span<const Index> batch = sampler ? sampler->next_batch() : std::span<const Index>{};
                w = step(config.variant, landscape, w, stream, config.eta, noise_active, batch,
                         config.increment_order);
            }
            const Index done = n + 1;
            if (!w.allFinite()) {
                traj.diverged = true;
                traj.diverged_at = done;
                break;
            }
            if ((done % config.record_every == 0 || done == config.steps) && !record(done)) {
                break;
            }
        }
    }
    traj.final_params = w;
    return traj;
}

}  // namespace antipgd

#endif  // ANTIPGD_OPTIMIZERS_HPP
