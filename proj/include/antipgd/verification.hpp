#ifndef ANTIPGD_VERIFICATION_HPP
#define ANTIPGD_VERIFICATION_HPP

#include "antipgd/csv.hpp"
#include "antipgd/diagnostics.hpp"
#include "antipgd/experiments.hpp"
#include "antipgd/parallel.hpp"
#include "antipgd/recursion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// The acceptance suite. Each criterion returns its sub-checks and its
// wall-clock time; a criterion passes when every check holds and it finishes
// inside its time budget.

namespace antipgd {

enum class Relation { Less, LessEqual, Greater, GreaterEqual };

inline std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::Less: return "<";
        case Relation::LessEqual: return "<=";
        case Relation::Greater: return ">";
        case Relation::GreaterEqual: return ">=";
    }
    return "?";
}

struct Check {
    std::string name;
    double value = 0.0;
    Relation relation = Relation::LessEqual;
    double threshold = 0.0;

    bool passed() const {
        if (!std::isfinite(value)) {
            return false;
        }
        switch (relation) {
            case Relation::Less: return value < threshold;
            case Relation::LessEqual: return value <= threshold;
            case Relation::Greater: return value > threshold;
            case Relation::GreaterEqual: return value >= threshold;
        }
        return false;
    }
};

struct CriterionResult {
    int id = 0;
    std::string title;
    std::vector<Check> checks;
    double seconds = 0.0;
    double budget_seconds = 0.0;
    /// Set for checks that are satisfied by an alternative condition.
    std::string note;

    bool within_budget() const { return seconds <= budget_seconds; }

    bool passed() const {
        if (!within_budget() || checks.empty()) {
            return false;
        }
        for (const auto& c : checks) {
            if (!c.passed()) {
                return false;
            }
        }
        return true;
    }
};

inline CriterionResult make_result(int id, std::string title, double budget_seconds) {
    CriterionResult r;
    r.id = id;
    r.title = std::move(title);
    r.budget_seconds = budget_seconds;
    return r;
}

using NuFunction = std::function<std::vector<double>(std::span<const double>)>;

struct VerifyOptions {
    std::uint64_t base_seed = 20220;
    unsigned workers = 1;
    IncrementOrder increment_order = IncrementOrder::Forward;
    /// Replaceable so that a corrupted recursion can be shown to fail.
    NuFunction nu = [](std::span<const double> r) { return nu_sequence(r); };
    /// Criterion ids to run; empty runs all of them.
    std::vector<int> only;

    bool wanted(int id) const { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); }
};

namespace verify_detail {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (const double x : xs) {
        s += x;
    }
    return xs.empty() ? std::nan("") : s / static_cast<double>(xs.size());
}

inline Vector standard_normal_vector(Index n, Xoshiro256pp& rng, double scale = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        v[i] = scale * rng.standard_normal();
    }
    return v;
}

/// Runs `config` for seeds 0..n_seeds-1 (seed i = derive_seed(base, config.name, i)).
inline std::vector<Trajectory> run_seeds(const RunConfig& config, const Landscape& landscape, std::uint64_t base,
                                         int n_seeds, unsigned workers) {
    std::vector<Trajectory> out(static_cast<std::size_t>(n_seeds));
    parallel_for(out.size(), workers, [&](std::size_t i) {
        out[i] = run(config, landscape, derive_seed(base, config.name, i));
    });
    return out;
}

inline double final_mean(const std::vector<Trajectory>& runs, const std::function<double(const TrajectoryRow&)>& f) {
    std::vector<double> xs;
    for (const auto& t : runs) {
        xs.push_back(t.diverged || t.rows.empty() ? std::nan("") : f(t.rows.back()));
    }
    return mean(xs);
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------
// 1. Recursion Monte Carlo against the constant-rho closed form

inline CriterionResult verify_constant_rho(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(1, "recursion MC matches constant-rho closed form", 30.0);
    const Index d = 50;
    const double sigma2 = 0.01;
    const Index K = 500;
    for (const double rho : {0.5, 0.9}) {
        for (const auto mode : {Correlation::Anticorrelated, Correlation::Uncorrelated}) {
            const RhoSpec spec{.mode = recursion::Constant{rho}, .horizon = K};
            const NoiseSpec noise{.distribution = Distribution::Gaussian,
                                  .sigma = std::sqrt(sigma2),
                                  .correlation = mode,
                                  .dim = d,
                                  .seed = derive_seed(opt.base_seed, "constant_rho", mode == Correlation::Anticorrelated ? 0 : 1) ^
                                          static_cast<std::uint64_t>(rho * 1000)};
            const auto sim = simulate_recursion(spec, noise, 2000, nullptr, opt.workers);
            const double closed = expected_sqnorm_const_rho(rho, K - 1, 0.0, d, sigma2, mode);
            r.checks.push_back({.name = "rel_err rho=" + format_double(rho) + " " + std::string(to_string(mode)),
                                .value = std::abs(sim.mean.back() - closed) / closed,
                                .relation = Relation::LessEqual,
                                .threshold = 0.05});
        }
    }
    r.checks.push_back({.name = "limit_anti rho=0.9 |x-0.5263|",
                        .value = std::abs(limit_const_rho(0.9, d, sigma2, Correlation::Anticorrelated) - 0.5263),
                        .relation = Relation::LessEqual,
                        .threshold = 5e-5});
    r.checks.push_back({.name = "limit_uncorr rho=0.9 |x-2.6316|",
                        .value = std::abs(limit_const_rho(0.9, d, sigma2, Correlation::Uncorrelated) - 2.6316),
                        .relation = Relation::LessEqual,
                        .threshold = 5e-5});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 2. Stochastic rho ~ U[0, 1] stays below 2 d sigma^2

inline CriterionResult verify_stochastic_rho(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(2, "stochastic rho MC bounded by 2 d sigma^2", 30.0);
    const Index d = 20;
    const double sigma2 = 0.01;
    const RhoSpec spec{.mode = recursion::UniformStochastic{0.0, 1.0}, .horizon = 2000};
    const NoiseSpec noise{.distribution = Distribution::Gaussian,
                          .sigma = std::sqrt(sigma2),
                          .correlation = Correlation::Anticorrelated,
                          .dim = d,
                          .seed = derive_seed(opt.base_seed, "stochastic_rho", 0)};
    const auto sim = simulate_recursion(spec, noise, 2000, nullptr, opt.workers);
    r.checks.push_back({.name = "mc_mean_at_K",
                        .value = sim.mean.back(),
                        .relation = Relation::LessEqual,
                        .threshold = 2.0 * static_cast<double>(d) * sigma2 + 3.0 * sim.std_error.back()});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 3. nu_k <= 1 on random sequences

inline CriterionResult verify_nu_bound(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(3, "nu recursion bounded by one", 5.0);
    Xoshiro256pp rng(derive_seed(opt.base_seed, "nu", 0));
    std::vector<double> rhos(1000);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
        for (double& x : rhos) {
            x = rng.uniform01();
        }
        for (const double v : opt.nu(rhos)) {
            worst = std::max(worst, std::isfinite(v) ? v : HUGE_VAL);
        }
    }
    r.checks.push_back({.name = "max_nu", .value = worst, .relation = Relation::LessEqual, .threshold = 1.0});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 4 and 5. Widening valley exit sides

inline std::pair<CriterionResult, CriterionResult> verify_widening_valley(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    ValleySettings settings;
    settings.eta_rule = ValleyEtaRule::AlphaOverD;
    const WideningValley wv(settings.d);
    const Index steps = 100000;
    auto configure = [&](Variant v) {
        RunConfig c = valley_config(settings, v, steps);
        c.record_every = steps / 10;
        c.increment_order = opt.increment_order;
        return c;
    };
    const auto pgd = verify_detail::run_seeds(configure(Variant::PGD), wv, opt.base_seed, 5, opt.workers);
    const auto anti = verify_detail::run_seeds(configure(Variant::AntiPGD), wv, opt.base_seed, 5, opt.workers);
    const double seconds = clock.seconds();

    auto u_final = [](const TrajectoryRow& row) { return row.u_sqnorm.value_or(std::nan("")); };
    auto trace_final = [](const TrajectoryRow& row) { return row.hessian_trace; };

    CriterionResult exit = make_result(4, "widening valley: Anti-PGD exits left, PGD exits right", 120.0);
    const double alpha_d = settings.alpha * settings.D;
    const double d_over_alpha = settings.D / settings.alpha;
    exit.checks.push_back({.name = "anti_mean_u_sqnorm",
                           .value = verify_detail::final_mean(anti, u_final),
                           .relation = Relation::LessEqual,
                           .threshold = 1.1 * alpha_d});
    const double pgd_u = verify_detail::final_mean(pgd, u_final);
    Check pgd_check{.name = "pgd_mean_u_sqnorm", .value = pgd_u, .relation = Relation::GreaterEqual,
                    .threshold = 0.9 * d_over_alpha};
    if (!pgd_check.passed()) {
        // Accept a PGD mean that is still strictly increasing at every checkpoint.
        bool increasing = true;
        for (std::size_t k = 1; k < pgd.front().rows.size(); ++k) {
            std::vector<double> now;
            std::vector<double> before;
            for (const auto& t : pgd) {
                if (t.rows.size() > k) {
                    now.push_back(u_final(t.rows[k]));
                    before.push_back(u_final(t.rows[k - 1]));
                }
            }
            increasing = increasing && verify_detail::mean(now) > verify_detail::mean(before);
        }
        if (increasing) {
            exit.note = "PGD below 0.9 D/alpha but strictly increasing";
            pgd_check.threshold = -HUGE_VAL;
        }
    }
    exit.checks.push_back(pgd_check);
    exit.seconds = seconds;

    CriterionResult trace = make_result(5, "widening valley: final Hessian trace either side of D", 120.0);
    trace.checks.push_back({.name = "anti_mean_trace",
                            .value = verify_detail::final_mean(anti, trace_final),
                            .relation = Relation::Less,
                            .threshold = settings.D});
    trace.checks.push_back({.name = "pgd_mean_trace",
                            .value = verify_detail::final_mean(pgd, trace_final),
                            .relation = Relation::Greater,
                            .threshold = settings.D});
    trace.seconds = seconds;
    trace.note = "shares the runs of criterion 4";
    return {exit, trace};
}

// ---------------------------------------------------------------------------
// 6. Exact conditional mean against the modified-loss step

inline double conditional_mean_residual(const Landscape& l, const Vector& z, double eta, double sigma) {
    const Vector exact = conditional_mean_exact(l, z, eta, sigma);
    const Vector predicted = z - eta * modified_grad(default_modified_loss(l, sigma * sigma), z);
    return (exact - predicted).norm();
}

inline CriterionResult verify_conditional_mean(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(6, "conditional mean follows the modified loss", 5.0);
    Xoshiro256pp rng(derive_seed(opt.base_seed, "conditional_mean", 0));
    const double eta = 0.1;
    const std::vector<double> sigmas = {0.2, 0.1, 0.05, 0.025};

    // Smooth non-polynomial slice: the remainder must shrink like sigma^4.
    const LogCosh lc(Matrix::NullaryExpr(3, 3, [&rng](Index, Index) { return rng.standard_normal(); }));
    const Vector z_lc = verify_detail::standard_normal_vector(3, rng, 0.5);
    std::vector<double> residuals;
    for (const double s : sigmas) {
        residuals.push_back(conditional_mean_residual(lc, z_lc, eta, s));
    }
    r.checks.push_back({.name = "logcosh_dim3_loglog_slope",
                        .value = loglog_slope(sigmas, residuals),
                        .relation = Relation::GreaterEqual,
                        .threshold = 3.5});

    // Cubic gradient on the valley slice: the expansion is exact.
    const WideningValley wv(2);
    const Vector z_wv = verify_detail::standard_normal_vector(3, rng);
    double worst_wv = 0.0;
    for (const double s : sigmas) {
        const double scale = 1.0 + (eta * wv.grad(z_wv)).norm();
        worst_wv = std::max(worst_wv, conditional_mean_residual(wv, z_wv, eta, s) / scale);
    }
    r.checks.push_back({.name = "valley_dim3_scaled_residual", .value = worst_wv, .relation = Relation::LessEqual,
                        .threshold = 1e-12});

    const DiagonalQuadratic q(Vector::Constant(1, 2.0));
    double worst_q = 0.0;
    for (const double s : sigmas) {
        worst_q = std::max(worst_q, conditional_mean_residual(q, Vector::Constant(1, 0.8), eta, s));
    }
    r.checks.push_back(
        {.name = "quadratic_1d_residual", .value = worst_q, .relation = Relation::LessEqual, .threshold = 1e-12});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Landscapes shared by criteria 7 and 9

struct NamedLandscape {
    std::unique_ptr<Landscape> landscape;
    double eta = 0.01;
    double init_scale = 1.0;
};

inline std::vector<NamedLandscape> acceptance_landscapes(std::uint64_t base_seed) {
    std::vector<NamedLandscape> out;
    out.push_back({std::make_unique<WideningValley>(100), 0.01, 0.3});
    out.push_back({std::make_unique<SparseValley>(default_sparse_valley()), 0.01, 0.3});
    out.push_back({std::make_unique<QuadRegression>(default_regression_data(derive_seed(base_seed, "regression_data", 0))),
                   RegressionDefaults::eta, RegressionDefaults::init_scale});
    out.push_back({std::make_unique<MatrixSensing>(default_sensing_data(derive_seed(base_seed, "sensing_data", 0))),
                   SensingDefaults::eta, SensingDefaults::init_scale});
    return out;
}

// ---------------------------------------------------------------------------
// 7. Zero-noise equivalences and w-form / z-form agreement

inline CriterionResult verify_equivalences(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(7, "zero-noise equivalence and w/z-form agreement", 10.0);
    const Index steps = 500;
    double mismatches = 0.0;
    double worst_gap = 0.0;
    for (const auto& entry : acceptance_landscapes(opt.base_seed)) {
        const Landscape& l = *entry.landscape;
        RunConfig gd;
        gd.name = "equivalence";
        gd.variant = Variant::GD;
        gd.eta = entry.eta;
        gd.steps = steps;
        gd.init.scale = entry.init_scale;
        gd.keep_snapshots = true;
        gd.increment_order = opt.increment_order;
        const Trajectory base = run(gd, l, opt.base_seed);
        for (const Variant v : {Variant::PGD, Variant::AntiPGD}) {
            RunConfig c = gd;
            c.variant = v;
            c.sigma = 0.0;
            const Trajectory t = run(c, l, opt.base_seed);
            if (t.snapshots.size() != base.snapshots.size()) {
                mismatches += 1.0;
                continue;
            }
            for (std::size_t i = 0; i < t.snapshots.size(); ++i) {
                if (t.snapshots[i] != base.snapshots[i]) {
                    mismatches += 1.0;
                }
            }
        }

        // w-form Anti-PGD and z-form on the same raw draws.
        const double sigma = 0.01;
        Xoshiro256pp rng(derive_seed(opt.base_seed, "zform_init", 0));
        const Vector w0 = verify_detail::standard_normal_vector(l.dim(), rng, entry.init_scale);
        const NoiseSpec spec{.distribution = Distribution::Gaussian,
                             .sigma = sigma,
                             .correlation = Correlation::Anticorrelated,
                             .dim = l.dim(),
                             .seed = derive_seed(opt.base_seed, "zform_noise", 0)};
        NoiseStream w_stream(spec);
        NoiseStream z_stream(spec);
        w_stream.next_xi();
        Vector xi = z_stream.next_xi();
        Vector w = w0;
        Vector z = w0 - xi;
        for (Index n = 0; n < steps; ++n) {
            w = step(Variant::AntiPGD, l, w, w_stream, entry.eta, true);
            z = step_zform(l, z, xi, entry.eta);
            xi = z_stream.next_xi();
            worst_gap = std::max(worst_gap, (w - xi - z).cwiseAbs().maxCoeff());
        }
    }
    r.checks.push_back({.name = "bitwise_mismatched_iterates", .value = mismatches, .relation = Relation::LessEqual,
                        .threshold = 0.0});
    r.checks.push_back(
        {.name = "max_abs_wz_gap", .value = worst_gap, .relation = Relation::LessEqual, .threshold = 1e-12});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 8. Displacement moments on the zero landscape

inline CriterionResult verify_zero_landscape(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(8, "zero landscape: telescoping vs random walk", 30.0);
    const Index d = 50;
    const double sigma = 0.1;
    const Index steps = 1000;
    const std::size_t samples = 2000;
    const ZeroLoss zero(d);
    for (const Variant v : {Variant::AntiPGD, Variant::PGD}) {
        RunConfig c;
        c.name = std::string("zero_") + std::string(to_string(v));
        c.variant = v;
        c.eta = 1.0;
        c.steps = steps;
        c.distribution = Distribution::Gaussian;
        c.sigma = sigma;
        c.record_every = steps;
        c.init.kind = InitialPoint::Kind::Given;
        c.init.point = Vector::Zero(d);
        c.increment_order = opt.increment_order;
        std::vector<double> sq(samples);
        parallel_for(samples, opt.workers, [&](std::size_t i) {
            sq[i] = run(c, zero, derive_seed(opt.base_seed, c.name, i)).final_params.squaredNorm();
        });
        const double expected = v == Variant::AntiPGD ? 2.0 * static_cast<double>(d) * sigma * sigma
                                                      : static_cast<double>(steps * d) * sigma * sigma;
        r.checks.push_back({.name = std::string(to_string(v)) + "_rel_err_vs_" + format_double(expected),
                            .value = std::abs(verify_detail::mean(sq) - expected) / expected,
                            .relation = Relation::LessEqual,
                            .threshold = 0.05});
    }
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 9. Finite-difference validation of every landscape

inline CriterionResult verify_finite_differences(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(9, "analytic derivatives match finite differences", 30.0);
    for (const auto& entry : acceptance_landscapes(opt.base_seed)) {
        const Landscape& l = *entry.landscape;
        Xoshiro256pp rng(derive_seed(opt.base_seed, "fd_points", 0));
        std::vector<Vector> points;
        for (int p = 0; p < 20; ++p) {
            points.push_back(verify_detail::standard_normal_vector(l.dim(), rng, entry.init_scale));
        }
        const FiniteDiffReport report = finite_diff_check(l, points);
        r.checks.push_back({.name = l.name() + "_grad_rel_err", .value = report.max_grad_rel_error,
                            .relation = Relation::Less, .threshold = 1e-5});
        r.checks.push_back({.name = l.name() + "_trace_rel_err", .value = report.max_trace_rel_error,
                            .relation = Relation::Less, .threshold = 1e-4});
    }
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 10 and 11. Anti-PGD finds flatter, better-generalising minima

inline void add_ordering_checks(CriterionResult& r, const std::vector<Trajectory>& gd, const std::vector<Trajectory>& pgd,
                                const std::vector<Trajectory>& anti) {
    auto trace = [](const TrajectoryRow& row) { return row.hessian_trace; };
    auto test = [](const TrajectoryRow& row) { return row.test_loss.value_or(std::nan("")); };
    const double anti_trace = verify_detail::final_mean(anti, trace);
    const double anti_test = verify_detail::final_mean(anti, test);
    r.checks.push_back({.name = "anti_trace_vs_pgd", .value = anti_trace, .relation = Relation::Less,
                        .threshold = verify_detail::final_mean(pgd, trace)});
    r.checks.push_back({.name = "anti_trace_vs_gd", .value = anti_trace, .relation = Relation::Less,
                        .threshold = verify_detail::final_mean(gd, trace)});
    r.checks.push_back({.name = "anti_test_vs_pgd", .value = anti_test, .relation = Relation::Less,
                        .threshold = verify_detail::final_mean(pgd, test)});
    r.checks.push_back({.name = "anti_test_vs_gd", .value = anti_test, .relation = Relation::Less,
                        .threshold = verify_detail::final_mean(gd, test)});
}

inline CriterionResult verify_regression(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(10, "quadratic regression: Anti-PGD flatter and better on test", 300.0);
    const QuadRegression qr(default_regression_data(derive_seed(opt.base_seed, "regression_data", 0)));
    auto runs = [&](Variant v) {
        RunConfig c = regression_config(v);
        c.record_every = c.steps;
        c.increment_order = opt.increment_order;
        return verify_detail::run_seeds(c, qr, opt.base_seed, 5, opt.workers);
    };
    add_ordering_checks(r, runs(Variant::GD), runs(Variant::PGD), runs(Variant::AntiPGD));
    r.seconds = clock.seconds();
    return r;
}

inline CriterionResult verify_sensing(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(11, "matrix sensing: Anti-PGD flatter and better on test", 600.0);
    const MatrixSensing ms(default_sensing_data(derive_seed(opt.base_seed, "sensing_data", 0)));
    auto runs = [&](Variant v) {
        RunConfig c = sensing_config(v);
        c.record_every = c.steps;
        c.increment_order = opt.increment_order;
        return verify_detail::run_seeds(c, ms, opt.base_seed, 5, opt.workers);
    };
    add_ordering_checks(r, runs(Variant::GD), runs(Variant::PGD), runs(Variant::AntiPGD));
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 12. Average regularised gradient along the z-form iterates

inline CriterionResult verify_regularised_gradient(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(12, "z-form drives the regularised gradient down", 120.0);
    const QuadRegression qr(default_regression_data(derive_seed(opt.base_seed, "regression_data", 0)));
    const double sigma = 0.05;
    const ModifiedLossSpec spec = default_modified_loss(qr, sigma * sigma);
    const int seeds = 5;

    auto average = [&](double eta, Index steps, std::vector<double>* ratios) {
        std::vector<double> avg(seeds);
        std::vector<double> start(seeds);
        parallel_for(static_cast<std::size_t>(seeds), opt.workers, [&](std::size_t s) {
            Xoshiro256pp rng(derive_seed(opt.base_seed, "zform_start", s));
            const Vector z0 = verify_detail::standard_normal_vector(qr.dim(), rng, RegressionDefaults::init_scale);
            NoiseStream stream({.distribution = Distribution::SymmetricBernoulli,
                                .sigma = sigma,
                                .correlation = Correlation::Anticorrelated,
                                .dim = qr.dim(),
                                .seed = derive_seed(opt.base_seed, "zform_noise", s)});
            const ZFormRun zr = run_zform(qr, z0, stream, eta, steps);
            avg[s] = avg_reg_grad_sqnorm(zr.iterates, spec);
            start[s] = modified_grad(spec, z0).squaredNorm();
        });
        if (ratios != nullptr) {
            for (int s = 0; s < seeds; ++s) {
                ratios->push_back(avg[static_cast<std::size_t>(s)] / start[static_cast<std::size_t>(s)]);
            }
        }
        return verify_detail::mean(avg);
    };

    std::vector<double> ratios;
    const double base = average(0.01, 10000, &ratios);
    const double halved = average(0.005, 20000, nullptr);
    r.checks.push_back({.name = "max_seed_ratio_to_start",
                        .value = *std::max_element(ratios.begin(), ratios.end()),
                        .relation = Relation::Less,
                        .threshold = 0.1});
    r.checks.push_back({.name = "mean_avg_halved_eta", .value = halved, .relation = Relation::LessEqual,
                        .threshold = base});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// 13. Expected sharpness

inline CriterionResult verify_sharpness(const VerifyOptions& opt) {
    const verify_detail::Stopwatch clock;
    CriterionResult r = make_result(13, "expected sharpness estimator", 10.0);
    const DiagonalQuadratic q(Vector::Constant(1, 2.0));
    const auto est = expected_sharpness_mc(q, Vector::Zero(1), 0.1, 100000, derive_seed(opt.base_seed, "sharpness", 0));
    r.checks.push_back({.name = "quadratic_abs_err", .value = std::abs(est.value - 0.01),
                        .relation = Relation::LessEqual, .threshold = 3.0 * est.std_error});

    const WideningValley wv(10);
    Xoshiro256pp rng(derive_seed(opt.base_seed, "sharpness_point", 0));
    const Vector w = wv.point(verify_detail::standard_normal_vector(10, rng, 0.5), 0.0);
    const double s = 1e-2;
    const auto vest = expected_sharpness_mc(wv, w, s, 100000, derive_seed(opt.base_seed, "sharpness", 1));
    const double trace = wv.hessian_trace(w);
    r.checks.push_back({.name = "valley_trace_rel_err",
                        .value = std::abs(vest.value / (0.5 * s * s) - trace) / trace,
                        .relation = Relation::Less,
                        .threshold = 0.05});
    r.seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------

inline std::vector<CriterionResult> run_acceptance(const VerifyOptions& opt,
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
    std::vector<CriterionResult> out;
    auto emit = [&](CriterionResult r) {
        if (on_result) {
            on_result(r);
        }
        out.push_back(std::move(r));
    };
    using Criterion = CriterionResult (*)(const VerifyOptions&);
    const std::pair<int, Criterion> before[] = {
        {1, verify_constant_rho}, {2, verify_stochastic_rho}, {3, verify_nu_bound}};
    const std::pair<int, Criterion> after[] = {
        {6, verify_conditional_mean}, {7, verify_equivalences}, {8, verify_zero_landscape},
        {9, verify_finite_differences}, {10, verify_regression}, {11, verify_sensing},
        {12, verify_regularised_gradient}, {13, verify_sharpness}};
    for (const auto& [id, fn] : before) {
        if (opt.wanted(id)) {
            emit(fn(opt));
        }
    }
    if (opt.wanted(4) || opt.wanted(5)) {
        auto [exit, trace] = verify_widening_valley(opt);
        if (opt.wanted(4)) {
            emit(std::move(exit));
        }
        if (opt.wanted(5)) {
            emit(std::move(trace));
        }
    }
    for (const auto& [id, fn] : after) {
        if (opt.wanted(id)) {
            emit(fn(opt));
        }
    }
    return out;
}

inline std::string short_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string summary_line(const CriterionResult& r) {
    std::string line = std::string(r.passed() ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.title + " (" +
                       short_double(r.seconds) + "s / " +
                       short_double(r.budget_seconds) + "s)";
    for (const auto& c : r.checks) {
        line += "; " + c.name + "=" + short_double(c.value) + " " + std::string(to_string(c.relation)) + " " +
                short_double(c.threshold) + (c.passed() ? "" : " FAILED");
    }
    if (!r.note.empty()) {
        line += "; note: " + r.note;
    }
    if (!r.within_budget()) {
        line += "; over time budget";
    }
    return line;
}

/// Report CSV: one row per check plus one runtime row per criterion.
inline std::string report_csv(const std::vector<CriterionResult>& results) {
    std::string out = schema_comment("verify");
    out += "criterion,check,value,threshold,relation,pass\n";
    for (const auto& r : results) {
        for (const auto& c : r.checks) {
            out += join_row({std::to_string(r.id), c.name, format_double(c.value), format_double(c.threshold),
                             std::string(to_string(c.relation)), c.passed() ? "1" : "0"});
        }
        out += join_row({std::to_string(r.id), "runtime_seconds", format_double(r.seconds),
                         format_double(r.budget_seconds), "<=", r.within_budget() ? "1" : "0"});
    }
    return out;
}

}  // namespace antipgd

#endif  // ANTIPGD_VERIFICATION_HPP
