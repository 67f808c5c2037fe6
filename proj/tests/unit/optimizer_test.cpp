#include "antipgd/matrix_sensing.hpp"
#include "antipgd/optimizers.hpp"
#include "antipgd/quad_regression.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <vector>

namespace antipgd {
namespace {

NoiseSpec noise(Correlation corr, double sigma, Index d, std::uint64_t seed,
                Distribution dist = Distribution::Gaussian) {
    return {.distribution = dist, .sigma = sigma, .correlation = corr, .dim = d, .seed = seed};
}

std::vector<std::unique_ptr<Landscape>> landscapes() {
    std::vector<std::unique_ptr<Landscape>> out;
    out.push_back(std::make_unique<WideningValley>(6));
    Vector b(2);
    b << 0.4, -0.8;
    out.push_back(std::make_unique<SparseValley>(3, b));
    out.push_back(std::make_unique<QuadRegression>(gen_quad_regression(10, 6, 2, 4, 3)));
    out.push_back(std::make_unique<MatrixSensing>(gen_matrix_sensing(3, 1, 8, 0.05, 4, 3)));
    out.push_back(std::make_unique<ZeroLoss>(4));
    return out;
}

RunConfig base_config(Variant variant, double sigma, Index steps) {
    RunConfig c;
    c.name = "cfg";
    c.variant = variant;
    c.eta = 0.01;
    c.steps = steps;
    c.sigma = sigma;
    c.init.scale = 0.5;
    c.keep_snapshots = true;
    return c;
}

TEST(Step, ZeroSigmaVariantsCoincideWithGDBitwise) {
    for (const auto& l : landscapes()) {
        Trajectory gd = run(base_config(Variant::GD, 0.0, 200), *l, 42);
        for (const Variant v : {Variant::PGD, Variant::AntiPGD}) {
            Trajectory other = run(base_config(v, 0.0, 200), *l, 42);
            ASSERT_EQ(other.snapshots.size(), gd.snapshots.size());
            for (std::size_t i = 0; i < gd.snapshots.size(); ++i) {
                EXPECT_EQ(other.snapshots[i], gd.snapshots[i]) << l->name();
            }
        }
    }
}

TEST(Step, NoiseInactiveIsPlainGradientStep) {
    const WideningValley wv(3);
    const Vector w = wv.point(Vector::Constant(3, 0.5), 1.2);
    NoiseStream stream(noise(Correlation::Anticorrelated, 0.3, 4, 1));
    const Vector gd = w - 0.1 * wv.grad(w);
    EXPECT_EQ(step(Variant::AntiPGD, wv, w, stream, 0.1, false), gd);
    EXPECT_EQ(stream.step(), 0U);
}

TEST(Step, PGDAddsRawDrawAndAntiAddsIncrement) {
    const WideningValley wv(3);
    const Vector w = wv.point(Vector::Constant(3, 0.5), 1.2);
    const Vector gd = w - 0.1 * wv.grad(w);

    NoiseStream pgd_stream(noise(Correlation::Uncorrelated, 0.3, 4, 9));
    NoiseStream twin(noise(Correlation::Uncorrelated, 0.3, 4, 9));
    EXPECT_EQ(step(Variant::PGD, wv, w, pgd_stream, 0.1, true), gd + twin.next_xi());

    NoiseStream anti_stream(noise(Correlation::Anticorrelated, 0.3, 4, 9));
    NoiseStream twin2(noise(Correlation::Anticorrelated, 0.3, 4, 9));
    anti_stream.next_xi();
    const Vector xi0 = twin2.next_xi();
    const Vector xi1 = twin2.next_xi();
    EXPECT_EQ(step(Variant::AntiPGD, wv, w, anti_stream, 0.1, true), gd + (xi1 - xi0));
}

TEST(Step, BernoulliPGDResidualHasVarianceSigmaSquaredExactly) {
    const WideningValley wv(5);
    const Vector w = wv.point(Vector::Constant(5, 0.3), 0.7);
    NoiseStream stream(noise(Correlation::Uncorrelated, 0.2, 6, 4, Distribution::SymmetricBernoulli));
    const Vector gd = w - 0.05 * wv.grad(w);
    for (int n = 0; n < 50; ++n) {
        const Vector residual = step(Variant::PGD, wv, w, stream, 0.05, true) - gd;
        for (Index i = 0; i < residual.size(); ++i) {
            EXPECT_NEAR(residual[i] * residual[i], 0.04, 1e-15);
        }
    }
}

TEST(ZForm, MatchesWFormOnEveryLandscape) {
    for (const auto& l : landscapes()) {
        const Index d = l->dim();
        Vector w0(d);
        Xoshiro256pp rng(8);
        for (Index i = 0; i < d; ++i) {
            w0[i] = 0.5 * rng.standard_normal();
        }
        NoiseStream w_stream(noise(Correlation::Anticorrelated, 0.05, d, 13));
        NoiseStream z_stream(noise(Correlation::Anticorrelated, 0.05, d, 13));
        w_stream.next_xi();
        Vector xi = z_stream.next_xi();
        Vector w = w0;
        Vector z = w0 - xi;
        double worst = 0.0;
        for (int n = 0; n < 300; ++n) {
            w = step(Variant::AntiPGD, *l, w, w_stream, 0.01, true);
            z = step_zform(*l, z, xi, 0.01);
            xi = z_stream.next_xi();
            worst = std::max(worst, (w - xi - z).cwiseAbs().maxCoeff());
        }
        EXPECT_LE(worst, 1e-12) << l->name();
    }
}

TEST(ZForm, ZeroNoiseIsGradientDescent) {
    const WideningValley wv(2);
    const Vector z = wv.point(Vector::Constant(2, 1.0), 0.5);
    EXPECT_EQ(step_zform(wv, z, Vector::Zero(3), 0.1), z - 0.1 * wv.grad(z));
}

TEST(ZForm, FirstStepFromOrigin) {
    const WideningValley wv(2);
    Vector xi(3);
    xi << 0.1, -0.2, 0.3;
    // grad L(xi) = (v^2 u, |u|^2 v) = (0.09 * (0.1, -0.2), 0.05 * 0.3)
    Vector expected(3);
    expected << -0.5 * 0.009, -0.5 * -0.018, -0.5 * 0.015;
    EXPECT_LT((step_zform(wv, Vector::Zero(3), xi, 0.5) - expected).norm(), 1e-16);
}

TEST(LabelNoise, ZeroSigmaIsGradientStep) {
    const QuadRegression qr(gen_quad_regression(5, 4, 2, 3, 1));
    const Vector w = Vector::Constant(5, 0.4);
    NoiseStream stream(noise(Correlation::Uncorrelated, 0.0, 1, 1));
    EXPECT_EQ(label_noise_step(qr, w, stream, 0.1), w - 0.1 * qr.grad(w));
}

TEST(LabelNoise, StepIsGradientOfNoisedLossByFiniteDifferences) {
    const QuadRegression qr(gen_quad_regression(5, 4, 2, 3, 1));
    Vector w(5);
    w << 0.3, -0.6, 0.9, 0.1, -0.2;
    NoiseStream stream(noise(Correlation::Uncorrelated, 0.7, 1, 5));
    NoiseStream twin(noise(Correlation::Uncorrelated, 0.7, 1, 5));
    const double eta = 0.1;
    const Vector next = label_noise_step(qr, w, stream, eta);
    const double xi = twin.next_xi()[0];
    // Noised loss whose gradient the step follows: L(w) + xi sum_i f_w(x_i).
    auto noised = [&](const Vector& x) { return qr.loss(x) + xi * qr.model_output_sum(x); };
    const Vector fd = fd_gradient(noised, w, 1e-6);
    EXPECT_LT(relative_error((w - next) / eta, fd), 1e-8);
}

TEST(LabelNoise, MeanStepIsGradientStep) {
    const QuadRegression qr(gen_quad_regression(4, 5, 2, 3, 2));
    const Vector w = Vector::Constant(4, 0.7);
    const Vector gd = w - 0.05 * qr.grad(w);
    NoiseStream stream(noise(Correlation::Uncorrelated, 0.5, 1, 3));
    const int n = 20000;
    Vector sum = Vector::Zero(4);
    Vector sumsq = Vector::Zero(4);
    for (int k = 0; k < n; ++k) {
        const Vector diff = label_noise_step(qr, w, stream, 0.05) - gd;
        sum += diff;
        sumsq += diff.cwiseProduct(diff);
    }
    for (Index i = 0; i < 4; ++i) {
        const double mean = sum[i] / n;
        const double se = std::sqrt((sumsq[i] / n - mean * mean) / n);
        EXPECT_LT(std::abs(mean), 4 * se);
    }
}

TEST(LabelNoise, UnsupportedLandscapeThrows) {
    const WideningValley wv(2);
    NoiseStream stream(noise(Correlation::Uncorrelated, 0.1, 1, 1));
    EXPECT_THROW(label_noise_step(wv, Vector::Zero(3), stream, 0.1), ValidationError);
}

TEST(Run, GDOnValleyFloorIsStationary) {
    const WideningValley wv(10);
    RunConfig c = base_config(Variant::GD, 0.3, 100);
    c.init.kind = InitialPoint::Kind::ValleyFloor;
    c.init.valley_sqnorm = 4.0;
    const Trajectory t = run(c, wv, 7);
    for (std::size_t i = 1; i < t.snapshots.size(); ++i) {
        EXPECT_EQ(t.snapshots[i], t.snapshots[0]);
    }
    EXPECT_NEAR(t.rows.front().u_sqnorm.value(), 4.0, 1e-12);
    EXPECT_EQ(t.snapshots[0][10], 0.0);
}

TEST(Run, RecordsEveryTenStepsPlusEndpoints) {
    const WideningValley wv(3);
    RunConfig c = base_config(Variant::PGD, 0.01, 1000);
    c.record_every = 10;
    const Trajectory t = run(c, wv, 1);
    ASSERT_EQ(t.rows.size(), 101U);
    EXPECT_EQ(t.rows.front().step, 0);
    EXPECT_EQ(t.rows.back().step, 1000);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        EXPECT_GT(t.rows[i].step, t.rows[i - 1].step);
    }
    RunConfig odd = c;
    odd.steps = 25;
    EXPECT_EQ(run(odd, wv, 1).rows.back().step, 25);
}

TEST(Run, DeterministicForEqualSeeds) {
    const QuadRegression qr(gen_quad_regression(10, 6, 2, 4, 3));
    for (const Variant v : {Variant::PGD, Variant::AntiPGD, Variant::SGD, Variant::AntiSGD, Variant::LabelNoiseGD}) {
        RunConfig c = base_config(v, 0.05, 100);
        c.batch_size = uses_minibatch(v) ? 2 : 0;
        const Trajectory a = run(c, qr, 77);
        const Trajectory b = run(c, qr, 77);
        const Trajectory other = run(c, qr, 78);
        EXPECT_EQ(a.final_params, b.final_params);
        EXPECT_NE(a.final_params, other.final_params);
    }
}

TEST(Run, AfterNoiseStopTheTrajectoryIsAGDPath) {
    const QuadRegression qr(gen_quad_regression(10, 6, 2, 4, 3));
    for (const Variant v : {Variant::PGD, Variant::AntiPGD, Variant::LabelNoiseGD}) {
        RunConfig c = base_config(v, 0.05, 200);
        c.noise_stop = 150;
        const Trajectory noisy = run(c, qr, 5);
        RunConfig gd = base_config(Variant::GD, 0.0, 50);
        gd.init.kind = InitialPoint::Kind::Given;
        gd.init.point = noisy.snapshots[150];
        const Trajectory tail = run(gd, qr, 5);
        for (std::size_t i = 0; i <= 50; ++i) {
            EXPECT_EQ(tail.snapshots[i], noisy.snapshots[150 + i]);
        }
    }
}

TEST(Run, NoiseBeforeStartIsAbsent) {
    const WideningValley wv(3);
    RunConfig c = base_config(Variant::PGD, 0.1, 40);
    c.noise_start = 20;
    const Trajectory noisy = run(c, wv, 3);
    RunConfig gd = base_config(Variant::GD, 0.0, 40);
    const Trajectory clean = run(gd, wv, 3);
    for (std::size_t i = 0; i <= 20; ++i) {
        EXPECT_EQ(noisy.snapshots[i], clean.snapshots[i]);
    }
    EXPECT_NE(noisy.snapshots[21], clean.snapshots[21]);
}

TEST(Run, ZeroLandscapeDisplacementMoments) {
    const ZeroLoss zero(20);
    const int paths = 2000;
    const double sigma = 0.1;
    const Index steps = 100;
    double anti = 0.0;
    double pgd = 0.0;
    for (int p = 0; p < paths; ++p) {
        RunConfig a = base_config(Variant::AntiPGD, sigma, steps);
        a.record_every = steps;
        const Trajectory ta = run(a, zero, derive_seed(1, "zero", p));
        anti += (ta.final_params - ta.snapshots.front()).squaredNorm();
        RunConfig g = base_config(Variant::PGD, sigma, steps);
        g.record_every = steps;
        const Trajectory tg = run(g, zero, derive_seed(2, "zero", p));
        pgd += (tg.final_params - tg.snapshots.front()).squaredNorm();
    }
    EXPECT_NEAR(anti / paths, 2 * 20 * sigma * sigma, 0.05 * 0.4);
    EXPECT_NEAR(pgd / paths, steps * 20 * sigma * sigma, 0.05 * 20.0);
}

TEST(Run, IncrementSignConventionOnlyFlipsTheNoise) {
    const ZeroLoss zero(5);
    RunConfig fwd = base_config(Variant::AntiPGD, 0.2, 30);
    RunConfig bwd = fwd;
    bwd.increment_order = IncrementOrder::Backward;
    fwd.init.kind = bwd.init.kind = InitialPoint::Kind::Given;
    fwd.init.point = bwd.init.point = Vector::Zero(5);
    const Trajectory a = run(fwd, zero, 4);
    const Trajectory b = run(bwd, zero, 4);
    EXPECT_LT((a.final_params + b.final_params).norm(), 1e-15);
}

TEST(Run, FirstDrawDirectStartsWithRawDraw) {
    const ZeroLoss zero(3);
    RunConfig c = base_config(Variant::AntiPGD, 0.2, 10);
    c.anti_start = AntiStart::FirstDrawDirect;
    c.init.kind = InitialPoint::Kind::Given;
    c.init.point = Vector::Zero(3);
    const Trajectory t = run(c, zero, 4);
    NoiseStream twin(noise(Correlation::Anticorrelated, 0.2, 3, derive_seed(4, "noise", 0)));
    Vector last;
    for (int n = 0; n < 10; ++n) {
        last = twin.next_xi();
    }
    // Partial sums of (xi_1 - xi_0, ...) starting from an implicit zero telescope to xi_N.
    EXPECT_LT((t.final_params - last).norm(), 1e-15);
}

TEST(Run, GDNeverIncreasesValleyLossWhenStable) {
    const WideningValley wv(8);
    RunConfig c = base_config(Variant::GD, 0.0, 2000);
    c.eta = 0.05;
    c.init.scale = 0.6;
    const Trajectory t = run(c, wv, 10);
    for (std::size_t i = 0; i < t.snapshots.size(); ++i) {
        const Vector& w = t.snapshots[i];
        ASSERT_LE(c.eta, 2.0 / std::max(w[8] * w[8], wv.u_sqnorm(w)));
        if (i > 0) {
            EXPECT_LE(t.rows[i].train_loss, t.rows[i - 1].train_loss);
        }
    }
}

TEST(Run, DivergenceStopsTheRun) {
    DiagonalQuadratic q(Vector::Constant(2, 10.0));
    RunConfig c = base_config(Variant::GD, 0.0, 10000);
    c.eta = 1.0;
    const Trajectory t = run(c, q, 1);
    EXPECT_TRUE(t.diverged);
    ASSERT_TRUE(t.diverged_at.has_value());
    EXPECT_LT(*t.diverged_at, 10000);
    for (const auto& row : t.rows) {
        EXPECT_TRUE(std::isfinite(row.train_loss));
    }
}

TEST(Run, ValidationCollectsErrors) {
    const WideningValley wv(2);
    RunConfig c = base_config(Variant::SGD, -1.0, 10);
    c.eta = 0.0;
    c.noise_stop = 20;
    const auto errors = c.validation_errors(wv);
    EXPECT_GE(errors.size(), 4U);
    EXPECT_THROW(run(c, wv, 1), ValidationError);
    RunConfig label = base_config(Variant::LabelNoiseGD, 0.1, 10);
    EXPECT_THROW(run(label, wv, 1), ValidationError);
}

TEST(EpochSampler, EpochAverageOfBatchGradientsIsFullGradient) {
    const QuadRegression qr(gen_quad_regression(7, 12, 2, 3, 11));
    const Vector w = Vector::LinSpaced(7, -0.5, 0.8);
    EpochSampler sampler(12, 3, 5);
    ASSERT_EQ(sampler.batches_per_epoch(), 4U);
    for (int epoch = 0; epoch < 3; ++epoch) {
        Vector avg = Vector::Zero(7);
        std::vector<int> seen(12, 0);
        for (int b = 0; b < 4; ++b) {
            const auto batch = sampler.next_batch();
            for (const Index i : batch) {
                ++seen[static_cast<std::size_t>(i)];
            }
            avg += qr.per_example_grad(w, batch);
        }
        avg /= 4.0;
        for (const int s : seen) {
            EXPECT_EQ(s, 1);
        }
        EXPECT_LT((avg - qr.grad(w)).norm(), 1e-14 * (1.0 + qr.grad(w).norm()));
    }
}

}  // namespace
}  // namespace antipgd
