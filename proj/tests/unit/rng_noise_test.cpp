#include "antipgd/noise.hpp"
#include "antipgd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace antipgd {
namespace {

// Reference outputs of xoshiro256++ for the SplitMix64-expanded seed 0,
// computed with an independent Python port of the reference C code.
TEST(Xoshiro256pp, MatchesReferenceSequence) {
    Xoshiro256pp rng(0);
    const std::vector<std::uint64_t> expected = {
        0x53175d61490b23dfULL, 0x61da6f3dc380d507ULL, 0x5c0fdf91ec9a7bfcULL, 0x02eebf8c3bbe5e1aULL};
    for (const auto e : expected) {
        EXPECT_EQ(rng.next_u64(), e);
    }
}

TEST(Xoshiro256pp, BelowStaysInRange) {
    Xoshiro256pp rng(7);
    for (int i = 0; i < 10000; ++i) {
        EXPECT_LT(rng.below(13), 13U);
    }
}

TEST(DeriveSeed, DistinctNamesAndIndicesGiveDistinctSeeds) {
    EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
    EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
    EXPECT_EQ(derive_seed(1, "a", 3), derive_seed(1, "a", 3));
    EXPECT_EQ(derive_seed(5, "a", 3) ^ derive_seed(9, "a", 3), 5U ^ 9U);
}

NoiseSpec spec(Distribution dist, double sigma, Correlation corr, Index dim, std::uint64_t seed = 11) {
    return {.distribution = dist, .sigma = sigma, .correlation = corr, .dim = dim, .seed = seed};
}

TEST(NoiseStream, ZeroSigmaGivesZeros) {
    for (const auto dist : {Distribution::SymmetricBernoulli, Distribution::Gaussian}) {
        NoiseStream s(spec(dist, 0.0, Correlation::Anticorrelated, 5));
        for (int n = 0; n < 10; ++n) {
            EXPECT_TRUE(s.next_perturbation().isZero(0.0));
        }
    }
}

TEST(NoiseStream, BernoulliSupport) {
    NoiseStream s(spec(Distribution::SymmetricBernoulli, 0.5, Correlation::Uncorrelated, 4));
    for (int n = 0; n < 100; ++n) {
        for (const double x : s.next_xi()) {
            EXPECT_TRUE(x == 0.5 || x == -0.5);
        }
    }
}

TEST(NoiseStream, BernoulliMoments) {
    NoiseStream s(spec(Distribution::SymmetricBernoulli, 1.0, Correlation::Uncorrelated, 3));
    const int n = 100000;
    Vector sum = Vector::Zero(3);
    Vector sumsq = Vector::Zero(3);
    for (int k = 0; k < n; ++k) {
        const Vector& x = s.next_xi();
        sum += x;
        sumsq += x.cwiseProduct(x);
    }
    for (Index i = 0; i < 3; ++i) {
        const double mean = sum[i] / n;
        const double var = sumsq[i] / n - mean * mean;
        EXPECT_NEAR(mean, 0.0, 0.02);
        EXPECT_NEAR(var, 1.0, 0.02);
    }
}

TEST(NoiseStream, AnticorrelatedBernoulliIncrementSupport) {
    const double sigma = 0.3;
    NoiseStream s(spec(Distribution::SymmetricBernoulli, sigma, Correlation::Anticorrelated, 6));
    s.next_perturbation();
    for (int n = 1; n < 200; ++n) {
        for (const double x : s.next_perturbation()) {
            EXPECT_TRUE(x == 0.0 || x == 2 * sigma || x == -2 * sigma) << x;
        }
    }
}

TEST(NoiseStream, AnticorrelatedPartialSumsTelescopeExactly) {
    for (const auto dist : {Distribution::SymmetricBernoulli, Distribution::Gaussian}) {
        NoiseStream anti(spec(dist, 0.7, Correlation::Anticorrelated, 8, 3));
        NoiseStream raw(spec(dist, 0.7, Correlation::Uncorrelated, 8, 3));
        Vector partial = Vector::Zero(8);
        for (int n = 0; n < 500; ++n) {
            partial += anti.next_perturbation();
            const Vector& xi = raw.next_xi();
            // Each partial sum is (xi_n - xi_{n-1}) + xi_{n-1}; exact for Bernoulli, 1 ulp-level for Gaussian.
            if (dist == Distribution::SymmetricBernoulli) {
                EXPECT_EQ(partial, xi);
            } else {
                EXPECT_LT((partial - xi).cwiseAbs().maxCoeff(), 1e-12);
            }
            EXPECT_EQ(anti.last_xi(), xi);
        }
    }
}

TEST(NoiseStream, UncorrelatedPerturbationEqualsRawDraw) {
    NoiseStream a(spec(Distribution::Gaussian, 0.5, Correlation::Uncorrelated, 4, 99));
    NoiseStream b(spec(Distribution::Gaussian, 0.5, Correlation::Uncorrelated, 4, 99));
    for (int n = 0; n < 50; ++n) {
        EXPECT_EQ(a.next_perturbation(), b.next_xi());
    }
}

TEST(NoiseStream, BernoulliSquaresEqualVarianceExactly) {
    NoiseStream s(spec(Distribution::SymmetricBernoulli, 0.25, Correlation::Uncorrelated, 10));
    for (int n = 0; n < 100; ++n) {
        EXPECT_TRUE((s.next_xi().array().square() == 0.0625).all());
    }
}

TEST(NoiseStream, Reproducibility) {
    NoiseStream a(spec(Distribution::Gaussian, 1.0, Correlation::Anticorrelated, 5, 123));
    NoiseStream b(spec(Distribution::Gaussian, 1.0, Correlation::Anticorrelated, 5, 123));
    NoiseStream c(spec(Distribution::Gaussian, 1.0, Correlation::Anticorrelated, 5, 124));
    bool differs = false;
    for (int n = 0; n < 10; ++n) {
        const Vector x = a.next_perturbation();
        EXPECT_EQ(x, b.next_perturbation());
        differs = differs || x != c.next_perturbation();
    }
    EXPECT_TRUE(differs);
}

// Property: E[eps_n] = 0 within 3 standard errors for every mode and step index.
TEST(NoiseStream, PerturbationsAreCentred) {
    for (const auto dist : {Distribution::SymmetricBernoulli, Distribution::Gaussian}) {
        for (const auto corr : {Correlation::Uncorrelated, Correlation::Anticorrelated}) {
            const int paths = 40000;
            const int horizon = 4;
            std::vector<double> sum(horizon, 0.0);
            std::vector<double> sumsq(horizon, 0.0);
            for (int p = 0; p < paths; ++p) {
                NoiseStream s(spec(dist, 1.0, corr, 1, derive_seed(77, "centred", p)));
                for (int n = 0; n < horizon; ++n) {
                    const double x = s.next_perturbation()[0];
                    sum[n] += x;
                    sumsq[n] += x * x;
                }
            }
            for (int n = 0; n < horizon; ++n) {
                const double mean = sum[n] / paths;
                const double se = std::sqrt((sumsq[n] / paths - mean * mean) / paths);
                EXPECT_LT(std::abs(mean), 3 * se + 1e-15) << "step " << n;
            }
        }
    }
}

TEST(Lag1Autocorrelation, AnticorrelatedIsMinusHalf) {
    EXPECT_NEAR(lag1_autocorrelation(spec(Distribution::SymmetricBernoulli, 1.0, Correlation::Anticorrelated, 10),
                                     100000),
                -0.5, 0.02);
    EXPECT_NEAR(lag1_autocorrelation(spec(Distribution::Gaussian, 0.3, Correlation::Anticorrelated, 10), 100000),
                -0.5, 0.02);
}

TEST(Lag1Autocorrelation, UncorrelatedIsZero) {
    EXPECT_NEAR(lag1_autocorrelation(spec(Distribution::SymmetricBernoulli, 1.0, Correlation::Uncorrelated, 10),
                                     100000),
                0.0, 0.02);
}

TEST(Lag1Autocorrelation, RejectsTooFewSamples) {
    EXPECT_THROW(lag1_autocorrelation(spec(Distribution::Gaussian, 1.0, Correlation::Uncorrelated, 2), 999),
                 ValidationError);
    EXPECT_THROW(lag1_autocorrelation(spec(Distribution::Gaussian, 0.0, Correlation::Uncorrelated, 2), 5000),
                 ValidationError);
}

}  // namespace
}  // namespace antipgd
