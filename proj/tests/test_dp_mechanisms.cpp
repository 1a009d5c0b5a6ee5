#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedsim/dp_mechanisms.hpp"
#include "support/oracles.hpp"

using namespace fedsim;
using namespace fedsim::dp;

TEST(Sensitivity, SmallCases) {
  EXPECT_DOUBLE_EQ(logreg_sensitivity({2, 1, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(logreg_sensitivity({1, 2, 1.0}), 1.0);
  EXPECT_NEAR(logreg_sensitivity({3, 150, 0.01}), 2.0 / (3.0 * 150.0 * 0.01), 1e-15);
  EXPECT_NEAR(logreg_sensitivity({3, 150, 0.01}), 0.4444444444444444, 1e-12);
}

TEST(Sensitivity, RejectsNonPositiveFields) {
  EXPECT_THROW(logreg_sensitivity({0, 1, 1.0}), std::domain_error);
  EXPECT_THROW(logreg_sensitivity({1, 0, 1.0}), std::domain_error);
  EXPECT_THROW(logreg_sensitivity({1, 1, 0.0}), std::domain_error);
  EXPECT_THROW(logreg_sensitivity({-1, 1, 1.0}), std::domain_error);
  EXPECT_THROW(logreg_sensitivity({1, 1, -0.5}), std::domain_error);
}

TEST(Sensitivity, StrictlyDecreasingInEachArgument) {
  const SensitivityParams base{3, 20, 0.1};
  const double s = logreg_sensitivity(base);
  EXPECT_LT(logreg_sensitivity({4, 20, 0.1}), s);
  EXPECT_LT(logreg_sensitivity({3, 21, 0.1}), s);
  EXPECT_LT(logreg_sensitivity({3, 20, 0.11}), s);
}

TEST(LaplaceSample, MomentsAtUnitScale) {
  RandomStream rng(2024);
  std::vector<double> draws(1'000'000);
  for (double& d : draws) d = laplace_sample(1.0, rng);
  EXPECT_NEAR(oracle::mean(draws), 0.0, 0.01);
  EXPECT_NEAR(oracle::variance(draws), 2.0, 0.05);
}

TEST(LaplaceSample, ZeroScaleIsDomainError) {
  RandomStream rng(1);
  EXPECT_THROW(laplace_sample(0.0, rng), std::domain_error);
  EXPECT_THROW(laplace_sample(-1.0, rng), std::domain_error);
  EXPECT_THROW(laplace_sample(std::nan(""), rng), std::domain_error);
}

TEST(LaplaceSample, IdenticalSeedsGiveIdenticalSequences) {
  RandomStream a(77), b(77);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(laplace_sample(0.7, a), laplace_sample(0.7, b));
}

TEST(LaplaceSample, MatchesDistribution) {
  RandomStream rng(31);
  std::vector<double> draws(100'000);
  for (double& d : draws) d = laplace_sample(2.0, rng);
  EXPECT_GT(oracle::ks_p_value(draws, [](double x) { return oracle::laplace_cdf(x, 2.0); }), 0.01);
}

TEST(GaussianSample, SigmaAndEmpiricalSpread) {
  const double expected = std::sqrt(2.0 * std::log(25.0));
  EXPECT_NEAR(gaussian_sigma(1.0, 1.0, 0.05), expected, 1e-12);
  EXPECT_NEAR(expected, 2.537, 1e-3);
  RandomStream rng(5);
  std::vector<double> draws(1'000'000);
  for (double& d : draws) d = gaussian_sample(1.0, 1.0, 0.05, rng);
  EXPECT_NEAR(std::sqrt(oracle::variance(draws)), expected, 0.01 * expected);
  EXPECT_NEAR(oracle::mean(draws), 0.0, 0.01);
}

TEST(GaussianSample, DeterministicAndValidated) {
  RandomStream a(9), b(9);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(gaussian_sample(1.0, 2.0, 0.1, a), gaussian_sample(1.0, 2.0, 0.1, b));
  RandomStream rng(1);
  EXPECT_THROW(gaussian_sample(1.0, 1.0, 0.0, rng), std::domain_error);
  EXPECT_THROW(gaussian_sample(1.0, 1.0, 1.0, rng), std::domain_error);
  EXPECT_THROW(gaussian_sample(0.0, 1.0, 0.1, rng), std::domain_error);
  EXPECT_THROW(gaussian_sample(1.0, 0.0, 0.1, rng), std::domain_error);
}

TEST(GammaSample, MeanAndVarianceForSmallShape) {
  RandomStream rng(12);
  for (double shape : {0.2, 1.0 / 3.0, 1.0, 2.5}) {
    std::vector<double> draws(200'000);
    for (double& d : draws) d = gamma_sample(shape, 2.0, rng);
    EXPECT_NEAR(oracle::mean(draws), shape * 2.0, 0.02 * std::max(1.0, shape * 2.0)) << "shape " << shape;
    EXPECT_NEAR(oracle::variance(draws), shape * 4.0, 0.05 * shape * 4.0) << "shape " << shape;
  }
}

TEST(GammaDifferenceShare, SingleShareIsLaplace) {
  RandomStream rng(3);
  std::vector<double> draws(100'000);
  for (double& d : draws) d = gamma_difference_share(1, 1.0, rng);
  EXPECT_GT(oracle::ks_p_value(draws, [](double x) { return oracle::laplace_cdf(x, 1.0); }), 0.01);
}

TEST(GammaDifferenceShare, FiveSharesSumToLaplace) {
  RandomStream rng(4);
  std::vector<double> sums(100'000);
  for (double& s : sums) {
    s = 0.0;
    for (int i = 0; i < 5; ++i) s += gamma_difference_share(5, 2.0, rng);
  }
  EXPECT_GT(oracle::ks_p_value(sums, [](double x) { return oracle::laplace_cdf(x, 2.0); }), 0.01);
}

TEST(GammaDifferenceShare, ReconstructionAcrossGrid) {
  std::uint64_t seed = 100;
  for (int n : {1, 2, 3, 5, 10}) {
    for (double scale : {0.5, 1.0, 2.0}) {
      RandomStream rng(seed++);
      std::vector<double> sums(100'000);
      for (double& s : sums) {
        s = 0.0;
        for (int i = 0; i < n; ++i) s += gamma_difference_share(n, scale, rng);
      }
      EXPECT_GT(oracle::ks_p_value(sums, [scale](double x) { return oracle::laplace_cdf(x, scale); }), 0.01)
          << "n=" << n << " scale=" << scale;
    }
  }
}

TEST(GammaDifferenceShare, SingleShareHasZeroMean) {
  RandomStream rng(8);
  std::vector<double> draws(1'000'000);
  for (double& d : draws) d = gamma_difference_share(3, 1.0, rng);
  const double sd = std::sqrt(oracle::variance(draws));
  EXPECT_LE(std::abs(oracle::mean(draws)), 3.0 * sd / 1000.0);
}

TEST(GammaDifferenceShare, RejectsBadArguments) {
  RandomStream rng(1);
  EXPECT_THROW(gamma_difference_share(0, 1.0, rng), std::domain_error);
  EXPECT_THROW(gamma_difference_share(2, 0.0, rng), std::domain_error);
}

TEST(DpSpecValidate, Rules) {
  EXPECT_NO_THROW((DpSpec{Mechanism::Laplace, 1.0, 0.0, Placement::Local}.validate()));
  EXPECT_THROW((DpSpec{Mechanism::Laplace, 0.0, 0.0, Placement::Local}.validate()), std::domain_error);
  EXPECT_THROW((DpSpec{Mechanism::Laplace, 1.0, 1.0, Placement::Local}.validate()), std::domain_error);
  EXPECT_THROW((DpSpec{Mechanism::Gaussian, 1.0, 0.0, Placement::Local}.validate()), std::domain_error);
  EXPECT_THROW((DpSpec{Mechanism::DistributedLaplace, 1.0, 0.0, Placement::Local}.validate()), std::domain_error);
  EXPECT_THROW((DpSpec{Mechanism::Laplace, 1.0, 0.0, Placement::Distributed}.validate()), std::domain_error);
  EXPECT_NO_THROW((DpSpec{Mechanism::DistributedLaplace, 1.0, 0.0, Placement::Distributed}.validate()));
}

TEST(PerturbWeights, RecordIsExactNoise) {
  RandomStream rng(42);
  WeightMatrix w = to_wire(WeightMatrix{{0.25, -1.5, 3.0}, {2.0, 0.125, -0.75}});
  const WeightMatrix original = w;
  for (auto mech : {Mechanism::Laplace, Mechanism::Gaussian, Mechanism::DistributedLaplace}) {
    DpSpec spec{mech, 0.5, mech == Mechanism::Gaussian ? 0.01 : 0.0,
                mech == Mechanism::DistributedLaplace ? Placement::Distributed : Placement::Local};
    auto p = perturb_weights(w, spec, {3, 10, 0.1}, rng, 4, AgentId::client(1));
    EXPECT_TRUE((p.weights - p.record.values).bit_equal(w));
    EXPECT_TRUE(w.bit_equal(original));
    EXPECT_EQ(p.record.iteration, 4);
    EXPECT_EQ(p.record.owner, AgentId::client(1));
    EXPECT_FALSE(p.weights.bit_equal(w));
  }
}

TEST(PerturbWeights, HugeEpsilonBarelyMoves) {
  RandomStream rng(6);
  const WeightMatrix w = to_wire(WeightMatrix{{0.5, 1.0}, {-2.0, 4.0}});
  for (int trial = 0; trial < 100; ++trial) {
    auto p = perturb_weights(w, {Mechanism::Laplace, 1e9, 0.0, Placement::Local}, {1, 1, 1.0}, rng);
    EXPECT_LT(max_abs_difference(p.weights, w), 1e-6);
  }
}

TEST(PerturbWeights, MeanOfThreeDistributedSharesIsLaplace) {
  const SensitivityParams sens{3, 10, 0.5};
  const DpSpec spec{Mechanism::DistributedLaplace, 2.0, 0.0, Placement::Distributed};
  const double lambda = logreg_sensitivity(sens) / spec.epsilon;
  RandomStream a(1), b(2), c(3);
  const WeightMatrix zero = WeightMatrix::zeros(2, 5);
  std::vector<double> means;
  while (means.size() < 100'000) {
    auto pa = perturb_weights(zero, spec, sens, a);
    auto pb = perturb_weights(zero, spec, sens, b);
    auto pc = perturb_weights(zero, spec, sens, c);
    for (std::size_t e = 0; e < zero.size(); ++e) means.push_back((pa.weights[e] + pb.weights[e] + pc.weights[e]) / 3.0);
  }
  EXPECT_GT(oracle::ks_p_value(means, [lambda](double x) { return oracle::laplace_cdf(x, lambda); }), 0.01);
}

TEST(PerturbWeights, RequiresWireEncodedInput) {
  RandomStream rng(1);
  WeightMatrix w{{0.1}};
  EXPECT_THROW(perturb_weights(w, {Mechanism::Laplace, 1.0, 0.0, Placement::Local}, {1, 1, 1.0}, rng),
               std::invalid_argument);
}

TEST(LaplaceScale, LocalAndDistributed) {
  const SensitivityParams sens{2, 4, 0.5};
  EXPECT_DOUBLE_EQ(laplace_scale({Mechanism::Laplace, 2.0, 0.0, Placement::Local}, sens), 0.25);
  EXPECT_DOUBLE_EQ(laplace_scale({Mechanism::DistributedLaplace, 2.0, 0.0, Placement::Distributed}, sens), 0.25);
}
