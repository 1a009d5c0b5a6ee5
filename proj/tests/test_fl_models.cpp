#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fedsim/data_pipeline.hpp"
#include "fedsim/fl_models.hpp"
#include "support/oracles.hpp"

using namespace fedsim;
using namespace fedsim::fl;

namespace {

Dataset blobs(int classes, int features, int rows, double separation, std::uint64_t seed) {
  RandomStream rng(seed);
  return synth_dataset(classes, features, rows, separation, rng);
}

std::vector<double> as_vector(const WeightMatrix& w) { return {w.values().begin(), w.values().end()}; }

// Exhaustive minibatch-free gradient descent, used as a reference trainer.
WeightMatrix reference_descent(const Dataset& d, double alpha, int steps, double lr) {
  const std::size_t C = static_cast<std::size_t>(d.num_classes()), F = d.num_features();
  std::vector<double> w(C * (F + 1), 0.0);
  const double h = 1e-6;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto plus = w, minus = w;
      plus[i] += h;
      minus[i] -= h;
      g[i] = (oracle::logreg_loss(plus, C, F, d.features(), d.labels(), alpha) -
              oracle::logreg_loss(minus, C, F, d.features(), d.labels(), alpha)) /
             (2 * h);
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
  return WeightMatrix({C, F + 1}, w);
}

}  // namespace

TEST(Gradient, MatchesCentralDifferences) {
  const Dataset d = blobs(3, 4, 60, 2.0, 11);
  RandomStream rng(5);
  const double alpha = 0.05;
  for (int probe = 0; probe < 10; ++probe) {
    WeightMatrix w({3, 5});
    for (double& v : w.values()) v = rng.standard_normal();
    const auto lg = loss_and_gradient(w, d, alpha);
    EXPECT_NEAR(lg.loss, oracle::logreg_loss(as_vector(w), 3, 4, d.features(), d.labels(), alpha), 1e-10);
    std::vector<double> numeric(w.size());
    const double h = 1e-5;
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto plus = as_vector(w), minus = as_vector(w);
      plus[i] += h;
      minus[i] -= h;
      numeric[i] = (oracle::logreg_loss(plus, 3, 4, d.features(), d.labels(), alpha) -
                    oracle::logreg_loss(minus, 3, 4, d.features(), d.labels(), alpha)) /
                   (2 * h);
      diff += (numeric[i] - lg.gradient[i]) * (numeric[i] - lg.gradient[i]);
      norm += numeric[i] * numeric[i];
    }
    EXPECT_LT(std::sqrt(diff) / std::sqrt(norm), 1e-4) << "probe " << probe;
  }
}

TEST(SgdTrain, FixedPointStaysPut) {
  // One point per class placed symmetrically with zero weights: the data
  // gradient and the L2 term both vanish.
  Dataset d(1, 2, {0.0, 0.0}, {0, 1});
  const WeightMatrix init = initial_weights(d);
  RandomStream rng(1);
  TrainConfig cfg{1, 0.5, 0.1, 2};
  EXPECT_TRUE(sgd_train(d, init, cfg, rng).bit_equal(init));
}

TEST(SgdTrain, RejectsZeroStepsAndEmptyData) {
  Dataset d(1, 2, {0.0, 1.0}, {0, 1});
  RandomStream rng(1);
  EXPECT_THROW(sgd_train(d, initial_weights(d), TrainConfig{0, 0.1, 0.1, 1}, rng), std::invalid_argument);
  EXPECT_THROW(sgd_train(d, initial_weights(d), TrainConfig{1, 0.0, 0.1, 1}, rng), std::invalid_argument);
  Dataset empty(1, 2, {}, {});
  EXPECT_THROW(sgd_train(empty, initial_weights(d), TrainConfig{}, rng), std::invalid_argument);
  EXPECT_THROW(sgd_train(d, WeightMatrix::zeros(3, 2), TrainConfig{}, rng), std::invalid_argument);
}

TEST(SgdTrain, SeparableTwoClassSet) {
  const Dataset d = blobs(2, 2, 40, 6.0, 3);
  RandomStream rng(4);
  const auto w = sgd_train(d, initial_weights(d), TrainConfig{200, 0.1, 0.01, 8}, rng);
  EXPECT_GE(evaluate(w, d), 0.95);
  // The reference trainer on the same data agrees on the training accuracy target.
  EXPECT_GE(evaluate(reference_descent(d, 0.01, 200, 0.1), d), 0.95);
}

TEST(SgdTrain, DeterministicUnderSeed) {
  const Dataset d = blobs(3, 3, 50, 2.0, 6);
  RandomStream a(9), b(9);
  EXPECT_TRUE(sgd_train(d, initial_weights(d), TrainConfig{}, a).bit_equal(sgd_train(d, initial_weights(d), TrainConfig{}, b)));
}

TEST(SgdTrain, FullBatchMatchesReferenceDescent) {
  const Dataset d = blobs(2, 2, 12, 2.0, 8);
  RandomStream rng(1);
  const auto w = sgd_train(d, initial_weights(d), TrainConfig{25, 0.2, 0.1, 12}, rng);
  EXPECT_LT(max_abs_difference(w, reference_descent(d, 0.1, 25, 0.2)), 1e-6);
}

TEST(FederatedAverage, Examples) {
  const std::vector<WeightMatrix> two{WeightMatrix{{1, 2}, {3, 4}}, WeightMatrix{{3, 4}, {5, 6}}};
  EXPECT_TRUE(federated_average(two).bit_equal(WeightMatrix{{2, 3}, {4, 5}}));
  const std::vector<WeightMatrix> one{WeightMatrix{{1.5, -2}}};
  EXPECT_TRUE(federated_average(one).bit_equal(one[0]));
  const WeightMatrix m = to_wire(WeightMatrix{{0.1, 0.7, -3.3}});
  const std::vector<WeightMatrix> copies(5, m);
  EXPECT_TRUE(federated_average(copies).bit_equal(m));
  EXPECT_THROW(federated_average(std::vector<WeightMatrix>{}), std::invalid_argument);
  const std::vector<WeightMatrix> mismatched{WeightMatrix{{1, 2}}, WeightMatrix{{1}, {2}}};
  EXPECT_THROW(federated_average(mismatched), std::invalid_argument);
}

TEST(WeightedAverage, ProportionalToWeights) {
  const std::vector<WeightMatrix> models{WeightMatrix{{0.0}}, WeightMatrix{{4.0}}};
  const std::vector<double> weights{1.0, 3.0};
  EXPECT_DOUBLE_EQ(weighted_average(models, weights)[0], 3.0);
}

TEST(ClientRoundAlg1, NoNoisePathEqualsTraining) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream t1(5), n1(6), t2(5);
  const auto update = client_round_alg1(initial_weights(d), d, TrainConfig{}, std::nullopt, {1, 30, 0.01}, {t1, n1});
  EXPECT_TRUE(update.clean.bit_equal(to_wire(sgd_train(d, initial_weights(d), TrainConfig{}, t2))));
  EXPECT_TRUE(update.perturbed.bit_equal(update.clean));
}

TEST(ClientRoundAlg1, RecordMatchesPerturbedMinusTrained) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream t(5), n(6);
  const dp::DpSpec spec{dp::Mechanism::DistributedLaplace, 1.0, 0.0, dp::Placement::Distributed};
  const auto update = client_round_alg1(initial_weights(d), d, TrainConfig{}, spec, {3, 30, 0.01}, {t, n}, 2);
  EXPECT_TRUE((update.perturbed - update.clean).bit_equal(update.noise.values));
  EXPECT_EQ(update.noise.iteration, 2);
}

TEST(ClientRoundAlg1, ThreeClientAverageCarriesLaplaceNoise) {
  const Dataset d = blobs(2, 1, 20, 3.0, 2);
  const dp::SensitivityParams sens{3, 20, 0.5};
  const dp::DpSpec spec{dp::Mechanism::DistributedLaplace, 1.0, 0.0, dp::Placement::Distributed};
  const double lambda = dp::laplace_scale(spec, sens);
  TrainConfig cfg{5, 0.1, 0.5, 20};
  RandomStream n0(10), n1(11), n2(12);
  std::vector<double> residuals;
  while (residuals.size() < 50'000) {
    RandomStream t0(1), t1(1), t2(1);
    const auto a = client_round_alg1(initial_weights(d), d, cfg, spec, sens, {t0, n0});
    const auto b = client_round_alg1(initial_weights(d), d, cfg, spec, sens, {t1, n1});
    const auto c = client_round_alg1(initial_weights(d), d, cfg, spec, sens, {t2, n2});
    const std::vector<WeightMatrix> noisy{a.perturbed, b.perturbed, c.perturbed};
    const std::vector<WeightMatrix> clean{a.clean, b.clean, c.clean};
    const auto diff = federated_average(noisy) - federated_average(clean);
    for (double v : diff.values()) residuals.push_back(v);
  }
  EXPECT_GT(oracle::ks_p_value(residuals, [lambda](double x) { return oracle::laplace_cdf(x, lambda); }), 0.01);
}

TEST(ClientRoundAlg2, FirstRoundAlwaysRetrains) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream t(1), n(2);
  const auto u = client_round_alg2(initial_weights(d), d, std::nullopt, 1e-3, TrainConfig{}, std::nullopt,
                                   {1, 30, 0.01}, {t, n});
  EXPECT_TRUE(u.retrained);
}

TEST(ClientRoundAlg2, ReusesCacheWhenServerMatches) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream t(1), n(2);
  const dp::DpSpec spec{dp::Mechanism::Laplace, 1.0, 0.0, dp::Placement::Local};
  const auto first = client_round_alg2(initial_weights(d), d, std::nullopt, 1e-3, TrainConfig{}, spec,
                                       {1, 30, 0.01}, {t, n});
  const auto second = client_round_alg2(first.perturbed, d, first, 1e-3, TrainConfig{}, spec, {1, 30, 0.01}, {t, n});
  EXPECT_FALSE(second.retrained);
  EXPECT_TRUE(second.perturbed.bit_equal(first.perturbed));
  EXPECT_TRUE(second.clean.bit_equal(first.clean));
  EXPECT_TRUE(second.noise.values.bit_equal(first.noise.values));
}

TEST(ClientRoundAlg2, IgnoresServerWeightsWhenRetraining) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream t1(1), n1(2), t2(1), n2(2);
  WeightMatrix far = initial_weights(d);
  far[0] = 50.0;
  const auto a = client_round_alg2(far, d, std::nullopt, 1e-3, TrainConfig{}, std::nullopt, {1, 30, 0.01}, {t1, n1});
  const auto b = client_round_alg2(initial_weights(d), d, std::nullopt, 1e-3, TrainConfig{}, std::nullopt,
                                   {1, 30, 0.01}, {t2, n2});
  EXPECT_TRUE(a.clean.bit_equal(b.clean));
}

TEST(ClientRoundAlg2, LossNonIncreasingAsDataGrows) {
  const Dataset all = blobs(2, 2, 120, 2.0, 13);
  std::vector<std::size_t> rows;
  std::optional<ClientUpdate> cache;
  double previous = std::numeric_limits<double>::infinity();
  RandomStream t(3), n(4);
  TrainConfig cfg{400, 0.2, 0.05, 400};
  for (int it = 0; it < 4; ++it) {
    for (int i = 0; i < 30; ++i) rows.push_back(rows.size());
    const Dataset cumulative = all.subset(rows);
    WeightMatrix elsewhere = initial_weights(all);
    elsewhere[0] = 10.0;
    cache = client_round_alg2(elsewhere, cumulative, cache, 1e-3, cfg, std::nullopt, {1, 30, 0.05}, {t, n});
    ASSERT_TRUE(cache->retrained);
    const double loss = loss_and_gradient(cache->clean, all, 0.05).loss;
    EXPECT_LE(loss, previous + 1e-9) << "iteration " << it;
    previous = loss;
  }
}

TEST(Converged, InclusiveBoundary) {
  const WeightMatrix a{{0.0, 1.0}};
  EXPECT_TRUE(converged(a, a, 1e-9));
  const WeightMatrix b{{0.0, 1.5}};
  EXPECT_TRUE(converged(a, b, 0.5));
  const WeightMatrix c{{0.0, 2.0}};
  EXPECT_FALSE(converged(a, c, 0.5));
  EXPECT_THROW(converged(a, a, 0.0), std::invalid_argument);
  EXPECT_THROW(converged(a, a, std::numeric_limits<double>::infinity()), std::invalid_argument);
  EXPECT_THROW(converged(a, WeightMatrix{{0.0}}, 1.0), std::invalid_argument);
}

TEST(SubtractOwnNoise, SingleClientRecoversClean) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream t(1), n(2);
  const dp::DpSpec spec{dp::Mechanism::Laplace, 0.5, 0.0, dp::Placement::Local};
  const auto u = client_round_alg1(initial_weights(d), d, TrainConfig{}, spec, {1, 30, 0.01}, {t, n});
  const std::vector<WeightMatrix> only{u.perturbed};
  EXPECT_TRUE(subtract_own_noise(federated_average(only), u.noise, 1).bit_equal(u.clean));
}

TEST(SubtractOwnNoise, TwoClientsOneNoiseless) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  RandomStream ta(1), na(2), tb(3), nb(4);
  const dp::DpSpec spec{dp::Mechanism::Laplace, 0.5, 0.0, dp::Placement::Local};
  const auto a = client_round_alg1(initial_weights(d), d, TrainConfig{}, spec, {2, 30, 0.01}, {ta, na});
  const auto b = client_round_alg1(initial_weights(d), d, TrainConfig{}, std::nullopt, {2, 30, 0.01}, {tb, nb});
  const std::vector<WeightMatrix> sent{a.perturbed, b.perturbed};
  const std::vector<WeightMatrix> clean{a.clean, b.clean};
  EXPECT_TRUE(subtract_own_noise(federated_average(sent), a.noise, 2).bit_equal(federated_average(clean)));
}

TEST(SubtractOwnNoise, AllCorrectionsPlusNoiseReconstructCleanMean) {
  const Dataset d = blobs(3, 2, 30, 3.0, 1);
  const dp::DpSpec spec{dp::Mechanism::DistributedLaplace, 1.0, 0.0, dp::Placement::Distributed};
  std::vector<ClientUpdate> ups;
  for (std::uint64_t c = 0; c < 4; ++c) {
    RandomStream t(10 + c), n(20 + c);
    ups.push_back(client_round_alg1(initial_weights(d), d, TrainConfig{}, spec, {4, 30, 0.01}, {t, n}));
  }
  std::vector<WeightMatrix> sent, clean;
  for (const auto& u : ups) {
    sent.push_back(u.perturbed);
    clean.push_back(u.clean);
  }
  const auto fed = federated_average(sent);
  WeightMatrix total = WeightMatrix::zeros(fed.rows(), fed.cols());
  for (const auto& u : ups) total += subtract_own_noise(fed, u.noise, 4);
  WeightMatrix noise_sum = ups[0].noise.values;
  for (std::size_t i = 1; i < ups.size(); ++i) noise_sum += ups[i].noise.values;
  // (1/n) sum_i (fed - e_i / n) - (n - 1)/n^2 * sum_i e_i = fed - sum_i e_i / n
  WeightMatrix rebuilt = total;
  rebuilt /= 4.0;
  for (std::size_t e = 0; e < rebuilt.size(); ++e) rebuilt[e] -= noise_sum[e] * 3.0 / 16.0;
  EXPECT_LT(max_abs_difference(rebuilt, federated_average(clean)), 1e-9);
  // Without the rounding of the rescaling step the identity is exact:
  WeightMatrix direct = fed;
  WeightMatrix share = noise_sum;
  share /= 4.0;
  direct -= share;
  EXPECT_TRUE(direct.bit_equal(federated_average(clean)));
}

TEST(SubtractOwnNoise, CorrectionHelpsAccuracyOnMajority) {
  const Dataset train = blobs(3, 4, 60, 3.0, 40);
  const Dataset test = blobs(3, 4, 300, 3.0, 41);
  const dp::DpSpec spec{dp::Mechanism::Laplace, 1.0, 0.0, dp::Placement::Local};
  const dp::SensitivityParams sens{3, 60, 0.05};
  int better_or_equal = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    std::vector<ClientUpdate> ups;
    std::vector<WeightMatrix> sent;
    for (std::uint64_t c = 0; c < 3; ++c) {
      RandomStream t(trial * 10 + c), n(1000 + trial * 10 + c);
      ups.push_back(client_round_alg1(initial_weights(train), train, TrainConfig{100, 0.1, 0.05, 32}, spec, sens, {t, n}));
      sent.push_back(ups.back().perturbed);
    }
    const auto fed = federated_average(sent);
    if (evaluate(subtract_own_noise(fed, ups[0].noise, 3), test) >= evaluate(fed, test)) ++better_or_equal;
  }
  EXPECT_GT(better_or_equal, 10);
}

TEST(Evaluate, Examples) {
  Dataset two(1, 2, {-1.0, 1.0}, {0, 1});
  EXPECT_DOUBLE_EQ(evaluate(WeightMatrix{{-1.0, 0.0}, {1.0, 0.0}}, two), 1.0);
  const Dataset balanced = blobs(4, 3, 400, 2.0, 3);
  EXPECT_DOUBLE_EQ(evaluate(initial_weights(balanced), balanced), 0.25);
  EXPECT_EQ(predict(initial_weights(balanced), balanced.row(0)), 0);
  EXPECT_THROW(evaluate(initial_weights(balanced), Dataset(3, 4, {}, {})), std::invalid_argument);
}

TEST(Evaluate, ShiftInvariance) {
  const Dataset d = blobs(3, 2, 90, 2.0, 17);
  RandomStream rng(2);
  const auto w = sgd_train(d, initial_weights(d), TrainConfig{}, rng);
  WeightMatrix shifted = w;
  const std::vector<double> shift{0.3, -1.2, 4.0};
  for (std::size_t c = 0; c < shifted.rows(); ++c) {
    for (std::size_t j = 0; j < shifted.cols(); ++j) shifted(c, j) += shift[j];
  }
  for (std::size_t i = 0; i < d.rows(); ++i) EXPECT_EQ(predict(w, d.row(i)), predict(shifted, d.row(i)));
}
