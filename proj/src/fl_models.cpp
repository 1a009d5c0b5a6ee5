#include "fedsim/fl_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim::fl {

void TrainConfig::validate() const {
  if (local_steps < 1) throw std::invalid_argument("local_steps must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be positive");
  if (!(l2_alpha > 0.0) || !std::isfinite(l2_alpha)) throw std::invalid_argument("l2_alpha must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
}

WeightMatrix initial_weights(int num_classes, std::size_t num_features) {
  return WeightMatrix::zeros(static_cast<std::size_t>(num_classes), num_features + 1);
}

WeightMatrix initial_weights(const Dataset& data) { return initial_weights(data.num_classes(), data.num_features()); }

namespace {

void require_model_shape(const WeightMatrix& w, const Dataset& data, const char* what) {
  if (w.rows() != static_cast<std::size_t>(data.num_classes()) || w.cols() != data.num_features() + 1) {
    throw std::invalid_argument(std::string(what) + ": weights are " + std::to_string(w.rows()) + "x" +
                                std::to_string(w.cols()) + " but the data needs " +
                                std::to_string(data.num_classes()) + "x" + std::to_string(data.num_features() + 1));
  }
}

// Class scores W [x; 1].
void scores(const WeightMatrix& w, std::span<const double> x, std::vector<double>& out) {
  const std::size_t f = x.size();
  out.resize(w.rows());
  for (std::size_t c = 0; c < w.rows(); ++c) {
    auto wr = w.row(c);
    double s = wr[f];
    for (std::size_t j = 0; j < f; ++j) s += wr[j] * x[j];
    out[c] = s;
  }
}

// In-place softmax; returns log-sum-exp.
double softmax(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
  return zmax + std::log(total);
}

}  // namespace

LossGradient loss_and_gradient(const WeightMatrix& w, const Dataset& data, std::span<const std::size_t> rows,
                               double alpha) {
  require_model_shape(w, data, "loss_and_gradient");
  if (rows.empty()) throw std::invalid_argument("loss_and_gradient: no rows");
  const std::size_t f = data.num_features();
  LossGradient out{0.0, WeightMatrix(w.shape())};
  std::vector<double> z;
  for (std::size_t idx : rows) {
    auto x = data.row(idx);
    const int y = data.label(idx);
    scores(w, x, z);
    const double true_score = z[static_cast<std::size_t>(y)];
    const double lse = softmax(z);
    out.loss += lse - true_score;
    for (std::size_t c = 0; c < w.rows(); ++c) {
      const double residual = z[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
      for (std::size_t j = 0; j < f; ++j) out.gradient(c, j) += residual * x[j];
      out.gradient(c, f) += residual;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  out.loss *= inv_n;
  out.gradient *= inv_n;
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sq += w[i] * w[i];
    out.gradient[i] += alpha * w[i];
  }
  out.loss += 0.5 * alpha * sq;
  return out;
}

LossGradient loss_and_gradient(const WeightMatrix& w, const Dataset& data, double alpha) {
  std::vector<std::size_t> all(data.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_gradient(w, data, all, alpha);
}

WeightMatrix sgd_train(const Dataset& data, const WeightMatrix& init, const TrainConfig& cfg, RandomStream& rng) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("sgd_train: empty dataset");
  require_model_shape(init, data, "sgd_train");

  const std::size_t n = data.rows();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;  // forces a shuffle before the first batch

  WeightMatrix w = init;
  std::vector<std::size_t> minibatch;
  for (int step = 0; step < cfg.local_steps; ++step) {
    minibatch.clear();
    while (minibatch.size() < batch) {
      if (cursor == n) {
        shuffle(std::span<std::size_t>(order), rng);
        cursor = 0;
      }
      minibatch.push_back(order[cursor++]);
    }
    const LossGradient lg = loss_and_gradient(w, data, minibatch, cfg.l2_alpha);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * lg.gradient[i];
  }
  if (!w.all_finite()) throw std::runtime_error("sgd_train: weights diverged to non-finite values");
  return w;
}

WeightMatrix federated_average(std::span<const WeightMatrix> models) {
  if (models.empty()) throw std::invalid_argument("federated_average: no models");
  WeightMatrix sum = models.front();
  for (std::size_t i = 1; i < models.size(); ++i) {
    require_same_shape(sum, models[i], "federated_average");
    sum += models[i];
  }
  sum /= static_cast<double>(models.size());
  return sum;
}

WeightMatrix weighted_average(std::span<const WeightMatrix> models, std::span<const double> weights) {
  if (models.empty()) throw std::invalid_argument("weighted_average: no models");
  if (models.size() != weights.size()) throw std::invalid_argument("weighted_average: one weight per model required");
  WeightMatrix sum(models.front().shape());
  double total = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    require_same_shape(sum, models[i], "weighted_average");
    if (!(weights[i] > 0.0)) throw std::invalid_argument("weighted_average: weights must be positive");
    for (std::size_t e = 0; e < sum.size(); ++e) sum[e] += weights[i] * models[i][e];
    total += weights[i];
  }
  sum /= total;
  return sum;
}

bool client_adds_noise(const std::optional<dp::DpSpec>& dp) {
  return dp.has_value() && dp->placement != dp::Placement::GlobalServer;
}

namespace {

ClientUpdate finish_update(WeightMatrix trained, const std::optional<dp::DpSpec>& dp,
                           const dp::SensitivityParams& sens, RandomStream& noise_rng, int iteration, AgentId owner) {
  ClientUpdate update;
  update.clean = to_wire(trained);
  if (client_adds_noise(dp)) {
    auto p = dp::perturb_weights(update.clean, *dp, sens, noise_rng, iteration, owner);
    update.perturbed = std::move(p.weights);
    update.noise = std::move(p.record);
  } else {
    update.perturbed = update.clean;
    update.noise = dp::NoiseRecord{WeightMatrix(update.clean.shape()), iteration, owner};
  }
  return update;
}

}  // namespace

ClientUpdate client_round_alg1(const WeightMatrix& server_w, const Dataset& fresh_data, const TrainConfig& cfg,
                               const std::optional<dp::DpSpec>& dp, const dp::SensitivityParams& sens,
                               RoundStreams rng, int iteration, AgentId owner) {
  WeightMatrix trained = sgd_train(fresh_data, server_w, cfg, rng.training);
  return finish_update(std::move(trained), dp, sens, rng.noise, iteration, owner);
}

ClientUpdate client_round_alg2(const WeightMatrix& server_w, const Dataset& cumulative_data,
                               const std::optional<ClientUpdate>& cached, double tolerance, const TrainConfig& cfg,
                               const std::optional<dp::DpSpec>& dp, const dp::SensitivityParams& sens,
                               RoundStreams rng, int iteration, AgentId owner) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("client_round_alg2: tolerance must be positive");
  if (cached && max_abs_difference(server_w, cached->perturbed) <= tolerance) {
    ClientUpdate reuse = *cached;
    reuse.retrained = false;
    reuse.noise.iteration = iteration;
    return reuse;
  }
  WeightMatrix trained = sgd_train(cumulative_data, initial_weights(cumulative_data), cfg, rng.training);
  return finish_update(std::move(trained), dp, sens, rng.noise, iteration, owner);
}

bool converged(const WeightMatrix& local, const WeightMatrix& federated, double tolerance) {
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw std::invalid_argument("converged: tolerance must be positive and finite");
  }
  return max_abs_difference(local, federated) <= tolerance;
}

WeightMatrix subtract_own_noise(const WeightMatrix& federated, const dp::NoiseRecord& record, int active_count) {
  if (active_count < 1) throw std::invalid_argument("subtract_own_noise: active_count must be positive");
  require_same_shape(federated, record.values, "subtract_own_noise");
  WeightMatrix out = federated;
  const double n = static_cast<double>(active_count);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= record.values[i] / n;
  return out;
}

WeightMatrix subtract_own_noise(const WeightMatrix& federated, const dp::NoiseRecord& record, double own_weight,
                                double total_weight) {
  if (!(own_weight > 0.0) || !(total_weight >= own_weight)) {
    throw std::invalid_argument("subtract_own_noise: weights must satisfy 0 < own <= total");
  }
  require_same_shape(federated, record.values, "subtract_own_noise");
  WeightMatrix out = federated;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= record.values[i] * own_weight / total_weight;
  return out;
}

int predict(const WeightMatrix& w, std::span<const double> features) {
  std::vector<double> z;
  scores(w, features, z);
  // max_element returns the first maximum, i.e. the lowest class index on ties.
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double evaluate(const WeightMatrix& w, const Dataset& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  require_model_shape(w, test, "evaluate");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    if (predict(w, test.row(i)) == test.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

}  // namespace fedsim::fl
