#ifndef FEDSIM_FL_MODELS_HPP_
#define FEDSIM_FL_MODELS_HPP_

#include <optional>
#include <span>

#include "fedsim/dataset.hpp"
#include "fedsim/dp_mechanisms.hpp"
#include "fedsim/random.hpp"
#include "fedsim/weight_matrix.hpp"

namespace fedsim::fl {

struct TrainConfig {
  int local_steps = 100;  // U
  double learning_rate = 0.1;
  double l2_alpha = 0.01;
  int batch_size = 32;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EvalReport {
  int iteration = 0;
  double local_accuracy = 0.0;
  double federated_accuracy = 0.0;
};

// Zero-initialized classes x (features + 1) matrix for `data`.
WeightMatrix initial_weights(const Dataset& data);
WeightMatrix initial_weights(int num_classes, std::size_t num_features);

struct LossGradient {
  double loss = 0.0;
  WeightMatrix gradient;
};

// Mean multinomial cross-entropy over `rows` plus (alpha / 2) * ||w||^2, and
// its gradient. Every entry of w, bias included, is regularized.
LossGradient loss_and_gradient(const WeightMatrix& w, const Dataset& data, std::span<const std::size_t> rows,
                               double alpha);
LossGradient loss_and_gradient(const WeightMatrix& w, const Dataset& data, double alpha);

// Exactly cfg.local_steps minibatch steps from `init`. Minibatches cycle
// through a fresh shuffle of the data every epoch.
WeightMatrix sgd_train(const Dataset& data, const WeightMatrix& init, const TrainConfig& cfg, RandomStream& rng);

// Elementwise mean, summed in list order.
WeightMatrix federated_average(std::span<const WeightMatrix> models);
// sum(weight_i * model_i) / sum(weight_i).
WeightMatrix weighted_average(std::span<const WeightMatrix> models, std::span<const double> weights);

// What a client hands to the privacy and security layers in one round.
struct ClientUpdate {
  WeightMatrix clean;      // trained, wire-encoded; never leaves the client
  WeightMatrix perturbed;  // clean + noise
  dp::NoiseRecord noise;
  bool retrained = true;
};

// Which noise a client adds itself. Nothing for the trusted-server placement
// or when privacy is disabled.
bool client_adds_noise(const std::optional<dp::DpSpec>& dp);

struct RoundStreams {
  RandomStream& training;
  RandomStream& noise;
};

// Federated averaging client procedure: U local steps starting from the
// server weights on this round's fresh data, then the client's noise.
ClientUpdate client_round_alg1(const WeightMatrix& server_w, const Dataset& fresh_data, const TrainConfig& cfg,
                               const std::optional<dp::DpSpec>& dp, const dp::SensitivityParams& sens,
                               RoundStreams rng, int iteration = 0, AgentId owner = {});

// Retrain-from-scratch client procedure over cumulative data. The server
// weights only decide whether to retrain: when they are within `tolerance`
// (max-abs) of the cached noisy weights the cached update is returned with
// retrained = false.
ClientUpdate client_round_alg2(const WeightMatrix& server_w, const Dataset& cumulative_data,
                               const std::optional<ClientUpdate>& cached, double tolerance, const TrainConfig& cfg,
                               const std::optional<dp::DpSpec>& dp, const dp::SensitivityParams& sens,
                               RoundStreams rng, int iteration = 0, AgentId owner = {});

// max |local - federated| <= tolerance. Throws std::invalid_argument unless tolerance > 0.
bool converged(const WeightMatrix& local, const WeightMatrix& federated, double tolerance);

// federated - record.values / active_count.
WeightMatrix subtract_own_noise(const WeightMatrix& federated, const dp::NoiseRecord& record, int active_count);
// federated - record.values * own_weight / total_weight, for weighted averaging.
WeightMatrix subtract_own_noise(const WeightMatrix& federated, const dp::NoiseRecord& record, double own_weight,
                                double total_weight);

int predict(const WeightMatrix& w, std::span<const double> features);

// Fraction of rows whose argmax class (ties to the lowest index) matches the label.
double evaluate(const WeightMatrix& w, const Dataset& test);

}  // namespace fedsim::fl

#endif  // FEDSIM_FL_MODELS_HPP_
