#ifndef FEDSIM_DP_MECHANISMS_HPP_
#define FEDSIM_DP_MECHANISMS_HPP_

#include <cstdint>

#include "fedsim/agent_id.hpp"
#include "fedsim/random.hpp"
#include "fedsim/weight_matrix.hpp"

namespace fedsim::dp {

enum class Mechanism { Laplace, Gaussian, DistributedLaplace };

// Where the noise is injected.
//   Local        every client perturbs its own weights with the full mechanism.
//   GlobalServer a trusted server perturbs the average.
//   Distributed  every client adds a Gamma-difference share; the shares sum to
//                one Laplace draw in the aggregate.
enum class Placement { Local, GlobalServer, Distributed };

struct DpSpec {
  Mechanism mechanism = Mechanism::Laplace;
  double epsilon = 1.0;
  double delta = 0.0;
  Placement placement = Placement::Local;

  // Throws std::domain_error describing the first violated invariant.
  void validate() const;
};

// n clients, smallest client dataset k, L2 regularization alpha.
struct SensitivityParams {
  std::int64_t n = 1;
  std::int64_t k = 1;
  double alpha = 1.0;
};

struct NoiseRecord {
  WeightMatrix values;
  int iteration = 0;
  AgentId owner;
};

// Output-perturbation sensitivity of L2-regularized logistic regression
// averaged over n clients: 2 / (n k alpha).
double logreg_sensitivity(const SensitivityParams& p);

// Zero-mean Laplace draw by inverse CDF.
double laplace_sample(double scale, RandomStream& rng);

// sigma = sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon.
double gaussian_sigma(double sensitivity, double epsilon, double delta);
double gaussian_sample(double sensitivity, double epsilon, double delta, RandomStream& rng);

// Gamma(shape, scale) draw (Marsaglia-Tsang, boosted for shape < 1).
double gamma_sample(double shape, double scale, RandomStream& rng);

// gamma - gamma' with both Gamma(1/n, scale). n such shares sum to Laplace(0, scale).
double gamma_difference_share(std::int64_t n, double scale, RandomStream& rng);

// Per-element Laplace scale Delta / epsilon for this spec.
double laplace_scale(const DpSpec& spec, const SensitivityParams& sens);

struct Perturbation {
  WeightMatrix weights;
  NoiseRecord record;
};

// Returns w + noise together with the exact noise that was added.
//
// Noise is i.i.d. per element and snapped to the wire grid; `w` must already
// be on the grid, which makes (result - record.values) == w bit-exactly.
// For DistributedLaplace each client's share has scale n * Delta / epsilon,
// so the mean of the n perturbed models carries Laplace(Delta / epsilon).
Perturbation perturb_weights(const WeightMatrix& w, const DpSpec& spec, const SensitivityParams& sens,
                             RandomStream& rng, int iteration = 0, AgentId owner = {});

// Noise matrix only; used by the trusted-server placement.
WeightMatrix sample_noise(Shape shape, const DpSpec& spec, const SensitivityParams& sens, RandomStream& rng);

}  // namespace fedsim::dp

#endif  // FEDSIM_DP_MECHANISMS_HPP_
