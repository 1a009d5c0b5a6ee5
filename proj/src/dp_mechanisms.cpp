#include "fedsim/dp_mechanisms.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim::dp {

void DpSpec::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::domain_error("epsilon must be positive and finite");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::domain_error("delta must lie in [0, 1)");
  if (mechanism == Mechanism::Gaussian && !(delta > 0.0)) {
    throw std::domain_error("the Gaussian mechanism requires delta > 0");
  }
  if (mechanism == Mechanism::DistributedLaplace && placement != Placement::Distributed) {
    throw std::domain_error("distributed Laplace noise requires distributed placement");
  }
  if (placement == Placement::Distributed && mechanism != Mechanism::DistributedLaplace) {
    throw std::domain_error("distributed placement is only defined for the distributed Laplace mechanism");
  }
}

double logreg_sensitivity(const SensitivityParams& p) {
  if (p.n <= 0 || p.k <= 0 || !(p.alpha > 0.0)) {
    throw std::domain_error("logreg_sensitivity: n, k and alpha must be positive");
  }
  return 2.0 / (static_cast<double>(p.n) * static_cast<double>(p.k) * p.alpha);
}

double laplace_sample(double scale, RandomStream& rng) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::domain_error("laplace_sample: scale must be positive");
  const double u = rng.uniform_open01() - 0.5;
  return u < 0.0 ? scale * std::log1p(2.0 * u) : -scale * std::log1p(-2.0 * u);
}

double gaussian_sigma(double sensitivity, double epsilon, double delta) {
  if (!(sensitivity > 0.0)) throw std::domain_error("gaussian: sensitivity must be positive");
  if (!(epsilon > 0.0)) throw std::domain_error("gaussian: epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("gaussian: delta must lie in (0, 1)");
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

double gaussian_sample(double sensitivity, double epsilon, double delta, RandomStream& rng) {
  return gaussian_sigma(sensitivity, epsilon, delta) * rng.standard_normal();
}

double gamma_sample(double shape, double scale, RandomStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw std::domain_error("gamma_sample: shape and scale must be positive");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double boost = std::pow(rng.uniform_open01(), 1.0 / shape);
    return gamma_sample(shape + 1.0, scale, rng) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

double gamma_difference_share(std::int64_t n, double scale, RandomStream& rng) {
  if (n < 1) throw std::domain_error("gamma_difference_share: n must be at least 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::domain_error("gamma_difference_share: scale must be positive");
  const double shape = 1.0 / static_cast<double>(n);
  const double g = gamma_sample(shape, scale, rng);
  const double g_prime = gamma_sample(shape, scale, rng);
  return g - g_prime;
}

double laplace_scale(const DpSpec& spec, const SensitivityParams& sens) {
  return logreg_sensitivity(sens) / spec.epsilon;
}

namespace {

double draw_one(const DpSpec& spec, const SensitivityParams& sens, double sensitivity, RandomStream& rng) {
  switch (spec.mechanism) {
    case Mechanism::Laplace:
      return laplace_sample(sensitivity / spec.epsilon, rng);
    case Mechanism::Gaussian:
      return gaussian_sample(sensitivity, spec.epsilon, spec.delta, rng);
    case Mechanism::DistributedLaplace:
      return gamma_difference_share(sens.n, static_cast<double>(sens.n) * sensitivity / spec.epsilon, rng);
  }
  throw std::logic_error("unknown mechanism");
}

}  // namespace

WeightMatrix sample_noise(Shape shape, const DpSpec& spec, const SensitivityParams& sens, RandomStream& rng) {
  spec.validate();
  const double sensitivity = logreg_sensitivity(sens);
  WeightMatrix noise(shape);
  for (double& v : noise.values()) v = draw_one(spec, sens, sensitivity, rng);
  return noise;
}

Perturbation perturb_weights(const WeightMatrix& w, const DpSpec& spec, const SensitivityParams& sens,
                             RandomStream& rng, int iteration, AgentId owner) {
  if (!on_wire_grid(w)) throw std::invalid_argument("perturb_weights: weights must be wire-encoded");
  WeightMatrix noise = to_wire(sample_noise(w.shape(), spec, sens, rng));
  WeightMatrix perturbed = w + noise;
  // Both operands are on the grid and well inside the exact range, so the
  // sum is exact; to_wire only enforces the magnitude bound here.
  perturbed = to_wire(perturbed);
  return {std::move(perturbed), NoiseRecord{std::move(noise), iteration, owner}};
}

}  // namespace fedsim::dp
