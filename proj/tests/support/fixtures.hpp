#ifndef FEDSIM_TESTS_FIXTURES_HPP_
#define FEDSIM_TESTS_FIXTURES_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsim/data_pipeline.hpp"
#include "fedsim/sim_config.hpp"
#include "fedsim/sim_engine.hpp"

namespace fixtures {

// Synthetic centralized config: n clients, `iterations` rounds, `rows` new
// rows per client per round, no flags set.
inline fedsim::SimConfig small_config(int n, int iterations, int rows = 20, int classes = 3, int features = 4) {
  fedsim::SimConfig cfg;
  cfg.num_clients = n;
  cfg.num_iterations = iterations;
  cfg.data.source = fedsim::SyntheticSource{classes, features, n * iterations * rows + 200, 3.0};
  cfg.data.test_size = 100;
  cfg.data.sizes.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(iterations), rows));
  cfg.seeds.data = 7;
  for (int c = 0; c < n; ++c) cfg.seeds.clients.push_back(1000 + static_cast<std::uint64_t>(c));
  cfg.seeds.server = 99;
  cfg.train.local_steps = 30;
  cfg.compute = fedsim::ComputeDurations{std::vector<double>(static_cast<std::size_t>(n), 0.0), 0.0};
  return cfg;
}

inline void enable_dp(fedsim::SimConfig& cfg, double epsilon) {
  cfg.flags.use_dp_privacy = true;
  cfg.privacy.mechanism = fedsim::dp::Mechanism::DistributedLaplace;
  cfg.privacy.placement = fedsim::dp::Placement::Distributed;
  cfg.privacy.epsilons.assign(static_cast<std::size_t>(cfg.num_clients), epsilon);
}

inline fedsim::sim::SimulationData data_for(const fedsim::SimConfig& cfg) {
  return fedsim::prepare_data(cfg, std::filesystem::current_path());
}

inline fedsim::sim::SimulationResult run(const fedsim::SimConfig& cfg, bool parallel = true) {
  return fedsim::sim::run_simulation(cfg, data_for(cfg), {.parallel = parallel});
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fedsim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures

#endif  // FEDSIM_TESTS_FIXTURES_HPP_
