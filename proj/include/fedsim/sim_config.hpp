#ifndef FEDSIM_SIM_CONFIG_HPP_
#define FEDSIM_SIM_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/dp_mechanisms.hpp"
#include "fedsim/fl_models.hpp"
#include "fedsim/latency_table.hpp"

namespace fedsim {

// A configuration problem, reported before any simulation work starts.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Topology { Centralized, Serverless };
enum class Algorithm { Alg1, Alg2 };

struct Flags {
  bool use_security = false;
  bool use_dp_privacy = false;
  bool subtract_dp_noise = false;
  bool client_dropout = false;
  bool simulate_latencies = false;
  bool using_cumulative = false;
  bool operator==(const Flags&) const = default;
};

struct PrivacyConfig {
  dp::Mechanism mechanism = dp::Mechanism::DistributedLaplace;
  dp::Placement placement = dp::Placement::Distributed;
  std::vector<double> epsilons;  // one per client
  std::vector<double> deltas;    // empty means 0 for every client
  bool operator==(const PrivacyConfig&) const = default;
};

struct SyntheticSource {
  int classes = 2;
  int features = 2;
  int rows = 100;
  double separation = 3.0;
  bool operator==(const SyntheticSource&) const = default;
};

struct CsvSource {
  std::string path;
  std::string label_column = "label";
  bool operator==(const CsvSource&) const = default;
};

struct DataConfig {
  std::variant<SyntheticSource, CsvSource> source = SyntheticSource{};
  int test_size = 100;
  // New rows per client per iteration: sizes[client][iteration - 1].
  std::vector<std::vector<int>> sizes;
  bool operator==(const DataConfig&) const = default;
};

struct Seeds {
  std::vector<std::uint64_t> clients;
  std::uint64_t server = 0;
  std::uint64_t data = 0;
  bool operator==(const Seeds&) const = default;
};

// Fixed compute durations in simulated seconds; without them durations are
// measured from the wall clock.
struct ComputeDurations {
  std::vector<double> clients;
  double server = 0.0;
  bool operator==(const ComputeDurations&) const = default;
};

struct SimConfig {
  int num_clients = 1;
  int num_iterations = 1;
  Topology topology = Topology::Centralized;
  Algorithm algorithm = Algorithm::Alg1;
  Flags flags;
  PrivacyConfig privacy;
  DataConfig data;
  double tolerance = 1e-3;
  LatencyTable latencies;
  Seeds seeds;
  fl::TrainConfig train;
  std::optional<ComputeDurations> compute;
  // Client indices taking part in federation; the rest train standalone.
  // Unset means every client participates.
  std::optional<std::vector<int>> participants;
  // Client index -> iteration after which that client leaves regardless of convergence.
  std::map<int, int> scheduled_departures;
  bool weighted_averaging = false;

  bool operator==(const SimConfig&) const = default;

  // Throws ValidationError on the first violated rule; returns non-fatal warnings.
  std::vector<std::string> validate() const;

  std::vector<AgentId> client_ids() const;
  std::vector<AgentId> participant_ids() const;
  bool is_participant(int client) const;
  std::optional<dp::DpSpec> dp_spec_for(int client) const;
};

}  // namespace fedsim

#endif  // FEDSIM_SIM_CONFIG_HPP_
