#include "fedsim/sim_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedsim/secure_masking.hpp"

namespace fedsim {

namespace {

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ValidationError(field, message);
}

template <typename T>
void require_per_client(const std::vector<T>& values, int num_clients, const std::string& field) {
  require(values.size() == static_cast<std::size_t>(num_clients), field,
          "expected " + std::to_string(num_clients) + " entries (one per client), got " +
              std::to_string(values.size()));
}

std::string client_field(const std::string& field, std::size_t index) {
  return field + "[" + std::to_string(index) + "]";
}

void require_latency(const LatencyTable& table, AgentId from, AgentId to) {
  require(table.contains(from, to), "latencies", "missing entry " + from.name() + " -> " + to.name());
}

}  // namespace

std::vector<AgentId> SimConfig::client_ids() const {
  std::vector<AgentId> ids;
  for (int i = 0; i < num_clients; ++i) ids.push_back(AgentId::client(i));
  return ids;
}

bool SimConfig::is_participant(int client) const {
  if (!participants) return client >= 0 && client < num_clients;
  return std::find(participants->begin(), participants->end(), client) != participants->end();
}

std::vector<AgentId> SimConfig::participant_ids() const {
  std::vector<AgentId> ids;
  for (int i = 0; i < num_clients; ++i) {
    if (is_participant(i)) ids.push_back(AgentId::client(i));
  }
  return ids;
}

std::optional<dp::DpSpec> SimConfig::dp_spec_for(int client) const {
  if (!flags.use_dp_privacy) return std::nullopt;
  dp::DpSpec spec;
  spec.mechanism = privacy.mechanism;
  spec.placement = privacy.placement;
  spec.epsilon = privacy.epsilons.at(static_cast<std::size_t>(client));
  spec.delta = privacy.deltas.empty() ? 0.0 : privacy.deltas.at(static_cast<std::size_t>(client));
  return spec;
}

std::vector<std::string> SimConfig::validate() const {
  std::vector<std::string> warnings;

  require(num_clients >= 1, "num_clients", "must be at least 1");
  require(num_iterations >= 0, "num_iterations", "must be nonnegative");
  require(std::isfinite(tolerance) && tolerance > 0.0, "tolerance", "must be positive and finite");

  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError("train", e.what());
  }

  // Per-client lists.
  require_per_client(seeds.clients, num_clients, "seeds.clients");
  require_per_client(data.sizes, num_clients, "data.sizes");
  for (std::size_t c = 0; c < data.sizes.size(); ++c) {
    const auto& row = data.sizes[c];
    require(row.size() == static_cast<std::size_t>(num_iterations), client_field("data.sizes", c),
            "expected " + std::to_string(num_iterations) + " per-iteration sizes, got " + std::to_string(row.size()));
    for (int n : row) require(n >= 1, client_field("data.sizes", c), "every iteration needs at least one new row");
  }
  require(data.test_size >= 1, "data.test_size", "must be at least 1");
  if (const auto* synth = std::get_if<SyntheticSource>(&data.source)) {
    require(synth->classes >= 2, "data.source.synthetic.classes", "must be at least 2");
    require(synth->features >= 1, "data.source.synthetic.features", "must be at least 1");
    require(synth->rows >= synth->classes, "data.source.synthetic.rows", "must be at least the class count");
    require(std::isfinite(synth->separation) && synth->separation >= 0.0, "data.source.synthetic.separation",
            "must be nonnegative");
  } else {
    const auto& csv = std::get<CsvSource>(data.source);
    require(!csv.path.empty(), "data.source.csv.path", "must not be empty");
    require(!csv.label_column.empty(), "data.source.csv.label_column", "must not be empty");
  }

  // Privacy.
  if (flags.use_dp_privacy) {
    require_per_client(privacy.epsilons, num_clients, "privacy.epsilons");
    if (!privacy.deltas.empty()) require_per_client(privacy.deltas, num_clients, "privacy.deltas");
    for (int c = 0; c < num_clients; ++c) {
      try {
        dp_spec_for(c)->validate();
      } catch (const std::domain_error& e) {
        throw ValidationError(client_field("privacy", static_cast<std::size_t>(c)), e.what());
      }
    }
    require(!(topology == Topology::Serverless && privacy.placement == dp::Placement::GlobalServer),
            "privacy.placement", "global_server placement needs a server; the serverless topology has none");
  } else if (flags.subtract_dp_noise) {
    warnings.push_back("subtract_dp_noise has no effect without use_dp_privacy");
  }

  // Participants and departures.
  if (participants) {
    std::set<int> seen;
    for (int p : *participants) {
      require(p >= 0 && p < num_clients, "participants", "client index " + std::to_string(p) + " out of range");
      require(seen.insert(p).second, "participants", "duplicate client index " + std::to_string(p));
    }
  }
  const auto members = participant_ids();
  if (flags.use_security) {
    require(static_cast<int>(members.size()) <= masking::kMaxMaskedParticipants, "participants",
            "secure aggregation supports at most " + std::to_string(masking::kMaxMaskedParticipants) +
                " participants");
  }
  for (const auto& [client, iteration] : scheduled_departures) {
    require(client >= 0 && client < num_clients, "scheduled_departures",
            "client index " + std::to_string(client) + " out of range");
    require(iteration >= 1 && iteration <= std::max(num_iterations, 1), "scheduled_departures",
            "iteration " + std::to_string(iteration) + " out of range for " + AgentId::client(client).name());
  }

  // Compute durations.
  if (compute) {
    require_per_client(compute->clients, num_clients, "compute.clients");
    for (std::size_t c = 0; c < compute->clients.size(); ++c) {
      require(std::isfinite(compute->clients[c]) && compute->clients[c] >= 0.0, client_field("compute.clients", c),
              "must be nonnegative");
    }
    require(std::isfinite(compute->server) && compute->server >= 0.0, "compute.server", "must be nonnegative");
  }

  // Latencies: every entry must name a known agent, and every pair that
  // exchanges messages must be present.
  for (const auto& [pair, seconds] : latencies.entries()) {
    for (AgentId id : {pair.first, pair.second}) {
      const bool known = id.is_client() ? id.index < num_clients
                                        : (topology == Topology::Centralized && id.index == 0);
      require(known, "latencies", "unknown agent " + id.name());
    }
  }
  if (flags.simulate_latencies) {
    const AgentId server = AgentId::server();
    if (topology == Topology::Centralized) {
      for (AgentId c : members) {
        require_latency(latencies, server, c);
        require_latency(latencies, c, server);
      }
    }
    if (topology == Topology::Serverless || flags.use_security) {
      for (AgentId a : members) {
        for (AgentId b : members) {
          if (a != b) require_latency(latencies, a, b);
        }
      }
    }
  }

  if (algorithm == Algorithm::Alg1 && flags.using_cumulative) {
    warnings.push_back("using_cumulative is intended for alg2; alg1 will train on growing datasets");
  }
  if (algorithm == Algorithm::Alg2 && !flags.using_cumulative) {
    warnings.push_back("alg2 retrains from scratch; without using_cumulative each retrain sees only that iteration's rows");
  }
  if (weighted_averaging && flags.use_dp_privacy && privacy.placement == dp::Placement::Distributed) {
    warnings.push_back("weighted averaging rescales distributed noise shares; the aggregate is no longer Laplace(Delta/epsilon)");
  }
  return warnings;
}

}  // namespace fedsim
