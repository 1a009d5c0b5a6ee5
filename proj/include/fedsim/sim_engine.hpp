#ifndef FEDSIM_SIM_ENGINE_HPP_
#define FEDSIM_SIM_ENGINE_HPP_

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/agent_id.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/fl_models.hpp"
#include "fedsim/latency_table.hpp"
#include "fedsim/random.hpp"
#include "fedsim/secure_masking.hpp"
#include "fedsim/sim_config.hpp"
#include "fedsim/weight_matrix.hpp"

namespace fedsim::sim {

// A message arrived that the protocol does not allow in the agent's state.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A client failed during a round; aborts the iteration.
class ClientFailure : public std::runtime_error {
 public:
  ClientFailure(AgentId client, const std::string& what)
      : std::runtime_error(client.name() + ": " + what), client_(client) {}
  AgentId client() const { return client_; }

 private:
  AgentId client_;
};

// Body keys by kind:
//   PublicKey        public_key (string, hex)
//   RoundStart       active_count (int), min_dataset_size (int)
//   RequestWeights   active_count (int), min_dataset_size (int)
//   Weights          weights (WeightMatrix), sample_count (int)
//   PeerWeights      weights (WeightMatrix), sample_count (int)
//   FederatedWeights weights (WeightMatrix), contributors (int), total_weight (double)
//   DropoutNotice    dropped (agent list)
enum class MessageKind { PublicKey, RoundStart, RequestWeights, Weights, PeerWeights, FederatedWeights, DropoutNotice };

using BodyValue = std::variant<std::int64_t, double, std::string, WeightMatrix, std::vector<AgentId>>;

struct Envelope {
  AgentId sender;
  AgentId recipient;
  MessageKind kind = MessageKind::RequestWeights;
  int iteration = 0;
  std::map<std::string, BodyValue> body;
  double sim_time = 0.0;

  template <typename T>
  const T& get(const std::string& key) const {
    auto it = body.find(key);
    if (it == body.end()) throw ProtocolError("message from " + sender.name() + " lacks body key '" + key + "'");
    const T* value = std::get_if<T>(&it->second);
    if (value == nullptr) throw ProtocolError("body key '" + key + "' from " + sender.name() + " has the wrong type");
    return *value;
  }
};

// Stamp for an outgoing message: latest incoming time plus the agent's own
// compute plus the link latency. Throws on negative durations or no input.
double advance_time(std::span<const Envelope> incoming, double compute_duration, double outgoing_latency);

struct MessageCounts {
  std::int64_t offline_client_client = 0;
  std::int64_t online_client_client = 0;
  std::int64_t client_to_server = 0;
  std::int64_t server_to_client = 0;
  bool operator==(const MessageCounts&) const = default;
};

class MessageLedger {
 public:
  void record(const Envelope& msg, bool online);
  MessageCounts snapshot() const;

 private:
  std::atomic<std::int64_t> offline_client_client_{0};
  std::atomic<std::int64_t> online_client_client_{0};
  std::atomic<std::int64_t> client_to_server_{0};
  std::atomic<std::int64_t> server_to_client_{0};
};

// Latency lookups that read as zero when latency simulation is off.
class LatencyModel {
 public:
  LatencyModel(LatencyTable table, bool enabled) : table_(std::move(table)), enabled_(enabled) {}
  double operator()(AgentId from, AgentId to) const { return enabled_ ? table_.get(from, to) : 0.0; }

 private:
  LatencyTable table_;
  bool enabled_;
};

class ClientAgent;

// Name -> agent lookup, frozen once the initializer has registered everyone.
class Directory {
 public:
  void add(ClientAgent& client);
  void freeze() { frozen_ = true; }
  ClientAgent& client(AgentId id) const;
  bool contains(AgentId id) const { return clients_.contains(id); }
  std::vector<AgentId> ids() const;

 private:
  std::map<AgentId, ClientAgent*> clients_;
  bool frozen_ = false;
};

// Read-only state every agent can see.
struct SharedContext {
  const Dataset* test = nullptr;
  const LatencyModel* latency = nullptr;
  MessageLedger* ledger = nullptr;
  const Directory* directory = nullptr;
};

struct ClientSettings {
  AgentId id;
  Algorithm algorithm = Algorithm::Alg1;
  fl::TrainConfig train;
  std::optional<dp::DpSpec> dp;
  double tolerance = 1e-3;
  bool participating = true;
  bool use_security = false;
  bool subtract_dp_noise = false;
  bool client_dropout = false;
  bool weighted_averaging = false;
  std::optional<int> scheduled_departure;
  std::optional<double> injected_compute;
  std::uint64_t seed = 0;
};

// Everything a client remembers about one iteration.
struct ClientIterationState {
  fl::ClientUpdate update;
  WeightMatrix received;  // federated weights as delivered
  WeightMatrix view;      // after subtracting own noise, if enabled
  fl::EvalReport eval;
  double compute_duration = 0.0;
  double dispatch_time = 0.0;
  double receipt_time = 0.0;
  double convergence_distance = 0.0;
  bool converged = false;
  bool departed = false;
  int contributors = 0;
};

class ClientAgent {
 public:
  ClientAgent(ClientSettings settings, std::vector<Dataset> data_per_iteration, SharedContext context,
              std::vector<AgentId> federation);

  AgentId id() const { return settings_.id; }
  const ClientSettings& settings() const { return settings_; }
  bool active() const { return active_; }
  bool departing() const { return departing_; }
  std::size_t dataset_size(int iteration) const;

  // Offline key exchange.
  void send_pubkeys();
  void receive_pubkey(const Envelope& msg);
  void initialize_common_keys();
  const masking::MaskSchedule& schedule() const { return schedule_; }
  const std::vector<AgentId>& active_view() const { return active_view_; }

  // Centralized round.
  Envelope produce_weights(const Envelope& request);
  bool receive_weights(const Envelope& msg);
  void remove_active_clients(const Envelope& msg);

  // Serverless round: one copy of the masked weights per active peer.
  std::vector<Envelope> broadcast_weights(const Envelope& round_start);
  bool receive_peer_weights(std::span<const Envelope> inbox);

  // Non-participants train on their own data only.
  void train_standalone(int iteration);

  const ClientIterationState& history(int iteration) const;
  bool has_history(int iteration) const { return history_.contains(iteration); }

 private:
  struct Payload {
    WeightMatrix weights;
    std::int64_t sample_count = 1;
    double dispatch_time = 0.0;
  };

  Payload prepare_weights(const Envelope& request);
  bool accept_federated(int iteration, const WeightMatrix& federated, int contributors, double total_weight,
                        double receipt_time);
  void require_active(const char* operation) const;
  double timed(double measured) const;

  ClientSettings settings_;
  std::vector<Dataset> data_;
  SharedContext ctx_;
  RandomStream training_rng_;
  RandomStream noise_rng_;
  RandomStream key_rng_;

  std::optional<masking::DhKeyPair> keypair_;
  std::map<AgentId, masking::BigInt> peer_public_keys_;
  masking::MaskSchedule schedule_;
  std::vector<AgentId> active_view_;

  bool active_ = true;
  bool departing_ = false;
  int current_iteration_ = 0;
  WeightMatrix server_weights_;
  std::optional<fl::ClientUpdate> alg2_cache_;
  std::optional<Payload> own_payload_;
  std::map<int, ClientIterationState> history_;
};

struct ServerSettings {
  AgentId id = AgentId::server();
  std::optional<dp::DpSpec> global_dp;  // only for the trusted-server placement
  std::map<AgentId, double> epsilons;
  std::map<AgentId, double> deltas;
  double l2_alpha = 0.01;
  bool weighted_averaging = false;
  std::optional<double> injected_compute;
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct ServerRoundResult {
  WeightMatrix federated;
  std::vector<AgentId> departed;
  double compute_duration = 0.0;
};

class ServerAgent {
 public:
  ServerAgent(ServerSettings settings, SharedContext context, std::vector<AgentId> members,
              std::map<AgentId, std::vector<std::size_t>> dataset_sizes);

  AgentId id() const { return settings_.id; }
  const std::vector<AgentId>& active() const { return active_; }

  // One centralized iteration: request, average, return, announce dropouts.
  ServerRoundResult server_round(int iteration);

 private:
  ServerSettings settings_;
  SharedContext ctx_;
  std::vector<AgentId> active_;
  std::map<AgentId, std::vector<std::size_t>> dataset_sizes_;
  RandomStream noise_rng_;
};

struct ClientRecord {
  AgentId client;
  bool participating = true;
  fl::EvalReport eval;
  double receipt_sim_time = 0.0;
  double compute_duration = 0.0;
  bool dropped = false;
  bool retrained = true;
  bool converged = false;
  double convergence_distance = 0.0;
  WeightMatrix local_weights;
  WeightMatrix received_weights;
};

struct IterationReport {
  int iteration = 0;
  std::vector<ClientRecord> clients;  // canonical order, every client active at iteration start
  std::vector<AgentId> dropouts;
  double server_compute_duration = 0.0;
  std::optional<WeightMatrix> server_federated;  // centralized only

  const ClientRecord* find(AgentId id) const;
};

struct SimulationResult {
  std::vector<IterationReport> reports;
  MessageCounts messages;
  std::int64_t pubkey_messages = 0;
  double offline_sim_time = 0.0;
};

// Training data per client per iteration (already cumulative when
// configured) plus the shared test set.
struct SimulationData {
  std::vector<std::vector<Dataset>> client_data;
  Dataset test;
};

struct EngineOptions {
  bool parallel = true;
};

// Builds the agents from a validated config and drives the lifecycle.
class Simulation {
 public:
  Simulation(SimConfig config, SimulationData data, EngineOptions options = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void offline_phase();
  // Nullopt once every client has left.
  std::optional<IterationReport> run_iteration(int iteration);
  SimulationResult run();

  ClientAgent& client(AgentId id);
  MessageCounts messages() const { return ledger_.snapshot(); }

 private:
  void serverless_round(int iteration, const std::vector<AgentId>& members);
  std::vector<AgentId> active_members() const;

  SimConfig config_;
  SimulationData data_;
  EngineOptions options_;
  LatencyModel latency_;
  MessageLedger ledger_;
  Directory directory_;
  std::vector<std::unique_ptr<ClientAgent>> clients_;
  std::unique_ptr<ServerAgent> server_;
  bool offline_done_ = false;
  std::int64_t pubkey_messages_ = 0;
  double offline_sim_time_ = 0.0;
};

SimulationResult run_simulation(const SimConfig& config, SimulationData data, EngineOptions options = {});

}  // namespace fedsim::sim

#endif  // FEDSIM_SIM_ENGINE_HPP_
