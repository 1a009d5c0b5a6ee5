#include "fedsim/sim_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>

namespace fedsim::sim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn(id) for every agent, concurrently when `parallel`, and returns the
// results in the order of `ids`. The first failure is rethrown as a
// ClientFailure naming the agent, after every task has finished.
template <typename R, typename Fn>
std::vector<R> for_each_agent(const std::vector<AgentId>& ids, bool parallel, Fn&& fn) {
  std::vector<std::future<R>> futures;
  futures.reserve(ids.size());
  const auto policy = parallel ? std::launch::async : std::launch::deferred;
  for (AgentId id : ids) futures.push_back(std::async(policy, [&fn, id] { return fn(id); }));

  std::vector<R> results;
  results.reserve(ids.size());
  std::exception_ptr failure;
  AgentId failed;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      results.push_back(futures[i].get());
    } catch (...) {
      if (!failure) {
        failure = std::current_exception();
        failed = ids[i];
      }
    }
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const ClientFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw ClientFailure(failed, e.what());
    }
  }
  return results;
}

struct Contribution {
  AgentId sender;
  const WeightMatrix* weights;
  std::int64_t sample_count;
};

// Sum in canonical sender order divided by the total sample weight. Every
// input is wire-encoded, so the sum itself is exact in any order.
WeightMatrix aggregate(std::vector<Contribution> parts, double& total_weight) {
  if (parts.empty()) throw ProtocolError("aggregate: no contributions");
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.sender < b.sender; });
  WeightMatrix sum = *parts.front().weights;
  total_weight = static_cast<double>(parts.front().sample_count);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    require_same_shape(sum, *parts[i].weights, "aggregate");
    sum += *parts[i].weights;
    total_weight += static_cast<double>(parts[i].sample_count);
  }
  sum /= total_weight;
  return sum;
}

}  // namespace

double advance_time(std::span<const Envelope> incoming, double compute_duration, double outgoing_latency) {
  if (incoming.empty()) throw std::invalid_argument("advance_time: no incoming messages");
  if (!(compute_duration >= 0.0) || !(outgoing_latency >= 0.0)) {
    throw std::invalid_argument("advance_time: durations must be nonnegative");
  }
  double latest = 0.0;
  for (const Envelope& msg : incoming) latest = std::max(latest, msg.sim_time);
  return latest + compute_duration + outgoing_latency;
}

void MessageLedger::record(const Envelope& msg, bool online) {
  if (msg.sender.is_client() && msg.recipient.is_client()) {
    (online ? online_client_client_ : offline_client_client_).fetch_add(1, std::memory_order_relaxed);
  } else if (msg.sender.is_client()) {
    client_to_server_.fetch_add(1, std::memory_order_relaxed);
  } else {
    server_to_client_.fetch_add(1, std::memory_order_relaxed);
  }
}

MessageCounts MessageLedger::snapshot() const {
  return {offline_client_client_.load(), online_client_client_.load(), client_to_server_.load(),
          server_to_client_.load()};
}

void Directory::add(ClientAgent& client) {
  if (frozen_) throw std::logic_error("Directory is frozen");
  if (!clients_.emplace(client.id(), &client).second) {
    throw std::invalid_argument("Directory: duplicate agent " + client.id().name());
  }
}

ClientAgent& Directory::client(AgentId id) const {
  auto it = clients_.find(id);
  if (it == clients_.end()) throw std::out_of_range("Directory: unknown agent " + id.name());
  return *it->second;
}

std::vector<AgentId> Directory::ids() const {
  std::vector<AgentId> out;
  for (const auto& [id, _] : clients_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// ClientAgent

ClientAgent::ClientAgent(ClientSettings settings, std::vector<Dataset> data_per_iteration, SharedContext context,
                         std::vector<AgentId> federation)
    : settings_(std::move(settings)),
      data_(std::move(data_per_iteration)),
      ctx_(context),
      training_rng_(RandomStream(settings_.seed).child("training")),
      noise_rng_(RandomStream(settings_.seed).child("dp-noise")),
      key_rng_(RandomStream(settings_.seed).child("masking")),
      schedule_(settings_.id),
      active_view_(std::move(federation)) {
  std::sort(active_view_.begin(), active_view_.end());
  if (std::find(active_view_.begin(), active_view_.end(), settings_.id) == active_view_.end()) {
    throw std::invalid_argument("ClientAgent: " + settings_.id.name() + " missing from its own federation");
  }
  const Dataset& shape_source = data_.empty() ? *ctx_.test : data_.front();
  server_weights_ = fl::initial_weights(shape_source);
}

std::size_t ClientAgent::dataset_size(int iteration) const {
  return data_.at(static_cast<std::size_t>(iteration - 1)).rows();
}

void ClientAgent::require_active(const char* operation) const {
  if (!active_) throw ProtocolError(std::string(operation) + " invoked on departed client " + settings_.id.name());
}

double ClientAgent::timed(double measured) const { return settings_.injected_compute.value_or(measured); }

void ClientAgent::send_pubkeys() {
  require_active("send_pubkeys");
  if (!keypair_) keypair_ = masking::dh_generate(key_rng_);
  const std::string encoded = masking::to_hex(keypair_->public_value);
  for (AgentId peer : active_view_) {
    if (peer == settings_.id) continue;
    Envelope msg{settings_.id, peer, MessageKind::PublicKey, 0, {{"public_key", encoded}},
                 (*ctx_.latency)(settings_.id, peer)};
    ctx_.ledger->record(msg, false);
    ctx_.directory->client(peer).receive_pubkey(msg);
  }
}

void ClientAgent::receive_pubkey(const Envelope& msg) {
  if (msg.kind != MessageKind::PublicKey) throw ProtocolError("receive_pubkey: unexpected message kind");
  if (peer_public_keys_.contains(msg.sender)) {
    throw ProtocolError(settings_.id.name() + " received a duplicate public key from " + msg.sender.name());
  }
  peer_public_keys_.emplace(msg.sender, masking::from_hex(msg.get<std::string>("public_key")));
}

void ClientAgent::initialize_common_keys() {
  if (!keypair_) keypair_ = masking::dh_generate(key_rng_);
  for (AgentId peer : active_view_) {
    if (peer == settings_.id) continue;
    auto it = peer_public_keys_.find(peer);
    if (it == peer_public_keys_.end()) {
      throw ProtocolError(settings_.id.name() + " is missing the public key of " + peer.name());
    }
    schedule_.add(masking::dh_common_key(*keypair_, settings_.id, it->second, peer));
  }
}

ClientAgent::Payload ClientAgent::prepare_weights(const Envelope& request) {
  require_active("produce_weights");
  const int iteration = request.iteration;
  if (iteration != current_iteration_ + 1) {
    throw ProtocolError(settings_.id.name() + " expected iteration " + std::to_string(current_iteration_ + 1) +
                        ", got " + std::to_string(iteration));
  }
  const auto active_count = request.get<std::int64_t>("active_count");
  if (active_count != static_cast<std::int64_t>(active_view_.size())) {
    throw ProtocolError(settings_.id.name() + " sees " + std::to_string(active_view_.size()) +
                        " active clients but the round announces " + std::to_string(active_count));
  }
  const auto start = Clock::now();

  const Dataset& data = data_.at(static_cast<std::size_t>(iteration - 1));
  const dp::SensitivityParams sens{active_count, request.get<std::int64_t>("min_dataset_size"),
                                   settings_.train.l2_alpha};
  fl::RoundStreams streams{training_rng_, noise_rng_};

  fl::ClientUpdate update;
  if (settings_.algorithm == Algorithm::Alg1) {
    update = fl::client_round_alg1(server_weights_, data, settings_.train, settings_.dp, sens, streams, iteration,
                                   settings_.id);
  } else {
    update = fl::client_round_alg2(server_weights_, data, alg2_cache_, settings_.tolerance, settings_.train,
                                   settings_.dp, sens, streams, iteration, settings_.id);
    if (update.retrained) alg2_cache_ = update;
  }

  Payload payload;
  payload.sample_count = settings_.weighted_averaging ? static_cast<std::int64_t>(data.rows()) : 1;
  payload.weights = update.perturbed;
  if (settings_.weighted_averaging) {
    payload.weights *= static_cast<double>(payload.sample_count);
    payload.weights = to_wire(payload.weights);
  }
  if (settings_.use_security) {
    payload.weights = masking::apply_masks(payload.weights, schedule_, active_view_, iteration);
  }

  ClientIterationState state;
  state.update = std::move(update);
  state.compute_duration = timed(seconds_since(start));
  state.dispatch_time = advance_time(std::span(&request, 1), state.compute_duration, 0.0);
  payload.dispatch_time = state.dispatch_time;
  history_[iteration] = std::move(state);
  current_iteration_ = iteration;
  return payload;
}

Envelope ClientAgent::produce_weights(const Envelope& request) {
  if (request.kind != MessageKind::RequestWeights) throw ProtocolError("produce_weights: unexpected message kind");
  Payload payload = prepare_weights(request);
  Envelope reply{settings_.id,
                 request.sender,
                 MessageKind::Weights,
                 request.iteration,
                 {{"weights", std::move(payload.weights)}, {"sample_count", payload.sample_count}},
                 payload.dispatch_time + (*ctx_.latency)(settings_.id, request.sender)};
  ctx_.ledger->record(reply, true);
  return reply;
}

bool ClientAgent::accept_federated(int iteration, const WeightMatrix& federated, int contributors,
                                   double total_weight, double receipt_time) {
  ClientIterationState& state = history_.at(iteration);
  state.received = federated;
  state.contributors = contributors;
  state.receipt_time = receipt_time;

  state.view = federated;
  if (settings_.subtract_dp_noise && fl::client_adds_noise(settings_.dp)) {
    const auto& record = state.update.noise;
    if (settings_.weighted_averaging) {
      state.view = fl::subtract_own_noise(federated, record, static_cast<double>(dataset_size(iteration)),
                                          total_weight);
    } else {
      state.view = fl::subtract_own_noise(federated, record, contributors);
    }
  }

  state.eval.iteration = iteration;
  state.eval.local_accuracy = fl::evaluate(state.update.clean, *ctx_.test);
  state.eval.federated_accuracy = fl::evaluate(state.view, *ctx_.test);
  state.convergence_distance = max_abs_difference(state.update.clean, state.view);
  state.converged = fl::converged(state.update.clean, state.view, settings_.tolerance);
  server_weights_ = state.view;

  departing_ = (settings_.client_dropout && state.converged) || settings_.scheduled_departure == iteration;
  if (departing_) {
    state.departed = true;
    active_ = false;
  }
  return state.converged;
}

bool ClientAgent::receive_weights(const Envelope& msg) {
  require_active("receive_weights");
  if (msg.kind != MessageKind::FederatedWeights) throw ProtocolError("receive_weights: unexpected message kind");
  if (msg.iteration != current_iteration_ || !history_.contains(msg.iteration) ||
      !history_.at(msg.iteration).received.values().empty()) {
    throw ProtocolError(settings_.id.name() + " received federated weights for iteration " +
                        std::to_string(msg.iteration) + " while at iteration " + std::to_string(current_iteration_));
  }
  return accept_federated(msg.iteration, msg.get<WeightMatrix>("weights"),
                          static_cast<int>(msg.get<std::int64_t>("contributors")), msg.get<double>("total_weight"),
                          msg.sim_time);
}

void ClientAgent::remove_active_clients(const Envelope& msg) {
  require_active("remove_active_clients");
  if (msg.kind != MessageKind::DropoutNotice) throw ProtocolError("remove_active_clients: unexpected message kind");
  for (AgentId gone : msg.get<std::vector<AgentId>>("dropped")) {
    if (gone == settings_.id) {
      active_ = false;
      departing_ = true;
    }
    std::erase(active_view_, gone);
  }
}

std::vector<Envelope> ClientAgent::broadcast_weights(const Envelope& round_start) {
  if (round_start.kind != MessageKind::RoundStart) throw ProtocolError("broadcast_weights: unexpected message kind");
  own_payload_ = prepare_weights(round_start);
  std::vector<Envelope> out;
  for (AgentId peer : active_view_) {
    if (peer == settings_.id) continue;
    Envelope msg{settings_.id,
                 peer,
                 MessageKind::PeerWeights,
                 round_start.iteration,
                 {{"weights", own_payload_->weights}, {"sample_count", own_payload_->sample_count}},
                 own_payload_->dispatch_time + (*ctx_.latency)(settings_.id, peer)};
    ctx_.ledger->record(msg, true);
    out.push_back(std::move(msg));
  }
  return out;
}

bool ClientAgent::receive_peer_weights(std::span<const Envelope> inbox) {
  require_active("receive_peer_weights");
  if (!own_payload_) throw ProtocolError(settings_.id.name() + " has not broadcast its own weights yet");
  std::vector<Contribution> parts{{settings_.id, &own_payload_->weights, own_payload_->sample_count}};
  double receipt = own_payload_->dispatch_time;
  for (const Envelope& msg : inbox) {
    if (msg.kind != MessageKind::PeerWeights || msg.iteration != current_iteration_ || msg.recipient != settings_.id) {
      throw ProtocolError(settings_.id.name() + " received a misrouted peer message from " + msg.sender.name());
    }
    parts.push_back({msg.sender, &msg.get<WeightMatrix>("weights"), msg.get<std::int64_t>("sample_count")});
    receipt = std::max(receipt, msg.sim_time);
  }
  if (parts.size() != active_view_.size()) {
    throw ProtocolError(settings_.id.name() + " holds " + std::to_string(parts.size()) + " of " +
                        std::to_string(active_view_.size()) + " contributions");
  }
  const int contributors = static_cast<int>(parts.size());
  double total_weight = 0.0;
  WeightMatrix federated = aggregate(std::move(parts), total_weight);
  own_payload_.reset();
  return accept_federated(current_iteration_, federated, contributors, total_weight, receipt);
}

void ClientAgent::train_standalone(int iteration) {
  require_active("train_standalone");
  if (iteration != current_iteration_ + 1) {
    throw ProtocolError(settings_.id.name() + " expected iteration " + std::to_string(current_iteration_ + 1));
  }
  const auto start = Clock::now();
  const Dataset& data = data_.at(static_cast<std::size_t>(iteration - 1));
  const WeightMatrix init = settings_.algorithm == Algorithm::Alg1 ? server_weights_ : fl::initial_weights(data);
  ClientIterationState state;
  state.update.clean = to_wire(fl::sgd_train(data, init, settings_.train, training_rng_));
  state.update.perturbed = state.update.clean;
  state.update.noise = {WeightMatrix(state.update.clean.shape()), iteration, settings_.id};
  state.received = state.update.clean;
  state.view = state.update.clean;
  state.eval = {iteration, fl::evaluate(state.update.clean, *ctx_.test), 0.0};
  state.eval.federated_accuracy = state.eval.local_accuracy;
  state.compute_duration = timed(seconds_since(start));
  state.dispatch_time = state.compute_duration;
  state.receipt_time = state.compute_duration;
  state.contributors = 1;
  server_weights_ = state.update.clean;
  if (settings_.scheduled_departure == iteration) {
    state.departed = true;
    departing_ = true;
    active_ = false;
  }
  history_[iteration] = std::move(state);
  current_iteration_ = iteration;
}

const ClientIterationState& ClientAgent::history(int iteration) const {
  auto it = history_.find(iteration);
  if (it == history_.end()) {
    throw std::out_of_range(settings_.id.name() + " has no record for iteration " + std::to_string(iteration));
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// ServerAgent

ServerAgent::ServerAgent(ServerSettings settings, SharedContext context, std::vector<AgentId> members,
                         std::map<AgentId, std::vector<std::size_t>> dataset_sizes)
    : settings_(std::move(settings)),
      ctx_(context),
      active_(std::move(members)),
      dataset_sizes_(std::move(dataset_sizes)),
      noise_rng_(RandomStream(settings_.seed).child("server-dp-noise")) {
  std::sort(active_.begin(), active_.end());
}

ServerRoundResult ServerAgent::server_round(int iteration) {
  if (active_.empty()) throw ProtocolError("server_round: no active clients");
  std::int64_t min_size = std::numeric_limits<std::int64_t>::max();
  for (AgentId c : active_) {
    min_size = std::min(min_size, static_cast<std::int64_t>(dataset_sizes_.at(c).at(static_cast<std::size_t>(iteration - 1))));
  }
  const auto active_count = static_cast<std::int64_t>(active_.size());
  const LatencyModel& latency = *ctx_.latency;

  // Requests go out at the start of the iteration; the clock restarts at 0.
  std::vector<Envelope> replies = for_each_agent<Envelope>(active_, settings_.parallel, [&](AgentId c) {
    Envelope request{settings_.id,
                     c,
                     MessageKind::RequestWeights,
                     iteration,
                     {{"active_count", active_count}, {"min_dataset_size", min_size}},
                     latency(settings_.id, c)};
    ctx_.ledger->record(request, true);
    return ctx_.directory->client(c).produce_weights(request);
  });

  const auto start = Clock::now();
  std::vector<Contribution> parts;
  for (const Envelope& reply : replies) {
    parts.push_back({reply.sender, &reply.get<WeightMatrix>("weights"), reply.get<std::int64_t>("sample_count")});
  }
  double total_weight = 0.0;
  ServerRoundResult result;
  result.federated = aggregate(std::move(parts), total_weight);
  if (settings_.global_dp) {
    dp::DpSpec spec = *settings_.global_dp;
    spec.epsilon = std::numeric_limits<double>::infinity();
    spec.delta = 1.0;
    for (AgentId c : active_) {
      spec.epsilon = std::min(spec.epsilon, settings_.epsilons.at(c));
      spec.delta = std::min(spec.delta, settings_.deltas.at(c));
    }
    const dp::SensitivityParams sens{active_count, min_size, settings_.l2_alpha};
    result.federated += dp::sample_noise(result.federated.shape(), spec, sens, noise_rng_);
  }
  result.compute_duration = settings_.injected_compute.value_or(seconds_since(start));
  const double ready = advance_time(replies, result.compute_duration, 0.0);

  std::vector<Envelope> deliveries;
  for (AgentId c : active_) {
    deliveries.push_back(Envelope{settings_.id,
                                  c,
                                  MessageKind::FederatedWeights,
                                  iteration,
                                  {{"weights", result.federated},
                                   {"contributors", active_count},
                                   {"total_weight", total_weight}},
                                  ready + latency(settings_.id, c)});
    ctx_.ledger->record(deliveries.back(), true);
  }
  for_each_agent<bool>(active_, settings_.parallel, [&](AgentId c) {
    const auto it = std::find(active_.begin(), active_.end(), c);
    return ctx_.directory->client(c).receive_weights(deliveries[static_cast<std::size_t>(it - active_.begin())]);
  });

  // Convergence answers reach the server one uplink later; then survivors
  // learn who left.
  double answers_in = 0.0;
  std::vector<AgentId> survivors;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const AgentId c = active_[i];
    answers_in = std::max(answers_in, deliveries[i].sim_time + latency(c, settings_.id));
    if (ctx_.directory->client(c).departing()) {
      result.departed.push_back(c);
    } else {
      survivors.push_back(c);
    }
  }
  if (!result.departed.empty()) {
    for (AgentId s : survivors) {
      Envelope notice{settings_.id,        s, MessageKind::DropoutNotice, iteration, {{"dropped", result.departed}},
                      answers_in + latency(settings_.id, s)};
      ctx_.ledger->record(notice, true);
      ctx_.directory->client(s).remove_active_clients(notice);
    }
  }
  active_ = std::move(survivors);
  return result;
}

// ---------------------------------------------------------------------------
// Simulation

const ClientRecord* IterationReport::find(AgentId id) const {
  for (const auto& rec : clients) {
    if (rec.client == id) return &rec;
  }
  return nullptr;
}

Simulation::Simulation(SimConfig config, SimulationData data, EngineOptions options)
    : config_(std::move(config)),
      data_(std::move(data)),
      options_(options),
      latency_(config_.latencies, config_.flags.simulate_latencies) {
  config_.validate();
  if (data_.client_data.size() != static_cast<std::size_t>(config_.num_clients)) {
    throw ValidationError("data", "expected training data for " + std::to_string(config_.num_clients) + " clients");
  }
  if (data_.test.empty()) throw ValidationError("data.test_size", "the test set is empty");
  for (std::size_t c = 0; c < data_.client_data.size(); ++c) {
    const auto& per_iteration = data_.client_data[c];
    if (per_iteration.size() != static_cast<std::size_t>(config_.num_iterations)) {
      throw ValidationError("data", AgentId::client(static_cast<int>(c)).name() + " needs one dataset per iteration");
    }
    for (const Dataset& d : per_iteration) {
      if (d.empty() || d.num_features() != data_.test.num_features() ||
          d.num_classes() != data_.test.num_classes()) {
        throw ValidationError("data", "training data of " + AgentId::client(static_cast<int>(c)).name() +
                                          " is empty or does not match the test set");
      }
    }
  }

  const SharedContext ctx{&data_.test, &latency_, &ledger_, &directory_};
  const std::vector<AgentId> members = config_.participant_ids();

  for (int c = 0; c < config_.num_clients; ++c) {
    const AgentId id = AgentId::client(c);
    const bool participating = config_.is_participant(c);
    ClientSettings s;
    s.id = id;
    s.algorithm = config_.algorithm;
    s.train = config_.train;
    s.dp = participating ? config_.dp_spec_for(c) : std::nullopt;
    s.tolerance = config_.tolerance;
    s.participating = participating;
    s.use_security = participating && config_.flags.use_security;
    s.subtract_dp_noise = config_.flags.subtract_dp_noise;
    s.client_dropout = config_.flags.client_dropout;
    s.weighted_averaging = config_.weighted_averaging;
    if (auto it = config_.scheduled_departures.find(c); it != config_.scheduled_departures.end()) {
      s.scheduled_departure = it->second;
    }
    if (config_.compute) s.injected_compute = config_.compute->clients.at(static_cast<std::size_t>(c));
    s.seed = config_.seeds.clients.at(static_cast<std::size_t>(c));
    std::vector<AgentId> federation = participating ? members : std::vector<AgentId>{id};
    clients_.push_back(std::make_unique<ClientAgent>(std::move(s), data_.client_data[static_cast<std::size_t>(c)],
                                                     ctx, std::move(federation)));
    directory_.add(*clients_.back());
  }
  directory_.freeze();

  if (config_.topology == Topology::Centralized) {
    ServerSettings s;
    if (config_.flags.use_dp_privacy && config_.privacy.placement == dp::Placement::GlobalServer) {
      s.global_dp = dp::DpSpec{config_.privacy.mechanism, 1.0, 0.0, dp::Placement::GlobalServer};
    }
    std::map<AgentId, std::vector<std::size_t>> sizes;
    for (AgentId m : members) {
      if (config_.flags.use_dp_privacy) {
        s.epsilons[m] = config_.privacy.epsilons.at(static_cast<std::size_t>(m.index));
        s.deltas[m] = config_.privacy.deltas.empty() ? 0.0 : config_.privacy.deltas.at(static_cast<std::size_t>(m.index));
      }
      for (const Dataset& d : data_.client_data[static_cast<std::size_t>(m.index)]) sizes[m].push_back(d.rows());
    }
    s.l2_alpha = config_.train.l2_alpha;
    s.weighted_averaging = config_.weighted_averaging;
    if (config_.compute) s.injected_compute = config_.compute->server;
    s.seed = config_.seeds.server;
    s.parallel = options_.parallel;
    server_ = std::make_unique<ServerAgent>(std::move(s), ctx, members, std::move(sizes));
  }
}

Simulation::~Simulation() = default;

ClientAgent& Simulation::client(AgentId id) { return directory_.client(id); }

void Simulation::offline_phase() {
  if (offline_done_) return;
  offline_done_ = true;
  if (!config_.flags.use_security) return;
  const auto before = ledger_.snapshot().offline_client_client;
  const auto members = config_.participant_ids();
  for (AgentId m : members) client(m).send_pubkeys();
  for (AgentId m : members) client(m).initialize_common_keys();
  pubkey_messages_ = ledger_.snapshot().offline_client_client - before;
  for (AgentId a : members) {
    for (AgentId b : members) {
      if (a != b) offline_sim_time_ = std::max(offline_sim_time_, latency_(a, b));
    }
  }
}

std::vector<AgentId> Simulation::active_members() const {
  std::vector<AgentId> out;
  for (const auto& c : clients_) {
    if (c->settings().participating && c->active()) out.push_back(c->id());
  }
  return out;
}

void Simulation::serverless_round(int iteration, const std::vector<AgentId>& members) {
  std::int64_t min_size = std::numeric_limits<std::int64_t>::max();
  for (AgentId m : members) min_size = std::min(min_size, static_cast<std::int64_t>(client(m).dataset_size(iteration)));
  const auto active_count = static_cast<std::int64_t>(members.size());

  auto outboxes = for_each_agent<std::vector<Envelope>>(members, options_.parallel, [&](AgentId m) {
    Envelope start{m, m, MessageKind::RoundStart, iteration,
                   {{"active_count", active_count}, {"min_dataset_size", min_size}}, 0.0};
    return client(m).broadcast_weights(start);
  });
  std::map<AgentId, std::vector<Envelope>> inboxes;
  for (auto& outbox : outboxes) {
    for (auto& msg : outbox) inboxes[msg.recipient].push_back(std::move(msg));
  }
  for_each_agent<bool>(members, options_.parallel,
                       [&](AgentId m) { return client(m).receive_peer_weights(inboxes[m]); });

  std::vector<AgentId> departed;
  std::vector<AgentId> survivors;
  for (AgentId m : members) (client(m).departing() ? departed : survivors).push_back(m);
  for (AgentId d : departed) {
    const double sent = client(d).history(iteration).receipt_time;
    for (AgentId s : survivors) {
      Envelope notice{d, s, MessageKind::DropoutNotice, iteration, {{"dropped", std::vector<AgentId>{d}}},
                      sent + latency_(d, s)};
      ledger_.record(notice, true);
      client(s).remove_active_clients(notice);
    }
  }
}

std::optional<IterationReport> Simulation::run_iteration(int iteration) {
  if (!offline_done_) offline_phase();
  std::vector<AgentId> starting;
  for (const auto& c : clients_) {
    if (c->active()) starting.push_back(c->id());
  }
  if (starting.empty()) return std::nullopt;

  IterationReport report;
  report.iteration = iteration;
  const std::vector<AgentId> members = active_members();
  if (!members.empty()) {
    if (server_) {
      ServerRoundResult round = server_->server_round(iteration);
      report.server_compute_duration = round.compute_duration;
      report.server_federated = std::move(round.federated);
    } else {
      serverless_round(iteration, members);
    }
  }
  for (AgentId id : starting) {
    ClientAgent& c = client(id);
    if (!c.settings().participating) c.train_standalone(iteration);
  }

  for (AgentId id : starting) {
    const ClientAgent& c = client(id);
    const ClientIterationState& st = c.history(iteration);
    ClientRecord rec;
    rec.client = id;
    rec.participating = c.settings().participating;
    rec.eval = st.eval;
    rec.receipt_sim_time = st.receipt_time;
    rec.compute_duration = st.compute_duration;
    rec.dropped = st.departed;
    rec.retrained = st.update.retrained;
    rec.converged = st.converged;
    rec.convergence_distance = st.convergence_distance;
    rec.local_weights = st.update.clean;
    rec.received_weights = st.received;
    if (rec.dropped) report.dropouts.push_back(id);
    report.clients.push_back(std::move(rec));
  }
  return report;
}

SimulationResult Simulation::run() {
  offline_phase();
  SimulationResult result;
  for (int it = 1; it <= config_.num_iterations; ++it) {
    auto report = run_iteration(it);
    if (!report) break;
    result.reports.push_back(std::move(*report));
  }
  result.messages = ledger_.snapshot();
  result.pubkey_messages = pubkey_messages_;
  result.offline_sim_time = offline_sim_time_;
  return result;
}

SimulationResult run_simulation(const SimConfig& config, SimulationData data, EngineOptions options) {
  Simulation sim(config, std::move(data), options);
  return sim.run();
}

}  // namespace fedsim::sim
