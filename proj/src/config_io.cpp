#include "fedsim/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fedsim {

using nlohmann::json;

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<Topology> kTopologies[] = {{Topology::Centralized, "centralized"},
                                              {Topology::Serverless, "serverless"}};
constexpr EnumName<Algorithm> kAlgorithms[] = {{Algorithm::Alg1, "alg1"}, {Algorithm::Alg2, "alg2"}};
constexpr EnumName<dp::Mechanism> kMechanisms[] = {{dp::Mechanism::Laplace, "laplace"},
                                                   {dp::Mechanism::Gaussian, "gaussian"},
                                                   {dp::Mechanism::DistributedLaplace, "distributed_laplace"}};
constexpr EnumName<dp::Placement> kPlacements[] = {{dp::Placement::Local, "local"},
                                                   {dp::Placement::GlobalServer, "global_server"},
                                                   {dp::Placement::Distributed, "distributed"}};

template <typename E, std::size_t N>
std::string enum_name(const EnumName<E> (&table)[N], E value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  throw std::logic_error("unnamed enum value");
}

// A JSON object together with its dotted path, for error messages.
class Node {
 public:
  Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& value() const { return value_; }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void require_object() const {
    if (!value_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  // Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    require_object();
    std::set<std::string> names(allowed.begin(), allowed.end());
    for (const auto& [key, _] : value_.items()) {
      if (!names.contains(key)) throw ValidationError(child_path(key), "unknown field");
    }
  }

  bool has(const std::string& key) const { return value_.contains(key) && !value_.at(key).is_null(); }

  Node at(const std::string& key) const {
    if (!has(key)) throw ValidationError(child_path(key), "required field is missing");
    return Node(value_.at(key), child_path(key));
  }

  template <typename T>
  T as() const {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!value_.is_boolean()) throw ValidationError(path_, "expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!value_.is_number_integer()) throw ValidationError(path_, "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (value_.is_number_integer() && !value_.is_number_unsigned()) {
            throw ValidationError(path_, "expected a nonnegative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!value_.is_number()) throw ValidationError(path_, "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value_.is_string()) throw ValidationError(path_, "expected a string");
      }
      return value_.get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(path_, e.what());
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? at(key).as<T>() : fallback;
  }

  template <typename T>
  std::vector<T> list(const std::string& key) const {
    Node node = at(key);
    if (!node.value_.is_array()) throw ValidationError(node.path_, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < node.value_.size(); ++i) {
      out.push_back(Node(node.value_[i], node.path_ + "[" + std::to_string(i) + "]").as<T>());
    }
    return out;
  }

  template <typename E, std::size_t N>
  E choice(const std::string& key, const EnumName<E> (&table)[N], E fallback) const {
    if (!has(key)) return fallback;
    const auto text = at(key).as<std::string>();
    for (const auto& entry : table) {
      if (text == entry.name) return entry.value;
    }
    std::string options;
    for (const auto& entry : table) options += std::string(options.empty() ? "" : ", ") + entry.name;
    throw ValidationError(child_path(key), "'" + text + "' is not one of: " + options);
  }

 private:
  const json& value_;
  std::string path_;
};

AgentId parse_agent(const Node& node) {
  const auto text = node.as<std::string>();
  auto id = AgentId::parse(text);
  if (!id) throw ValidationError(node.path(), "'" + text + "' is not an agent name");
  return *id;
}

int parse_client_index(const std::string& key, const std::string& path) {
  auto id = AgentId::parse(key);
  if (id && id->is_client()) return id->index;
  std::size_t used = 0;
  try {
    const int value = std::stoi(key, &used);
    if (used == key.size()) return value;
  } catch (const std::exception&) {
  }
  throw ValidationError(path, "'" + key + "' is neither a client index nor a client name");
}

}  // namespace

std::string to_string(Topology t) { return enum_name(kTopologies, t); }
std::string to_string(Algorithm a) { return enum_name(kAlgorithms, a); }
std::string to_string(dp::Mechanism m) { return enum_name(kMechanisms, m); }
std::string to_string(dp::Placement p) { return enum_name(kPlacements, p); }

SimConfig config_from_json(const json& doc) {
  const Node root(doc, "");
  root.only({"num_clients", "num_iterations", "topology", "algorithm", "flags", "privacy", "data", "tolerance",
             "latencies", "seeds", "train", "compute", "participants", "scheduled_departures",
             "weighted_averaging"});

  SimConfig cfg;
  cfg.num_clients = root.at("num_clients").as<int>();
  cfg.num_iterations = root.at("num_iterations").as<int>();
  cfg.topology = root.choice("topology", kTopologies, cfg.topology);
  cfg.algorithm = root.choice("algorithm", kAlgorithms, cfg.algorithm);
  cfg.tolerance = root.get("tolerance", cfg.tolerance);
  cfg.weighted_averaging = root.get("weighted_averaging", cfg.weighted_averaging);

  if (root.has("flags")) {
    Node f = root.at("flags");
    f.only({"use_security", "use_dp_privacy", "subtract_dp_noise", "client_dropout", "simulate_latencies",
            "using_cumulative"});
    cfg.flags.use_security = f.get("use_security", false);
    cfg.flags.use_dp_privacy = f.get("use_dp_privacy", false);
    cfg.flags.subtract_dp_noise = f.get("subtract_dp_noise", false);
    cfg.flags.client_dropout = f.get("client_dropout", false);
    cfg.flags.simulate_latencies = f.get("simulate_latencies", false);
    cfg.flags.using_cumulative = f.get("using_cumulative", cfg.algorithm == Algorithm::Alg2);
  } else {
    cfg.flags.using_cumulative = cfg.algorithm == Algorithm::Alg2;
  }

  if (root.has("privacy")) {
    Node p = root.at("privacy");
    p.only({"mechanism", "placement", "epsilons", "deltas"});
    cfg.privacy.mechanism = p.choice("mechanism", kMechanisms, cfg.privacy.mechanism);
    const auto default_placement = cfg.privacy.mechanism == dp::Mechanism::DistributedLaplace
                                       ? dp::Placement::Distributed
                                       : dp::Placement::Local;
    cfg.privacy.placement = p.choice("placement", kPlacements, default_placement);
    if (p.has("epsilons")) cfg.privacy.epsilons = p.list<double>("epsilons");
    if (p.has("deltas")) cfg.privacy.deltas = p.list<double>("deltas");
  }

  {
    Node d = root.at("data");
    d.only({"source", "test_size", "sizes"});
    cfg.data.test_size = d.get("test_size", cfg.data.test_size);
    Node src = d.at("source");
    src.only({"synthetic", "csv"});
    if (src.has("synthetic") == src.has("csv")) {
      throw ValidationError(src.path(), "exactly one of 'synthetic' or 'csv' is required");
    }
    if (src.has("synthetic")) {
      Node s = src.at("synthetic");
      s.only({"classes", "features", "rows", "separation"});
      SyntheticSource synth;
      synth.classes = s.get("classes", synth.classes);
      synth.features = s.get("features", synth.features);
      synth.rows = s.get("rows", synth.rows);
      synth.separation = s.get("separation", synth.separation);
      cfg.data.source = synth;
    } else {
      Node c = src.at("csv");
      c.only({"path", "label_column"});
      CsvSource csv;
      csv.path = c.at("path").as<std::string>();
      csv.label_column = c.get("label_column", csv.label_column);
      cfg.data.source = csv;
    }
    Node sizes = d.at("sizes");
    if (!sizes.value().is_array()) throw ValidationError(sizes.path(), "expected an array of per-client arrays");
    for (std::size_t c = 0; c < sizes.value().size(); ++c) {
      Node row(sizes.value()[c], sizes.path() + "[" + std::to_string(c) + "]");
      if (!row.value().is_array()) throw ValidationError(row.path(), "expected an array of per-iteration sizes");
      std::vector<int> per_iteration;
      for (std::size_t i = 0; i < row.value().size(); ++i) {
        per_iteration.push_back(Node(row.value()[i], row.path() + "[" + std::to_string(i) + "]").as<int>());
      }
      cfg.data.sizes.push_back(std::move(per_iteration));
    }
  }

  if (root.has("latencies")) {
    Node l = root.at("latencies");
    if (!l.value().is_array()) throw ValidationError(l.path(), "expected an array of {from, to, seconds}");
    for (std::size_t i = 0; i < l.value().size(); ++i) {
      Node entry(l.value()[i], l.path() + "[" + std::to_string(i) + "]");
      entry.only({"from", "to", "seconds", "symmetric"});
      const AgentId from = parse_agent(entry.at("from"));
      const AgentId to = parse_agent(entry.at("to"));
      const double seconds = entry.at("seconds").as<double>();
      try {
        if (entry.get("symmetric", false)) {
          cfg.latencies.set_symmetric(from, to, seconds);
        } else {
          cfg.latencies.set(from, to, seconds);
        }
      } catch (const std::invalid_argument& e) {
        throw ValidationError(entry.path(), e.what());
      }
    }
  }

  {
    Node s = root.at("seeds");
    s.only({"clients", "server", "data"});
    cfg.seeds.clients = s.list<std::uint64_t>("clients");
    cfg.seeds.server = s.get<std::uint64_t>("server", 0);
    cfg.seeds.data = s.get<std::uint64_t>("data", 0);
  }

  if (root.has("train")) {
    Node t = root.at("train");
    t.only({"local_steps", "learning_rate", "l2_alpha", "batch_size"});
    cfg.train.local_steps = t.get("local_steps", cfg.train.local_steps);
    cfg.train.learning_rate = t.get("learning_rate", cfg.train.learning_rate);
    cfg.train.l2_alpha = t.get("l2_alpha", cfg.train.l2_alpha);
    cfg.train.batch_size = t.get("batch_size", cfg.train.batch_size);
  }

  if (root.has("compute")) {
    Node c = root.at("compute");
    c.only({"clients", "server"});
    ComputeDurations compute;
    compute.clients = c.list<double>("clients");
    compute.server = c.get("server", 0.0);
    cfg.compute = compute;
  }

  if (root.has("participants")) cfg.participants = root.list<int>("participants");

  if (root.has("scheduled_departures")) {
    Node s = root.at("scheduled_departures");
    s.require_object();
    for (const auto& [key, value] : s.value().items()) {
      const int client = parse_client_index(key, s.child_path(key));
      cfg.scheduled_departures[client] = Node(value, s.child_path(key)).as<int>();
    }
  }

  cfg.validate();
  return cfg;
}

json config_to_json(const SimConfig& cfg) {
  json doc;
  doc["num_clients"] = cfg.num_clients;
  doc["num_iterations"] = cfg.num_iterations;
  doc["topology"] = to_string(cfg.topology);
  doc["algorithm"] = to_string(cfg.algorithm);
  doc["flags"] = {{"use_security", cfg.flags.use_security},
                  {"use_dp_privacy", cfg.flags.use_dp_privacy},
                  {"subtract_dp_noise", cfg.flags.subtract_dp_noise},
                  {"client_dropout", cfg.flags.client_dropout},
                  {"simulate_latencies", cfg.flags.simulate_latencies},
                  {"using_cumulative", cfg.flags.using_cumulative}};
  doc["privacy"] = {{"mechanism", to_string(cfg.privacy.mechanism)},
                    {"placement", to_string(cfg.privacy.placement)},
                    {"epsilons", cfg.privacy.epsilons},
                    {"deltas", cfg.privacy.deltas}};

  json source;
  if (const auto* synth = std::get_if<SyntheticSource>(&cfg.data.source)) {
    source["synthetic"] = {{"classes", synth->classes},
                           {"features", synth->features},
                           {"rows", synth->rows},
                           {"separation", synth->separation}};
  } else {
    const auto& csv = std::get<CsvSource>(cfg.data.source);
    source["csv"] = {{"path", csv.path}, {"label_column", csv.label_column}};
  }
  doc["data"] = {{"source", source}, {"test_size", cfg.data.test_size}, {"sizes", cfg.data.sizes}};
  doc["tolerance"] = cfg.tolerance;

  json latencies = json::array();
  for (const auto& [pair, seconds] : cfg.latencies.entries()) {
    latencies.push_back({{"from", pair.first.name()}, {"to", pair.second.name()}, {"seconds", seconds}});
  }
  doc["latencies"] = latencies;
  doc["seeds"] = {{"clients", cfg.seeds.clients}, {"server", cfg.seeds.server}, {"data", cfg.seeds.data}};
  doc["train"] = {{"local_steps", cfg.train.local_steps},
                  {"learning_rate", cfg.train.learning_rate},
                  {"l2_alpha", cfg.train.l2_alpha},
                  {"batch_size", cfg.train.batch_size}};
  if (cfg.compute) doc["compute"] = {{"clients", cfg.compute->clients}, {"server", cfg.compute->server}};
  if (cfg.participants) doc["participants"] = *cfg.participants;
  json departures = json::object();
  for (const auto& [client, iteration] : cfg.scheduled_departures) departures[std::to_string(client)] = iteration;
  doc["scheduled_departures"] = departures;
  doc["weighted_averaging"] = cfg.weighted_averaging;
  return doc;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigParseError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const SimConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
  out << config_to_json(config).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace fedsim
