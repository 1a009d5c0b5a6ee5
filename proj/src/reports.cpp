#include "fedsim/reports.hpp"

#include <cstdio>
#include <fstream>

#include "fedsim/config_io.hpp"

namespace fedsim {

using nlohmann::json;

namespace {

std::string fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string accuracy_csv(const sim::SimulationResult& result) {
  std::string out = "iteration,client,local_accuracy,federated_accuracy\n";
  for (const auto& report : result.reports) {
    for (const auto& rec : report.clients) {
      out += std::to_string(report.iteration) + "," + rec.client.name() + "," + fixed6(rec.eval.local_accuracy) +
             "," + fixed6(rec.eval.federated_accuracy) + "\n";
    }
  }
  return out;
}

std::string timing_csv(const sim::SimulationResult& result) {
  std::string out = "iteration,client,receipt_sim_time_s,compute_s,dropped\n";
  for (const auto& report : result.reports) {
    for (const auto& rec : report.clients) {
      out += std::to_string(report.iteration) + "," + rec.client.name() + "," + fixed6(rec.receipt_sim_time) + "," +
             fixed6(rec.compute_duration) + "," + (rec.dropped ? "true" : "false") + "\n";
    }
  }
  return out;
}

json summary_json(const sim::SimulationResult& result, const SimConfig& config) {
  json iterations = json::array();
  for (const auto& report : result.reports) {
    double local = 0.0;
    double federated = 0.0;
    double latest = 0.0;
    json dropouts = json::array();
    for (const auto& rec : report.clients) {
      local += rec.eval.local_accuracy;
      federated += rec.eval.federated_accuracy;
      latest = std::max(latest, rec.receipt_sim_time);
    }
    for (AgentId id : report.dropouts) dropouts.push_back(id.name());
    const auto n = static_cast<double>(report.clients.size());
    iterations.push_back({{"iteration", report.iteration},
                          {"active_clients", report.clients.size()},
                          {"mean_local_accuracy", local / n},
                          {"mean_federated_accuracy", federated / n},
                          {"max_receipt_sim_time_s", latest},
                          {"server_compute_s", report.server_compute_duration},
                          {"dropouts", dropouts}});
  }
  return {{"config", config_to_json(config)},
          {"iterations", iterations},
          {"messages",
           {{"offline_client_client", result.messages.offline_client_client},
            {"online_client_client", result.messages.online_client_client},
            {"client_to_server", result.messages.client_to_server},
            {"server_to_client", result.messages.server_to_client}}},
          {"pubkey_messages", result.pubkey_messages},
          {"offline_sim_time_s", result.offline_sim_time}};
}

void emit_reports(const sim::SimulationResult& result, const SimConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "accuracy.csv", accuracy_csv(result));
  write_file(out_dir / "timing.csv", timing_csv(result));
  write_file(out_dir / "summary.json", summary_json(result, config).dump(2) + "\n");
}

}  // namespace fedsim
