// fedsim command line: run, validate, synth.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedsim/config_io.hpp"
#include "fedsim/data_pipeline.hpp"
#include "fedsim/reports.hpp"
#include "fedsim/sim_engine.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

void print_warnings(const fedsim::SimConfig& cfg) {
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
}

int run(const std::string& config_path, const std::string& out_dir, bool sequential) {
  const auto cfg = fedsim::load_config(config_path);
  print_warnings(cfg);
  auto data = fedsim::prepare_data(cfg, std::filesystem::path(config_path).parent_path());
  const auto result = fedsim::sim::run_simulation(cfg, std::move(data), {.parallel = !sequential});
  fedsim::emit_reports(result, cfg, out_dir);
  std::cout << "ran " << result.reports.size() << " of " << cfg.num_iterations << " iterations; reports in "
            << out_dir << '\n';
  return kOk;
}

int validate(const std::string& config_path) {
  const auto cfg = fedsim::load_config(config_path);
  print_warnings(cfg);
  // Resolving the data catches missing files and row shortfalls before a run.
  fedsim::prepare_data(cfg, std::filesystem::path(config_path).parent_path());
  std::cout << config_path << ": ok\n";
  return kOk;
}

int synth(int classes, int features, int rows, double separation, std::uint64_t seed, const std::string& out) {
  fedsim::RandomStream rng(seed);
  const auto data = fedsim::synth_dataset(classes, features, rows, separation, rng);
  fedsim::write_csv_dataset(data, out);
  std::cout << "wrote " << data.rows() << " rows to " << out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool sequential = false;
  auto* run_cmd = app.add_subcommand("run", "Run a simulation and write reports");
  run_cmd->add_option("config", config_path, "Config JSON")->required();
  run_cmd->add_option("--out", out_dir, "Output directory")->required();
  run_cmd->add_flag("--sequential", sequential, "Run client work on the calling thread");

  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("config", config_path, "Config JSON")->required();

  int classes = 2;
  int features = 2;
  int rows = 100;
  double separation = 3.0;
  std::uint64_t seed = 0;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Gaussian-blob dataset as CSV");
  synth_cmd->add_option("--classes", classes)->required();
  synth_cmd->add_option("--features", features)->required();
  synth_cmd->add_option("--rows", rows)->required();
  synth_cmd->add_option("--separation", separation)->capture_default_str();
  synth_cmd->add_option("--seed", seed)->required();
  synth_cmd->add_option("--out", synth_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (run_cmd->parsed()) return run(config_path, out_dir, sequential);
    if (validate_cmd->parsed()) return validate(config_path);
    return synth(classes, features, rows, separation, seed, synth_out);
  } catch (const fedsim::ValidationError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const fedsim::ConfigParseError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid arguments: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
