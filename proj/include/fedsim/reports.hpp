#ifndef FEDSIM_REPORTS_HPP_
#define FEDSIM_REPORTS_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fedsim/sim_config.hpp"
#include "fedsim/sim_engine.hpp"

namespace fedsim {

std::string accuracy_csv(const sim::SimulationResult& result);
std::string timing_csv(const sim::SimulationResult& result);
nlohmann::json summary_json(const sim::SimulationResult& result, const SimConfig& config);

// Writes accuracy.csv, timing.csv and summary.json, creating out_dir if needed.
void emit_reports(const sim::SimulationResult& result, const SimConfig& config, const std::filesystem::path& out_dir);

}  // namespace fedsim

#endif  // FEDSIM_REPORTS_HPP_
