#ifndef FEDSIM_CONFIG_IO_HPP_
#define FEDSIM_CONFIG_IO_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fedsim/sim_config.hpp"

namespace fedsim {

// The document is not valid JSON, or the file cannot be read.
class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strict decoding: unknown keys and wrong types are ValidationErrors naming
// the field. The result is validated before it is returned.
SimConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const SimConfig& config);

SimConfig load_config(const std::filesystem::path& path);
void save_config(const SimConfig& config, const std::filesystem::path& path);

std::string to_string(Topology t);
std::string to_string(Algorithm a);
std::string to_string(dp::Mechanism m);
std::string to_string(dp::Placement p);

}  // namespace fedsim

#endif  // FEDSIM_CONFIG_IO_HPP_
