#ifndef FEDSIM_DATA_PIPELINE_HPP_
#define FEDSIM_DATA_PIPELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/random.hpp"
#include "fedsim/sim_config.hpp"
#include "fedsim/sim_engine.hpp"

namespace fedsim {

class InsufficientDataError : public std::runtime_error {
 public:
  InsufficientDataError(std::size_t required, std::size_t available);
  std::size_t required() const { return required_; }
  std::size_t available() const { return available_; }
  std::size_t shortfall() const { return required_ - available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row indices into a source dataset.
struct PartitionPlan {
  // client_rows[c][i] holds the rows client c trains on in iteration i + 1.
  std::vector<std::vector<std::vector<std::size_t>>> client_rows;
  std::vector<std::size_t> test_rows;
};

// Gaussian blobs with unit variance. When features >= classes the class
// centres sit on scaled axes so every pair is `separation` apart; otherwise
// they are spaced `separation` apart along the first axis. Labels cycle
// through the classes and are then shuffled.
Dataset synth_dataset(int classes, int features, int rows, double separation, RandomStream& rng);

// Header row, comma separated numeric cells, integral nonnegative labels.
// Classes are 0..max label.
Dataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column);
void write_csv_dataset(const Dataset& data, const std::filesystem::path& path, const std::string& label_column = "label");

// Needs test_size + sum of sizes rows. The first test_size shuffled rows form
// the test set; every client then takes fresh rows per iteration. With
// using_cumulative, iteration i also keeps everything from iteration i - 1.
PartitionPlan partition_dataset(std::size_t source_rows, const SimConfig& cfg, RandomStream& rng);
PartitionPlan partition_dataset(const Dataset& source, const SimConfig& cfg, RandomStream& rng);

sim::SimulationData materialize(const Dataset& source, const PartitionPlan& plan);

// Builds or loads the source named by the config (relative CSV paths resolve
// against base_dir) and partitions it with the data seed.
sim::SimulationData prepare_data(const SimConfig& cfg, const std::filesystem::path& base_dir);

}  // namespace fedsim

#endif  // FEDSIM_DATA_PIPELINE_HPP_
