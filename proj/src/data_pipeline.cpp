#include "fedsim/data_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fedsim {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t line_no, std::size_t column) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(value)) {
    throw CsvError("line " + std::to_string(line_no) + ", column " + std::to_string(column + 1) + ": '" +
                   std::string(cell) + "' is not a finite number");
  }
  return value;
}

}  // namespace

InsufficientDataError::InsufficientDataError(std::size_t required, std::size_t available)
    : std::runtime_error("partition needs " + std::to_string(required) + " rows but the source has " +
                         std::to_string(available) + " (short by " + std::to_string(required - available) + ")"),
      required_(required),
      available_(available) {}

Dataset synth_dataset(int classes, int features, int rows, double separation, RandomStream& rng) {
  if (classes < 2) throw std::invalid_argument("synth_dataset: need at least 2 classes");
  if (features < 1) throw std::invalid_argument("synth_dataset: need at least 1 feature");
  if (rows < classes) throw std::invalid_argument("synth_dataset: rows must be at least the class count");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("synth_dataset: separation must be a nonnegative number");
  }
  const auto F = static_cast<std::size_t>(features);
  const auto C = static_cast<std::size_t>(classes);

  std::vector<double> centres(C * F, 0.0);
  if (F >= C) {
    for (std::size_t c = 0; c < C; ++c) centres[c * F + c] = separation / std::sqrt(2.0);
  } else {
    for (std::size_t c = 0; c < C; ++c) centres[c * F] = separation * static_cast<double>(c);
  }

  std::vector<int> labels(static_cast<std::size_t>(rows));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % C);
  shuffle(std::span<int>(labels), rng);

  std::vector<double> x(labels.size() * F);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    for (std::size_t f = 0; f < F; ++f) x[i * F + f] = centres[c * F + f] + rng.standard_normal();
  }
  return Dataset(F, classes, std::move(x), std::move(labels));
}

Dataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header_line = line;
      header = split_fields(header_line);
      break;
    }
  }
  if (header.empty()) throw CsvError(path.string() + " is empty");

  const auto label_it = std::find(header.begin(), header.end(), std::string_view(label_column));
  if (label_it == header.end()) throw CsvError(path.string() + ": no column named '" + label_column + "'");
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t width = header.size();
  if (width < 2) throw CsvError(path.string() + ": need at least one feature column besides the label");

  std::vector<double> features;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_fields(line);
    if (cells.size() != width) {
      throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " cells, found " +
                     std::to_string(cells.size()));
    }
    for (std::size_t col = 0; col < width; ++col) {
      const double value = parse_cell(cells[col], line_no, col);
      if (col == label_index) {
        if (value != std::floor(value) || value < 0.0 || value > 1e6) {
          throw CsvError("line " + std::to_string(line_no) + ": label '" + std::string(cells[col]) +
                         "' is not a nonnegative integer");
        }
        labels.push_back(static_cast<int>(value));
      } else {
        features.push_back(value);
      }
    }
  }
  if (labels.empty()) throw CsvError(path.string() + " has a header but no data rows");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  return Dataset(width - 1, std::max(classes, 2), std::move(features), std::move(labels));
}

void write_csv_dataset(const Dataset& data, const std::filesystem::path& path, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t f = 0; f < data.num_features(); ++f) out << 'x' << f << ',';
  out << label_column << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (double v : data.row(i)) out << v << ',';
    out << data.label(i) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

PartitionPlan partition_dataset(std::size_t source_rows, const SimConfig& cfg, RandomStream& rng) {
  if (cfg.data.test_size < 0) throw std::invalid_argument("partition_dataset: negative test size");
  std::size_t required = static_cast<std::size_t>(cfg.data.test_size);
  for (const auto& per_iteration : cfg.data.sizes) {
    for (int n : per_iteration) {
      if (n < 0) throw std::invalid_argument("partition_dataset: negative dataset size");
      required += static_cast<std::size_t>(n);
    }
  }
  if (required > source_rows) throw InsufficientDataError(required, source_rows);

  std::vector<std::size_t> order(source_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);

  PartitionPlan plan;
  auto next = order.begin();
  plan.test_rows.assign(next, next + cfg.data.test_size);
  next += cfg.data.test_size;
  for (const auto& per_iteration : cfg.data.sizes) {
    std::vector<std::vector<std::size_t>> client;
    std::vector<std::size_t> current;
    for (int n : per_iteration) {
      if (!cfg.flags.using_cumulative) current.clear();
      current.insert(current.end(), next, next + n);
      next += n;
      client.push_back(current);
    }
    plan.client_rows.push_back(std::move(client));
  }
  return plan;
}

PartitionPlan partition_dataset(const Dataset& source, const SimConfig& cfg, RandomStream& rng) {
  return partition_dataset(source.rows(), cfg, rng);
}

sim::SimulationData materialize(const Dataset& source, const PartitionPlan& plan) {
  sim::SimulationData data;
  data.test = source.subset(plan.test_rows);
  for (const auto& client : plan.client_rows) {
    std::vector<Dataset> per_iteration;
    for (const auto& rows : client) per_iteration.push_back(source.subset(rows));
    data.client_data.push_back(std::move(per_iteration));
  }
  return data;
}

sim::SimulationData prepare_data(const SimConfig& cfg, const std::filesystem::path& base_dir) {
  const RandomStream root(cfg.seeds.data);
  Dataset source;
  if (const auto* synth = std::get_if<SyntheticSource>(&cfg.data.source)) {
    RandomStream rng = root.child("synthetic");
    source = synth_dataset(synth->classes, synth->features, synth->rows, synth->separation, rng);
  } else {
    const auto& csv = std::get<CsvSource>(cfg.data.source);
    std::filesystem::path path(csv.path);
    if (path.is_relative()) path = base_dir / path;
    source = load_csv_dataset(path, csv.label_column);
  }
  RandomStream rng = root.child("partition");
  return materialize(source, partition_dataset(source, cfg, rng));
}

}  // namespace fedsim
