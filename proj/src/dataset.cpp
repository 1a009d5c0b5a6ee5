#include "fedsim/dataset.hpp"

#include <stdexcept>
#include <string>

namespace fedsim {

Dataset::Dataset(std::size_t num_features, int num_classes, std::vector<double> features, std::vector<int> labels)
    : num_features_(num_features),
      num_classes_(num_classes),
      features_(std::move(features)),
      labels_(std::move(labels)) {
  if (num_classes_ < 1) throw std::invalid_argument("Dataset: num_classes must be positive");
  if (features_.size() != labels_.size() * num_features_) {
    throw std::invalid_argument("Dataset: feature matrix has " + std::to_string(features_.size()) +
                                " cells, expected " + std::to_string(labels_.size() * num_features_));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      throw std::invalid_argument("Dataset: label " + std::to_string(labels_[i]) + " at row " + std::to_string(i) +
                                  " is outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  std::vector<int> labels;
  features.reserve(indices.size() * num_features_);
  labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= rows()) throw std::out_of_range("Dataset::subset: row index out of range");
    auto r = row(idx);
    features.insert(features.end(), r.begin(), r.end());
    labels.push_back(labels_[idx]);
  }
  return Dataset(num_features_, num_classes_, std::move(features), std::move(labels));
}

}  // namespace fedsim
