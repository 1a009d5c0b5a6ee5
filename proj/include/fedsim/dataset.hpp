#ifndef FEDSIM_DATASET_HPP_
#define FEDSIM_DATASET_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace fedsim {

// N x F row-major features with integer labels in [0, num_classes).
class Dataset {
 public:
  Dataset() = default;
  // Throws std::invalid_argument when row counts disagree or a label is out of range.
  Dataset(std::size_t num_features, int num_classes, std::vector<double> features, std::vector<int> labels);

  std::size_t rows() const { return labels_.size(); }
  std::size_t num_features() const { return num_features_; }
  int num_classes() const { return num_classes_; }
  bool empty() const { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * num_features_, num_features_);
  }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<double>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  // Rows in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t num_features_ = 0;
  int num_classes_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
};

}  // namespace fedsim

#endif  // FEDSIM_DATASET_HPP_
