#include "fedsim/weight_matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedsim {

WeightMatrix::WeightMatrix(Shape shape, double fill) : shape_(shape), values_(shape.size(), fill) {}

WeightMatrix::WeightMatrix(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw std::invalid_argument("WeightMatrix: value count does not match shape");
  }
}

WeightMatrix::WeightMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  shape_.rows = rows.size();
  shape_.cols = rows.size() == 0 ? 0 : rows.begin()->size();
  values_.reserve(shape_.size());
  for (const auto& r : rows) {
    if (r.size() != shape_.cols) throw std::invalid_argument("WeightMatrix: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

WeightMatrix& WeightMatrix::operator+=(const WeightMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

WeightMatrix& WeightMatrix::operator-=(const WeightMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

WeightMatrix& WeightMatrix::operator*=(double factor) {
  for (double& v : values_) v *= factor;
  return *this;
}

WeightMatrix& WeightMatrix::operator/=(double divisor) {
  for (double& v : values_) v /= divisor;
  return *this;
}

bool WeightMatrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool WeightMatrix::bit_equal(const WeightMatrix& other) const {
  if (shape_ != other.shape_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(other.values_[i])) {
      return false;
    }
  }
  return true;
}

WeightMatrix operator+(WeightMatrix lhs, const WeightMatrix& rhs) { return lhs += rhs; }
WeightMatrix operator-(WeightMatrix lhs, const WeightMatrix& rhs) { return lhs -= rhs; }

void require_same_shape(const WeightMatrix& a, const WeightMatrix& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()) + ")");
  }
}

double max_abs_difference(const WeightMatrix& a, const WeightMatrix& b) {
  require_same_shape(a, b, "max_abs_difference");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double to_wire(double value) {
  if (!std::isfinite(value) || std::abs(value) > kWireMagnitudeLimit) {
    throw std::range_error("value " + std::to_string(value) + " is outside the wire encoding range");
  }
  return std::nearbyint(value / kWireResolution) * kWireResolution;
}

WeightMatrix to_wire(const WeightMatrix& w) {
  WeightMatrix out = w;
  for (double& v : out.values()) v = to_wire(v);
  return out;
}

bool on_wire_grid(double value) {
  if (!std::isfinite(value)) return false;
  const double units = value / kWireResolution;
  return units == std::nearbyint(units);
}

bool on_wire_grid(const WeightMatrix& w) {
  return std::all_of(w.values().begin(), w.values().end(), [](double v) { return on_wire_grid(v); });
}

}  // namespace fedsim
