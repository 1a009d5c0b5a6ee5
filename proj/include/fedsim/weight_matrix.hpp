#ifndef FEDSIM_WEIGHT_MATRIX_HPP_
#define FEDSIM_WEIGHT_MATRIX_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace fedsim {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

// Dense row-major real matrix. For models it is classes x (features + 1),
// with the bias in the last column.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  explicit WeightMatrix(Shape shape, double fill = 0.0);
  WeightMatrix(Shape shape, std::vector<double> values);
  // Row-wise literal, mostly for tests: {{1, 2}, {3, 4}}.
  WeightMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static WeightMatrix zeros(std::size_t rows, std::size_t cols) { return WeightMatrix({rows, cols}); }

  Shape shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * shape_.cols, shape_.cols);
  }

  WeightMatrix& operator+=(const WeightMatrix& other);
  WeightMatrix& operator-=(const WeightMatrix& other);
  WeightMatrix& operator*=(double factor);
  WeightMatrix& operator/=(double divisor);

  bool all_finite() const;

  // Elementwise bit equality (so -0.0 != 0.0 and NaN == NaN of the same payload).
  bool bit_equal(const WeightMatrix& other) const;
  bool operator==(const WeightMatrix& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

WeightMatrix operator+(WeightMatrix lhs, const WeightMatrix& rhs);
WeightMatrix operator-(WeightMatrix lhs, const WeightMatrix& rhs);

// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const WeightMatrix& a, const WeightMatrix& b, const char* what);

// Largest elementwise |a - b|.
double max_abs_difference(const WeightMatrix& a, const WeightMatrix& b);

// Wire encoding.
//
// Everything an agent transmits is snapped to a fixed-point grid of spacing
// kWireResolution and bounded by kWireMagnitudeLimit. On that grid, sums of up
// to a few hundred million units are exactly representable as doubles, so
// additive masks and noise records cancel bit-exactly regardless of summation
// order.
inline constexpr double kWireResolution = 0x1.0p-24;
inline constexpr double kWireMagnitudeLimit = 0x1.0p20;

double to_wire(double value);
// Throws std::range_error when a value is non-finite or exceeds the limit.
WeightMatrix to_wire(const WeightMatrix& w);
bool on_wire_grid(double value);
bool on_wire_grid(const WeightMatrix& w);

}  // namespace fedsim

#endif  // FEDSIM_WEIGHT_MATRIX_HPP_
