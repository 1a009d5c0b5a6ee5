// Independent reference computations used by the tests. Nothing here calls
// into the library's samplers or trainers.
#ifndef FEDSIM_TESTS_ORACLES_HPP_
#define FEDSIM_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

inline double laplace_cdf(double x, double scale) {
  return x < 0.0 ? 0.5 * std::exp(x / scale) : 1.0 - 0.5 * std::exp(-x / scale);
}

// Two-sided one-sample Kolmogorov-Smirnov statistic D_n.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// p-value with the Stephens small-sample correction.
inline double ks_p_value(const std::vector<double>& samples, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(samples.size());
  const double root = std::sqrt(n);
  return kolmogorov_q((root + 0.12 + 0.11 / root) * ks_statistic(samples, cdf));
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Regularized multinomial cross-entropy written out directly:
// mean_i [-log softmax(W x_i + b)_{y_i}] + alpha/2 * ||W||^2 over every entry.
// w is row-major C x (F + 1), bias in the last column.
inline double logreg_loss(const std::vector<double>& w, std::size_t classes, std::size_t features,
                          const std::vector<double>& x, const std::vector<int>& y, double alpha) {
  const std::size_t cols = features + 1;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::vector<double> z(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      double s = w[c * cols + features];
      for (std::size_t f = 0; f < features; ++f) s += w[c * cols + f] * x[i * features + f];
      z[c] = s;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    total += -(z[static_cast<std::size_t>(y[i])] - zmax - std::log(denom));
  }
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return total / static_cast<double>(y.size()) + 0.5 * alpha * reg;
}

}  // namespace oracle

#endif  // FEDSIM_TESTS_ORACLES_HPP_
