#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace qmcrank::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty range");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample variance (n-1 denominator).
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2)
    throw std::invalid_argument("sample variance needs >= 2 values");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double standard_error(std::span<const double> xs) {
  return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

// Least-squares slope of y against x.
inline double least_squares_slope(std::span<const double> x,
                                  std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("slope fit needs >= 2 matched points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

// Slope of log2(y) against log2(x); the decay-rate fit for error curves.
inline double log_log_slope(std::span<const double> x,
                            std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log2(x[i]);
    ly[i] = std::log2(y[i]);
  }
  return least_squares_slope(lx, ly);
}

}  // namespace qmcrank::stats
