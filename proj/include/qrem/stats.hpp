#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "qrem/errors.hpp"

namespace qrem {

// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
inline double quantile(std::span<const double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::span<const double> values) { return quantile(values, 0.5); }

inline double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

inline double geometric_mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : values) s += std::log(v);
  return std::exp(s / static_cast<double>(values.size()));
}

struct Summary {
  double median = 0.0;
  double mean = 0.0;
  double geometric_mean = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

inline Summary summarize(std::span<const double> values) {
  return {median(values), mean(values), geometric_mean(values), quantile(values, 0.25), quantile(values, 0.75)};
}

struct LinearFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
  double slope_ci_low = -std::numeric_limits<double>::infinity();
  double slope_ci_high = std::numeric_limits<double>::infinity();
  double confidence = 0.95;
  std::size_t points = 0;

  bool has_slope() const { return std::isfinite(slope); }
  bool has_interval() const { return std::isfinite(slope_ci_low) && std::isfinite(slope_ci_high); }
};

// Ordinary least squares y = intercept + slope x with a two-sided Student-t
// interval on the slope. Fewer than two points: no slope; exactly two: no
// interval.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y, double confidence = 0.95) {
  if (x.size() != y.size()) throw DimensionError("fit_line: x and y lengths differ");
  LinearFit fit;
  fit.points = x.size();
  fit.confidence = confidence;
  if (x.size() < 2) return fit;
  const double n = static_cast<double>(x.size());
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() < 3) return fit;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  const double dof = n - 2.0;
  fit.slope_stderr = std::sqrt(sse / dof / sxx);
  const boost::math::students_t dist(dof);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.5 * (1.0 - confidence)));
  fit.slope_ci_low = fit.slope - t * fit.slope_stderr;
  fit.slope_ci_high = fit.slope + t * fit.slope_stderr;
  return fit;
}

}  // namespace qrem
