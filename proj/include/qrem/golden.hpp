#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qrem/errors.hpp"

namespace qrem {

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
  double lo = 0.0;  // final bracket
  double hi = 0.0;
  std::vector<std::pair<double, double>> evaluations;  // (x, f(x)) in call order
};

// Golden-section search for a minimum of f on [lo, hi], stopping once the
// bracket is narrower than `width`. Returns the best point evaluated.
template <typename F>
GoldenResult golden_section_minimize(F&& f, double lo, double hi, double width, int max_evals = 200) {
  if (!(lo < hi)) throw SearchError("golden-section bracket is empty");
  if (!(width > 0.0)) throw DomainError("golden-section width must be positive");
  static const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;

  GoldenResult out;
  auto eval = [&](double x) {
    const double v = f(x);
    out.evaluations.emplace_back(x, v);
    return v;
  };

  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > width && static_cast<int>(out.evaluations.size()) < max_evals) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
    }
  }
  out.lo = a;
  out.hi = b;
  out.x = out.evaluations.front().first;
  out.value = out.evaluations.front().second;
  for (const auto& [x, v] : out.evaluations) {
    if (v < out.value) {
      out.x = x;
      out.value = v;
    }
  }
  return out;
}

}  // namespace qrem
