#pragma once

// Large-p instanton endpoints in the static approximation. Actions are per
// spin; only the interface cost G is extensive.

#include <cmath>
#include <numbers>
#include <string>

#include "qrem/errors.hpp"
#include "qrem/rem.hpp"

namespace qrem {

// |<x|z>| for a single spin.
inline const double kSpinBasisOverlap = 1.0 / std::numbers::sqrt2;

struct InstantonParams {
  double theta = 0.0;  // fraction of imaginary time spent in the glass state
  double beta = 1.0;
  double j = 1.0;
  double gamma = 0.0;
  int k = 0;           // number of jumps between glass and paramagnet
  int n = 1;

  void validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("theta must lie in [0, 1]");
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (!(j > 0.0)) throw DomainError("coupling J must be positive");
    if (!(gamma >= 0.0)) throw DomainError("transverse field must be >= 0");
    if (k < 0 || k % 2 != 0) throw DomainError("jump count must be even and >= 0, got " + std::to_string(k));
    if (n < 1) throw DomainError("spin count must be positive");
  }
};

// Saddle-point Parisi block size m = 2 sqrt(2) / (theta beta J).
inline double static_m(double theta, double beta, double j) {
  if (!(theta > 0.0 && beta > 0.0 && j > 0.0)) throw DomainError("static_m needs positive theta, beta, J");
  return 2.0 * std::numbers::sqrt2 / (theta * beta * j);
}

// -beta f per spin of a path with k jumps spending a fraction theta in the glass.
inline double instanton_action(const InstantonParams& p) {
  p.validate();
  return p.theta * kSqrtLn2 * p.beta * p.j / 2.0 + (1.0 - p.theta) * p.beta * p.gamma +
         p.k * std::log(kSpinBasisOverlap);
}

struct SurfaceCost {
  double g = 0.0;          // G = n ln|<x|z>|
  double gap_scale = 0.0;  // e^G
};

inline SurfaceCost surface_cost_gap(int n) {
  if (n < 1) throw DomainError("spin count must be positive");
  // e^G = 2^(-n/2) evaluated as a power of two so that it is exact.
  return {n * std::log(kSpinBasisOverlap), std::exp2(-0.5 * n)};
}

struct BalancedTheta {
  double theta = 0.0;
  double action = 0.0;
  bool degenerate = false;  // glass and paramagnet terms tie; any theta is optimal
};

// Maximizer of the jump-free action over theta. The action is linear in
// theta, so the optimum sits at an endpoint unless the slopes tie.
inline BalancedTheta balanced_theta_action(double beta, double j, double gamma) {
  if (!(beta > 0.0 && j > 0.0 && gamma > 0.0)) throw DomainError("balanced_theta_action needs positive inputs");
  const double glass = kSqrtLn2 * j / 2.0;
  const double slope = beta * (glass - gamma);
  const double scale = beta * std::max(glass, gamma);
  if (std::abs(slope) <= 1e-12 * scale) return {1.0, beta * gamma, true};
  const double theta = slope > 0.0 ? 1.0 : 0.0;
  return {theta, instanton_action({theta, beta, j, gamma, 0, 1}), false};
}

}  // namespace qrem
