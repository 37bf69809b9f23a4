#pragma once

// Closed-form level predictions: the glass branch continued from Gamma = 0,
// the paramagnetic branch continued from Gamma = infinity, and the two-level
// reduction of the avoided crossing between them.

#include <cmath>
#include <string>

#include "qrem/errors.hpp"

namespace qrem {

enum class Branch { kRem, kQuantumParamagnet };

struct BranchPrediction {
  Branch origin = Branch::kRem;
  double level = 0.0;  // unperturbed energy E_i (REM) or flip count k (QP)
  double gamma = 0.0;
  double predicted = 0.0;
};

// E_i(Gamma) = E_i + n Gamma^2 / E_i for an extensive level E_i.
inline double rem_branch(double level_energy, int n, double gamma) {
  if (level_energy == 0.0) throw DomainError("glass branch needs a nonzero (extensive) level energy");
  return level_energy + n * gamma * gamma / level_energy;
}

// Level of the k-flip transverse multiplet, -Gamma (n - 2k), shifted by -1/(2 Gamma).
inline double qp_branch(int n, double gamma, int k = 0) {
  if (!(gamma > 0.0)) throw DomainError("paramagnetic branch is singular at Gamma <= 0");
  if (k < 0 || k > n) throw DomainError("excitation index " + std::to_string(k) + " outside [0, n]");
  return -gamma * (n - 2 * k) - 0.5 / gamma;
}

inline BranchPrediction predict_rem(double level_energy, int n, double gamma) {
  return {Branch::kRem, level_energy, gamma, rem_branch(level_energy, n, gamma)};
}

inline BranchPrediction predict_qp(int n, double gamma, int k = 0) {
  return {Branch::kQuantumParamagnet, static_cast<double>(k), gamma, qp_branch(n, gamma, k)};
}

// Splitting of the two-level problem spanned by the classical ground state
// (energy e0) and the uniform superposition (energy -n Gamma), whose overlap
// squared is 2^-n:
//   Delta^2 = (n Gamma - e0)^2 - 4 [ -e0 n Gamma + e0 n Gamma 2^-n ].
// The radicand is evaluated in the equivalent cancellation-free form
//   (n Gamma - |e0|)^2 + 4 |e0| n Gamma 2^-n.
inline double two_level_gap(double e0, int n, double gamma) {
  if (!(e0 < 0.0)) throw DomainError("classical ground energy must be negative");
  if (!(gamma >= 0.0)) throw DomainError("transverse field must be >= 0");
  const double a = -e0;
  const double x = n * gamma;
  const double overlap_sq = std::exp2(-static_cast<double>(n));
  const double detuning = x - a;
  const double radicand = detuning * detuning + 4.0 * a * x * overlap_sq;
  if (!std::isfinite(radicand)) throw NumericError("two-level radicand is not finite");
  return std::sqrt(radicand);
}

struct GapPrediction {
  double gamma_star = 0.0;
  double delta_min = 0.0;
};

// Crossing at Gamma* = |e0|/n with splitting 2 |e0| 2^(-n/2).
inline GapPrediction minimal_gap_prediction(double e0, int n) {
  if (!(e0 < 0.0)) throw DomainError("classical ground energy must be negative");
  if (n < 1) throw DomainError("spin count must be positive");
  const double a = -e0;
  return {a / n, 2.0 * a * std::exp2(-0.5 * n)};
}

}  // namespace qrem
