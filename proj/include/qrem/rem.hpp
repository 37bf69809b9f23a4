#pragma once

// Random energy model: disorder realizations, classical and paramagnetic
// free energies, and the first-order boundary between them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qrem/errors.hpp"
#include "qrem/rng.hpp"

namespace qrem {

// Largest supported spin count. 2^26 doubles is 512 MiB for the energies
// alone; eigensolver bases multiply that.
inline constexpr int kMaxSpins = 26;

inline const double kLn2 = std::numbers::ln2;
inline const double kSqrtLn2 = std::sqrt(std::numbers::ln2);

inline std::size_t basis_size(int n) { return std::size_t{1} << n; }

// One disorder realization: 2^n independent Gaussian levels of variance n/2.
class RemInstance {
 public:
  // Regenerates the instance identified by (n, seed).
  static RemInstance sample(int n, std::uint64_t seed) {
    check_spins(n);
    const std::size_t dim = basis_size(n);
    std::vector<double> energies(dim);
    const double scale = std::sqrt(0.5 * n);
    for (std::size_t a = 0; a < dim; ++a) {
      energies[a] = scale * standard_normal(seed, Stream::kEnergies, static_cast<std::uint32_t>(n), a);
    }
    return RemInstance(n, seed, std::move(energies), false);
  }

  // Hand-crafted level list; its length must be a power of two.
  static RemInstance from_energies(std::vector<double> energies) {
    const std::size_t dim = energies.size();
    if (dim < 2 || (dim & (dim - 1)) != 0) {
      throw DimensionError("energy list length " + std::to_string(dim) + " is not 2^n with n >= 1");
    }
    int n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    check_spins(n);
    for (double e : energies) {
      if (!std::isfinite(e)) throw DomainError("crafted energies must be finite");
    }
    return RemInstance(n, 0, std::move(energies), true);
  }

  int n() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  bool crafted() const { return crafted_; }
  std::size_t dimension() const { return energies_.size(); }
  std::span<const double> energies() const { return energies_; }
  double energy(std::size_t index) const { return energies_[index]; }

  std::size_t ground_index() const { return ground_index_; }
  double ground_energy() const { return energies_[ground_index_]; }
  double max_abs_energy() const { return max_abs_; }

  // The k lowest levels in ascending order.
  std::vector<double> lowest_energies(std::size_t k) const {
    k = std::min(k, energies_.size());
    std::vector<double> sorted = energies_;
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    sorted.resize(k);
    return sorted;
  }

  static void check_spins(int n) {
    if (n < 1 || n > kMaxSpins) {
      throw CapacityError("spin count " + std::to_string(n) + " outside [1, " +
                          std::to_string(kMaxSpins) + "]");
    }
  }

 private:
  RemInstance(int n, std::uint64_t seed, std::vector<double> energies, bool crafted)
      : n_(n), seed_(seed), crafted_(crafted), energies_(std::move(energies)) {
    ground_index_ = static_cast<std::size_t>(
        std::min_element(energies_.begin(), energies_.end()) - energies_.begin());
    for (double e : energies_) max_abs_ = std::max(max_abs_, std::abs(e));
  }

  int n_;
  std::uint64_t seed_;
  bool crafted_;
  std::vector<double> energies_;
  std::size_t ground_index_ = 0;
  double max_abs_ = 0.0;
};

inline RemInstance sample_instance(int n, std::uint64_t seed) { return RemInstance::sample(n, seed); }

// ---------------------------------------------------------------------------
// Thermodynamics, J = 1 units, all quantities per spin.

// Freezing temperature, from ds/de at the lower band edge: 1/T_c = 2 sqrt(ln 2).
inline double critical_temperature() { return 0.5 / kSqrtLn2; }

// Lower band edge e_0 = -sqrt(ln 2).
inline double ground_energy_density() { return -kSqrtLn2; }

// Annealed entropy density s(e) = ln 2 - e^2 on the populated band.
inline double entropy_density(double e) {
  if (!(std::abs(e) <= kSqrtLn2)) {
    throw DomainError("energy density " + std::to_string(e) + " outside the populated band");
  }
  // Factored so that the band edges give exactly zero.
  const double a = std::abs(e);
  return std::max(0.0, (kSqrtLn2 - a) * (kSqrtLn2 + a));
}

inline double classical_free_energy(double temperature) {
  if (!(temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  if (temperature <= critical_temperature()) return -kSqrtLn2;
  return -0.25 / temperature - temperature * kLn2;
}

// log(cosh(x)) without overflow.
inline double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - kLn2;
}

inline double paramagnetic_free_energy(double temperature, double gamma) {
  if (!(temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  if (temperature == 0.0) return -std::abs(gamma);
  return -temperature * kLn2 - temperature * log_cosh(gamma / temperature);
}

struct PhasePoint {
  double temperature = 0.0;
  double gamma_c = 0.0;
  bool frozen = false;  // T below the classical freezing temperature
};

// Transverse field at which the paramagnet overtakes the classical glass.
inline PhasePoint phase_boundary(double temperature, double tol = 1e-10) {
  if (!(temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");

  const double f_rem = classical_free_energy(temperature);
  // Positive while the glass is the stable branch.
  auto excess = [&](double gamma) { return paramagnetic_free_energy(temperature, gamma) - f_rem; };

  double lo = 1e-6;
  double hi = std::max(4.0, 4.0 * temperature);
  double f_lo = excess(lo);
  double f_hi = excess(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    throw SearchError("phase boundary not bracketed in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] at T=" + std::to_string(temperature));
  }
  // Terminate on the free-energy residual, or when the bracket collapses to
  // adjacent doubles.
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double f_mid = excess(mid);
    if (std::abs(f_mid) <= tol && hi - lo <= tol) break;
    if (mid <= lo || mid >= hi) break;
    if (f_mid > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return PhasePoint{temperature, mid, temperature < critical_temperature()};
}

}  // namespace qrem
