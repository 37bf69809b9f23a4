#pragma once

// H = diag(E) - Gamma * V on the n-cube, V the single-spin-flip adjacency.
//
// Basis state a encodes the spins as the bits of a, so the neighbours of a
// are a ^ (1 << i). The transverse coupling enters with a minus sign: the
// uniform superposition is then the ground state of -Gamma V with energy
// -n Gamma, and its overlap with every basis state is +2^(-n/2).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrem/errors.hpp"
#include "qrem/parallel.hpp"
#include "qrem/rem.hpp"

namespace qrem {

using Complex = std::complex<double>;

// Largest n for which an explicit matrix is built.
inline constexpr int kMaxDenseSpins = 12;

// Complex amplitudes over the 2^n computational basis.
struct QuantumState {
  int n = 0;
  std::vector<Complex> amplitudes;

  QuantumState() = default;
  explicit QuantumState(int spins) : n(spins), amplitudes(basis_size(spins)) {}
  QuantumState(int spins, std::vector<Complex> amps) : n(spins), amplitudes(std::move(amps)) {
    if (amplitudes.size() != basis_size(n)) throw DimensionError("state length is not 2^n");
  }

  std::size_t dimension() const { return amplitudes.size(); }

  double norm() const {
    double s = 0.0;
    for (const Complex& z : amplitudes) s += std::norm(z);
    return std::sqrt(s);
  }

  void normalize() {
    const double s = norm();
    if (!(s > 0.0)) throw NumericError("cannot normalize a zero state");
    for (Complex& z : amplitudes) z /= s;
  }

  double probability(std::size_t index) const { return std::norm(amplitudes[index]); }

  static QuantumState from_real(int spins, std::span<const double> values) {
    QuantumState s(spins);
    if (values.size() != s.dimension()) throw DimensionError("state length is not 2^n");
    for (std::size_t a = 0; a < values.size(); ++a) s.amplitudes[a] = values[a];
    return s;
  }
};

// Uniform superposition: ground state of the pure transverse term.
inline QuantumState qp_ground_state(int n) {
  RemInstance::check_spins(n);
  QuantumState s(n);
  const double amp = std::pow(2.0, -0.5 * n);
  for (Complex& z : s.amplitudes) z = amp;
  return s;
}

class FieldedHamiltonian {
 public:
  FieldedHamiltonian(const RemInstance& instance, double gamma) : instance_(&instance), gamma_(gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("transverse field must be finite and >= 0");
  }

  const RemInstance& instance() const { return *instance_; }
  double gamma() const { return gamma_; }
  int n() const { return instance_->n(); }
  std::size_t dimension() const { return instance_->dimension(); }

  // Upper bound on the spectral radius.
  double norm_bound() const { return instance_->max_abs_energy() + n() * gamma_; }

  // y = H x. T is double or std::complex<double>. Every output element is
  // accumulated in the same order (diagonal, then bits 0..n-1), so the
  // result does not depend on the thread count.
  template <typename T>
  void apply(std::span<const T> x, std::span<T> y, int threads = 1) const {
    if (x.size() != dimension() || y.size() != dimension()) {
      throw DimensionError("apply: vector length " + std::to_string(x.size()) + "/" +
                           std::to_string(y.size()) + " but dimension is " + std::to_string(dimension()));
    }
    const std::size_t block = std::min(dimension(), kBlock);
    parallel_chunks(dimension() / block, threads, [&](std::size_t first, std::size_t last) {
      for (std::size_t b = first; b < last; ++b) apply_block<T>(x, y, b * block, block);
    });
  }

  template <typename T>
  std::vector<T> apply(const std::vector<T>& x, int threads = 1) const {
    std::vector<T> y(x.size());
    apply<T>(std::span<const T>(x), std::span<T>(y), threads);
    return y;
  }

  // Rows [begin, end) of H x, element by element.
  template <typename T>
  void apply_range(std::span<const T> x, std::span<T> y, std::size_t begin, std::size_t end) const {
    const std::span<const double> e = instance_->energies();
    const int spins = n();
    const double g = gamma_;
    for (std::size_t a = begin; a < end; ++a) {
      T acc = e[a] * x[a];
      for (int i = 0; i < spins; ++i) acc -= g * x[a ^ (std::size_t{1} << i)];
      y[a] = acc;
    }
  }

  Eigen::MatrixXd dense_matrix() const {
    if (n() > kMaxDenseSpins) {
      throw CapacityError("dense matrix requested for n=" + std::to_string(n()) + " > " +
                          std::to_string(kMaxDenseSpins));
    }
    const auto dim = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
      h(a, a) = instance_->energy(static_cast<std::size_t>(a));
      for (int i = 0; i < n(); ++i) h(a, a ^ (Eigen::Index{1} << i)) = -gamma_;
    }
    return h;
  }

 private:
  static constexpr std::size_t kBlock = std::size_t{1} << 12;

  // Rows [start, start + size) where size is a power of two and start a
  // multiple of it: bits below log2(size) pair rows inside the block, higher
  // bits pair the block with a partner block.
  template <typename T>
  void apply_block(std::span<const T> x, std::span<T> y, std::size_t start, std::size_t size) const {
    const std::span<const double> e = instance_->energies();
    const double g = gamma_;
    const T* xs = x.data() + start;
    T* ys = y.data() + start;
    for (std::size_t t = 0; t < size; ++t) ys[t] = e[start + t] * xs[t];
    int bit = 0;
    for (; (std::size_t{1} << bit) < size; ++bit) {
      const std::size_t half = std::size_t{1} << bit;
      for (std::size_t base = 0; base < size; base += 2 * half) {
        for (std::size_t t = base; t < base + half; ++t) {
          ys[t] -= g * xs[t + half];
          ys[t + half] -= g * xs[t];
        }
      }
    }
    for (; bit < n(); ++bit) {
      const T* partner = x.data() + (start ^ (std::size_t{1} << bit));
      for (std::size_t t = 0; t < size; ++t) ys[t] -= g * partner[t];
    }
  }

  const RemInstance* instance_;
  double gamma_;
};

inline Eigen::MatrixXd dense_matrix(const FieldedHamiltonian& h) { return h.dense_matrix(); }

}  // namespace qrem
