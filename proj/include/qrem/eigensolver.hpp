#pragma once

// Lowest eigenpairs of a real symmetric operator by thick-restart Lanczos
// with full reorthogonalization.
//
// Each new direction goes through the three-term recurrence followed by a
// classical Gram-Schmidt sweep against the whole basis, so the basis stays
// orthonormal to working precision. The projected matrix is assembled from
// the removed components; after a restart it therefore has the arrowhead
// form (Ritz values on the diagonal, couplings to the continuation vector in
// the next row) without special bookkeeping.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qrem/errors.hpp"
#include "qrem/rng.hpp"

namespace qrem {

template <typename Op>
concept SymmetricOperator = requires(const Op& op, std::span<const double> x, std::span<double> y) {
  { op.dimension() } -> std::convertible_to<std::size_t>;
  op.template apply<double>(x, y);
};

struct LanczosOptions {
  std::size_t k = 1;
  double tol = 1e-10;            // absolute residual bound ||H v - lambda v||
  int max_restarts = -1;         // -1: 10 * log2(dim) * k
  std::size_t extra = 0;         // retained extra Ritz vectors p; 0 means max(4, k)
  std::size_t basis_size = 0;    // 0 means max(2(k+p), k+p+10)
  std::uint64_t start_seed = 0x5eed;
  bool want_vectors = true;
  // Optional warm start: the starting vector is the normalized sum of these.
  std::vector<std::vector<double>> warm_start;
};

struct EigenResult {
  std::vector<double> eigenvalues;               // ascending
  std::vector<std::vector<double>> eigenvectors; // empty unless requested
  std::vector<double> residuals;                 // ||H v - lambda v||
  std::vector<bool> converged;
  int iterations = 0;  // operator applications
  int restarts = 0;
  std::vector<double> ground_history;  // lowest Ritz value after each cycle

  bool all_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
  }
  double gap() const { return eigenvalues.size() >= 2 ? eigenvalues[1] - eigenvalues[0] : 0.0; }
};

namespace detail {

using Basis = Eigen::MatrixXd;  // one Krylov vector per column

inline double dot(std::span<const double> a, std::span<const double> b) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()))
      .dot(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
}

inline double norm2(std::span<const double> a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())).norm();
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

inline std::span<double> column(Basis& basis, std::size_t j) {
  return {basis.col(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(basis.rows())};
}

inline std::span<const double> column(const Basis& basis, std::size_t j) {
  return {basis.col(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(basis.rows())};
}

// One classical Gram-Schmidt pass against the first `count` columns;
// returns the removed components.
inline Eigen::VectorXd gram_schmidt_pass(const Basis& basis, std::size_t count, Eigen::Map<Eigen::VectorXd> w) {
  if (count == 0) return {};
  const auto block = basis.leftCols(static_cast<Eigen::Index>(count));
  Eigen::VectorXd h = block.transpose() * w;
  w.noalias() -= block * h;
  return h;
}

inline Eigen::Map<Eigen::VectorXd> as_vector(std::span<double> w) {
  return {w.data(), static_cast<Eigen::Index>(w.size())};
}

// Classical Gram-Schmidt against basis[0..count), repeated once more if the
// norm dropped by more than 1/sqrt(2) (Daniel-Gragg-Kaufman-Stewart
// criterion). Adds the removed components to coeff.
inline void reorthogonalize(const Basis& basis, std::size_t count, std::span<double> w, std::vector<double>& coeff) {
  for (int pass = 0; pass < 2; ++pass) {
    const double before = norm2(w);
    const Eigen::VectorXd h = gram_schmidt_pass(basis, count, as_vector(w));
    for (std::size_t i = 0; i < count; ++i) coeff[i] += h(static_cast<Eigen::Index>(i));
    if (norm2(w) > (1.0 / std::numbers::sqrt2) * before) break;
  }
}

// Orthogonalizes w against basis[0..count) twice; returns the removed components.
inline std::vector<double> orthogonalize(const Basis& basis, std::size_t count, std::span<double> w) {
  std::vector<double> coeff(count, 0.0);
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd h = gram_schmidt_pass(basis, count, as_vector(w));
    for (std::size_t i = 0; i < count; ++i) coeff[i] += h(static_cast<Eigen::Index>(i));
  }
  return coeff;
}

inline void random_unit_vector(std::uint64_t seed, std::uint64_t salt, std::span<double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = bits_to_open_unit(random_bits(seed ^ (salt * 0x9E3779B97F4A7C15ull), Stream::kStartVector, 0, i)) - 0.5;
  }
  scale(1.0 / norm2(v), v);
}

}  // namespace detail

template <SymmetricOperator Op>
EigenResult lowest_eigenpairs(const Op& op, const LanczosOptions& options) {
  using detail::axpy;
  using detail::column;
  using detail::norm2;

  const std::size_t dim = op.dimension();
  const std::size_t k = options.k;
  if (k < 1 || k > dim) {
    throw DomainError("requested " + std::to_string(k) + " eigenpairs of a dimension-" + std::to_string(dim) +
                      " operator");
  }
  if (!(options.tol > 0.0)) throw DomainError("eigensolver tolerance must be positive");

  const std::size_t extra = options.extra > 0 ? options.extra : std::max<std::size_t>(4, k);
  const std::size_t keep = std::min(k + extra, dim);
  std::size_t m = options.basis_size > 0 ? options.basis_size : std::max(2 * (k + extra), k + extra + 10);
  m = std::min(std::max(m, keep + 1), dim);
  int max_restarts = options.max_restarts;
  if (max_restarts < 0) {
    const int log_dim = static_cast<int>(std::lround(std::log2(static_cast<double>(dim))));
    max_restarts = 10 * std::max(log_dim, 1) * static_cast<int>(k);
  }

  EigenResult result;
  auto apply = [&](std::span<const double> x, std::span<double> y) {
    op.template apply<double>(x, y);
    ++result.iterations;
  };

  // Column m holds the continuation vector.
  detail::Basis basis(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(m + 1));
  Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::uint64_t salt = 0;

  // Starting vector.
  {
    std::span<double> v0 = column(basis, 0);
    std::fill(v0.begin(), v0.end(), 0.0);
    bool have = false;
    for (const auto& w : options.warm_start) {
      if (w.size() != dim) throw DimensionError("warm-start vector has wrong length");
      axpy(1.0, w, v0);
      have = true;
    }
    double nv = have ? norm2(v0) : 0.0;
    if (!(nv > 1e-300)) {
      detail::random_unit_vector(options.start_seed, salt++, v0);
    } else {
      detail::scale(1.0 / nv, v0);
    }
  }

  std::vector<double> w(dim);
  std::size_t kept = 0;   // leading Ritz vectors carried over from the last cycle
  std::size_t filled = 0; // columns of proj assembled so far
  double beta_last = 0.0;
  bool exhausted = false;  // basis spans an invariant subspace equal to the whole space

  Eigen::VectorXd theta;
  Eigen::MatrixXd ritz;

  // V * ritz[:, 0..count) for the first `active` basis columns.
  auto ritz_vectors = [&](std::size_t count, std::size_t active) -> Eigen::MatrixXd {
    return basis.leftCols(static_cast<Eigen::Index>(active)) *
           ritz.topLeftCorner(static_cast<Eigen::Index>(active), static_cast<Eigen::Index>(count));
  };

  for (;;) {
    // Expand the Krylov basis up to m columns.
    bool fresh_at_end = false;
    // After a breakdown the fresh direction may lead to further copies of
    // a degenerate level, which the residual estimates of the old block
    // cannot reveal: fill the basis before judging convergence.
    bool broke_down = false;
    for (std::size_t j = kept; j < m; ++j) {
      apply(column(std::as_const(basis), j), w);
      std::vector<double> h(j + 1, 0.0);
      if (j == kept) {
        // First column of a cycle couples to every carried Ritz vector.
        h = detail::orthogonalize(basis, j + 1, w);
      } else {
        // Three-term recurrence, then a full reorthogonalization sweep.
        h[j - 1] = proj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1));
        axpy(-h[j - 1], column(std::as_const(basis), j - 1), w);
        h[j] = detail::dot(column(std::as_const(basis), j), w);
        axpy(-h[j], column(std::as_const(basis), j), w);
        detail::reorthogonalize(basis, j + 1, w, h);
      }
      for (std::size_t i = 0; i <= j; ++i) {
        proj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h[i];
        proj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = h[i];
      }
      filled = j + 1;
      double beta = norm2(w);
      const double scale_ref = std::max(std::abs(h[j]), 1.0);
      if (j + 1 == dim || beta <= 1e-12 * scale_ref) {
        if (j + 1 == dim) {
          beta_last = 0.0;
          exhausted = true;
          break;
        }
        // Invariant subspace found; continue with a fresh direction.
        broke_down = true;
        beta = 0.0;
        for (int attempt = 0; attempt < 8; ++attempt) {
          detail::random_unit_vector(options.start_seed, salt++, w);
          detail::orthogonalize(basis, j + 1, w);
          const double nw = norm2(w);
          if (nw > 1e-8) {
            detail::scale(1.0 / nw, w);
            break;
          }
        }
        std::copy(w.begin(), w.end(), column(basis, j + 1).begin());
        if (j + 1 < m) {
          proj(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j)) = 0.0;
          proj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j + 1)) = 0.0;
        }
        beta_last = 0.0;
        fresh_at_end = j + 1 == m;
        continue;
      }
      detail::scale(1.0 / beta, w);
      std::copy(w.begin(), w.end(), column(basis, j + 1).begin());
      beta_last = beta;
      if (j + 1 < m) {
        proj(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j)) = beta;
        proj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j + 1)) = beta;
      }

      // Stop expanding as soon as the wanted Ritz pairs look converged.
      if (filled >= k && !broke_down) {
        const auto active = static_cast<Eigen::Index>(filled);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> probe(proj.topLeftCorner(active, active));
        bool done = true;
        for (std::size_t i = 0; i < k && done; ++i) {
          done = std::abs(beta * probe.eigenvectors()(active - 1, static_cast<Eigen::Index>(i))) <= options.tol;
        }
        if (done) break;
      }
    }

    const auto active = static_cast<Eigen::Index>(filled);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(proj.topLeftCorner(active, active));
    theta = eig.eigenvalues();
    ritz = eig.eigenvectors();
    result.ground_history.push_back(theta(0));

    const std::size_t want = std::min<std::size_t>(k, filled);
    bool estimates_ok = want == k;
    for (std::size_t i = 0; i < want && estimates_ok; ++i) {
      const double est = std::abs(beta_last * ritz(active - 1, static_cast<Eigen::Index>(i)));
      if (est > options.tol) estimates_ok = false;
    }

    // A zero residual estimate after a breakdown in the last column only says
    // the subspace is invariant; the fresh direction has not been explored.
    if (fresh_at_end) estimates_ok = false;
    const bool out_of_budget = result.restarts >= max_restarts;
    if (estimates_ok || exhausted || out_of_budget) {
      Eigen::MatrixXd vecs = ritz_vectors(want, filled);
      result.eigenvalues.assign(want, 0.0);
      result.residuals.assign(want, 0.0);
      result.converged.assign(want, false);
      bool verified = true;
      for (std::size_t i = 0; i < want; ++i) {
        std::span<double> v = column(vecs, i);
        detail::scale(1.0 / norm2(v), v);
        apply(v, w);
        const double lam = detail::dot(v, w);
        axpy(-lam, v, w);
        result.eigenvalues[i] = lam;
        result.residuals[i] = norm2(w);
        result.converged[i] = result.residuals[i] <= options.tol;
        verified = verified && result.converged[i];
      }
      if (verified || exhausted || out_of_budget) {
        // Rayleigh quotients of nearly degenerate pairs can swap order.
        std::vector<std::size_t> order(want);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return result.eigenvalues[a] < result.eigenvalues[b]; });
        EigenResult sorted = result;
        for (std::size_t i = 0; i < want; ++i) {
          sorted.eigenvalues[i] = result.eigenvalues[order[i]];
          sorted.residuals[i] = result.residuals[order[i]];
          sorted.converged[i] = result.converged[order[i]];
        }
        if (options.want_vectors) {
          sorted.eigenvectors.resize(want);
          for (std::size_t i = 0; i < want; ++i) {
            const std::span<const double> v = column(std::as_const(vecs), order[i]);
            sorted.eigenvectors[i].assign(v.begin(), v.end());
          }
        }
        return sorted;
      }
    }

    // Thick restart: keep the lowest Ritz vectors, continue from column `filled`.
    ++result.restarts;
    const std::size_t next_kept = std::min(keep, filled - 1);
    const Eigen::MatrixXd carried = ritz_vectors(next_kept, filled);
    basis.col(static_cast<Eigen::Index>(next_kept)) = basis.col(active);
    basis.leftCols(static_cast<Eigen::Index>(next_kept)) = carried;
    proj.setZero();
    for (std::size_t i = 0; i < next_kept; ++i) {
      proj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = theta(static_cast<Eigen::Index>(i));
    }
    kept = next_kept;
    filled = next_kept;
  }
}

}  // namespace qrem
