#pragma once

// Spectra versus transverse field, minimal-gap search at the avoided
// crossing, and ensemble scaling of the minimal gap with system size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qrem/eigensolver.hpp"
#include "qrem/errors.hpp"
#include "qrem/golden.hpp"
#include "qrem/hamiltonian.hpp"
#include "qrem/parallel.hpp"
#include "qrem/perturbation.hpp"
#include "qrem/rem.hpp"
#include "qrem/rng.hpp"
#include "qrem/stats.hpp"

namespace qrem {

struct SpectrumCurve {
  std::vector<double> gammas;
  std::vector<std::vector<double>> levels;     // levels[i][point]
  std::vector<std::vector<double>> residuals;  // residuals[i][point]
  std::vector<bool> converged;                 // per point
  int iterations = 0;

  std::size_t k() const { return levels.size(); }
  bool all_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
  }
};

struct SpectrumOptions {
  double tol = 1e-10;
  bool warm_start = true;
  int max_restarts = -1;
};

namespace detail {

// Exact spectrum at Gamma = 0: the k lowest diagonal entries.
inline EigenResult diagonal_spectrum(const RemInstance& instance, std::size_t k, bool want_vectors) {
  std::vector<std::size_t> order(instance.dimension());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return instance.energy(a) < instance.energy(b); });
  EigenResult r;
  for (std::size_t i = 0; i < k; ++i) {
    r.eigenvalues.push_back(instance.energy(order[i]));
    r.residuals.push_back(0.0);
    r.converged.push_back(true);
    if (want_vectors) {
      std::vector<double> v(instance.dimension(), 0.0);
      v[order[i]] = 1.0;
      r.eigenvectors.push_back(std::move(v));
    }
  }
  return r;
}

}  // namespace detail

// k lowest levels at field gamma; exact diagonal at gamma = 0.
inline EigenResult solve_levels(const RemInstance& instance, double gamma, LanczosOptions options) {
  if (gamma == 0.0) return detail::diagonal_spectrum(instance, options.k, options.want_vectors);
  const FieldedHamiltonian h(instance, gamma);
  return lowest_eigenpairs(h, options);
}

inline SpectrumCurve spectrum_vs_field(const RemInstance& instance, const std::vector<double>& gammas,
                                       std::size_t k, const SpectrumOptions& options = {}) {
  if (k < 2) throw DomainError("spectrum scan needs at least two levels");
  if (k > instance.dimension()) throw DomainError("more levels requested than basis states");
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] >= 0.0)) throw DomainError("field grid must be non-negative");
    if (i > 0 && !(gammas[i] > gammas[i - 1])) throw DomainError("field grid must be strictly ascending");
  }
  SpectrumCurve curve;
  curve.gammas = gammas;
  curve.levels.assign(k, std::vector<double>(gammas.size(), 0.0));
  curve.residuals.assign(k, std::vector<double>(gammas.size(), 0.0));
  curve.converged.assign(gammas.size(), false);

  std::vector<std::vector<double>> previous;
  for (std::size_t p = 0; p < gammas.size(); ++p) {
    LanczosOptions lo;
    lo.k = k;
    lo.tol = options.tol;
    lo.max_restarts = options.max_restarts;
    lo.want_vectors = options.warm_start;
    if (options.warm_start) lo.warm_start = previous;
    EigenResult r = solve_levels(instance, gammas[p], std::move(lo));
    for (std::size_t i = 0; i < k; ++i) {
      curve.levels[i][p] = r.eigenvalues[i];
      curve.residuals[i][p] = r.residuals[i];
    }
    curve.converged[p] = r.all_converged();
    curve.iterations += r.iterations;
    if (options.warm_start) previous = std::move(r.eigenvectors);
  }
  return curve;
}

struct GapSearchOptions {
  std::optional<std::pair<double, double>> bracket;  // default [0.6, 1.4] * |E0|/n
  double tol_gamma = 1e-4;  // final bracket width, absolute
  double tol_eig = 1e-4;    // cap on the eigensolver residual; tightened to gap/100
  int grid_points = 200;    // fallback scan when the gap is not unimodal
  int max_restarts = -1;
};

struct GapResult {
  double gamma_star = 0.0;
  double delta_min = 0.0;
  double e0 = 0.0;
  int search_evals = 0;
  int matvecs = 0;
  bool non_unimodal = false;
  bool converged = true;  // every eigensolve met its tolerance
  double lo = 0.0;
  double hi = 0.0;
};

inline std::pair<double, double> default_gap_bracket(const RemInstance& instance) {
  const double predicted = std::abs(instance.ground_energy()) / instance.n();
  return {0.6 * predicted, 1.4 * predicted};
}

// Golden-section search for the minimum of lambda_1 - lambda_0 over the bracket.
inline GapResult minimal_gap(const RemInstance& instance, const GapSearchOptions& options = {}) {
  if (!(instance.ground_energy() < 0.0)) throw DomainError("minimal-gap search needs a negative ground energy");
  if (!(options.tol_gamma > 0.0)) throw DomainError("tol_gamma must be positive");
  if (!(options.tol_eig > 0.0)) throw DomainError("tol_eig must be positive");
  const auto [lo, hi] = options.bracket.value_or(default_gap_bracket(instance));
  if (!(lo > 0.0 && lo < hi)) throw DomainError("gap bracket must satisfy 0 < lo < hi");

  GapResult out;
  out.e0 = instance.ground_energy();
  out.lo = lo;
  out.hi = hi;

  double delta_estimate = minimal_gap_prediction(out.e0, instance.n()).delta_min;
  std::vector<std::vector<double>> previous;
  std::vector<std::pair<double, double>> hoppings;  // (Gamma, <V> in the lowest eigenvector)
  out.delta_min = std::numeric_limits<double>::infinity();

  // k lowest levels at gamma, warm-started from the previous evaluation.
  // Records <V> = -d lambda_0 / d Gamma of the lowest eigenvector.
  auto solve_at = [&](double gamma, std::size_t k, double tol) {
    LanczosOptions lo_opts;
    lo_opts.k = k;
    lo_opts.tol = tol;
    lo_opts.max_restarts = options.max_restarts;
    lo_opts.warm_start = previous;
    EigenResult r = solve_levels(instance, gamma, std::move(lo_opts));
    ++out.search_evals;
    out.matvecs += r.iterations;
    out.converged = out.converged && r.all_converged();
    previous = std::move(r.eigenvectors);
    double diag = 0.0;
    for (std::size_t a = 0; a < previous[0].size(); ++a) diag += instance.energy(a) * previous[0][a] * previous[0][a];
    hoppings.emplace_back(gamma, (diag - r.eigenvalues[0]) / gamma);
    return r;
  };

  auto gap_at = [&](double gamma) {
    // The measured quantity is a difference of eigenvalues: keep the
    // residual well below the smallest gap seen so far.
    const EigenResult r = solve_at(gamma, 2, std::min(options.tol_eig, std::max(delta_estimate / 100.0, 1e-12)));
    const double g = r.eigenvalues[1] - r.eigenvalues[0];
    delta_estimate = std::min(delta_estimate, g);
    if (g < out.delta_min) {
      out.delta_min = g;
      out.gamma_star = gamma;
    }
    return g;
  };

  const GoldenResult golden = golden_section_minimize(gap_at, lo, hi, options.tol_gamma);

  // The bracket only ever shrinks towards the interior minimum of a
  // unimodal gap. If it stayed glued to one of the original ends, the
  // minimum is at or beyond the edge, or the curve has a second dip.
  if (golden.lo > lo && golden.hi < hi) return out;
  out.non_unimodal = true;

  // Typical second basin: below the crossing, lambda_1 - lambda_0 is the
  // slowly varying spacing of the two lowest glass levels, whose slope has
  // either sign; when it rises towards the crossing the search is pulled to
  // the low edge. Find the avoided crossing directly: <V> in the lowest
  // state is non-decreasing in Gamma (lambda_0 is concave) and jumps from
  // O(1) in the glass to about n in the paramagnet. Bisect on the midpoint
  // of that jump, then run the golden search in a window a few dip widths
  // wide.
  auto hopping_range = [&] {
    return std::minmax_element(hoppings.begin(), hoppings.end(),
                               [](const auto& x, const auto& y) { return x.second < y.second; });
  };
  // Golden section never evaluates the ends themselves; the edge it stuck
  // to may hold the minimum.
  const bool stuck_low = !(golden.lo > lo);
  if (stuck_low) gap_at(lo);
  if (!(golden.hi < hi)) gap_at(hi);
  auto [low_it, high_it] = hopping_range();
  if (high_it->second - low_it->second <= 0.25 * instance.n()) {
    gap_at(stuck_low ? hi : lo);
    std::tie(low_it, high_it) = hopping_range();
  }
  const double hopping_jump = high_it->second - low_it->second;
  const double target = 0.5 * (low_it->second + high_it->second);
  if (hopping_jump > 0.25 * instance.n()) {
    // Tightest recorded pair straddling the target.
    double a = lo;
    double b = hi;
    for (const auto& [g, v] : hoppings) {
      if (v <= target) a = std::max(a, g);
    }
    for (const auto& [g, v] : hoppings) {
      if (v > target && g > a) b = std::min(b, g);
    }
    // Only the side of the jump matters here, not the gap: the lowest level
    // at a looser tolerance is enough.
    const double width = std::max(delta_estimate / instance.n(), options.tol_gamma);
    while (b - a > width) {
      const double mid = 0.5 * (a + b);
      solve_at(mid, 1, std::min(options.tol_eig, std::max(delta_estimate / 10.0, 1e-12)));
      (hoppings.back().second <= target ? a : b) = mid;
    }
    // When the two lowest glass levels are closer than the would-be dip,
    // the gap has no minimum at the crossing and the window search ends on
    // its edge; the best value seen so far is then the answer.
    const double centre = 0.5 * (a + b);
    const double half = 4.0 * width;
    golden_section_minimize(gap_at, std::max(lo, centre - half), std::min(hi, centre + half), options.tol_gamma);
    return out;
  }

  // No ground-state transition inside the bracket: scan a uniform grid over
  // the whole bracket, then polish the best point within its neighbouring
  // cells.
  const int points = std::max(options.grid_points, 3);
  const double step = (hi - lo) / (points - 1);
  previous.clear();
  for (int i = 0; i < points; ++i) gap_at(lo + step * i);
  const double a = std::max(lo, out.gamma_star - step);
  const double b = std::min(hi, out.gamma_star + step);
  if (b - a > options.tol_gamma) golden_section_minimize(gap_at, a, b, options.tol_gamma);
  return out;
}

struct GapRecord {
  int n = 0;
  std::uint64_t sample = 0;
  std::uint64_t seed = 0;
  double e0 = 0.0;
  double gamma_star = 0.0;
  double delta_min = 0.0;
  bool ok = false;
  bool non_unimodal = false;
  std::string error;
};

struct SizeStats {
  int n = 0;
  std::size_t count = 0;     // successful samples
  std::size_t excluded = 0;  // failed samples
  Summary delta_min;
  Summary gamma_star;
};

struct ScalingResult {
  std::vector<int> ns;
  std::vector<SizeStats> stats;
  std::vector<GapRecord> records;  // ordered by (n, sample)
  LinearFit fit;                   // log2(median delta_min) against n
  std::size_t excluded = 0;
};

struct EnsembleOptions {
  GapSearchOptions search;
  int threads = 1;
};

inline GapRecord gap_record(int n, std::uint64_t sample, std::uint64_t master_seed, const GapSearchOptions& search) {
  GapRecord rec;
  rec.n = n;
  rec.sample = sample;
  rec.seed = derive_sample_seed(master_seed, n, sample);
  try {
    const RemInstance inst = sample_instance(n, rec.seed);
    rec.e0 = inst.ground_energy();
    const GapResult g = minimal_gap(inst, search);
    rec.gamma_star = g.gamma_star;
    rec.delta_min = g.delta_min;
    rec.non_unimodal = g.non_unimodal;
    rec.ok = g.converged && g.delta_min > 0.0;
    if (!g.converged) rec.error = "eigensolver did not converge";
    if (!(g.delta_min > 0.0)) rec.error = "non-positive gap";
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

inline ScalingResult gap_scaling_ensemble(const std::vector<int>& ns, std::size_t samples, std::uint64_t master_seed,
                                          const EnsembleOptions& options = {}) {
  if (ns.empty()) throw DomainError("no sizes requested");
  if (samples < 10) throw DomainError("ensemble needs at least 10 samples per size");
  for (int n : ns) RemInstance::check_spins(n);

  ScalingResult out;
  out.ns = ns;
  out.records.resize(ns.size() * samples);
  // Largest sizes first so that the long jobs do not straggle.
  std::vector<std::size_t> order(out.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ns[a / samples] > ns[b / samples]; });
  parallel_for(order.size(), options.threads, [&](std::size_t job) {
    const std::size_t slot = order[job];
    out.records[slot] = gap_record(ns[slot / samples], slot % samples, master_seed, options.search);
  });

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t s = 0; s < ns.size(); ++s) {
    SizeStats st;
    st.n = ns[s];
    std::vector<double> deltas;
    std::vector<double> gammas;
    for (std::size_t i = 0; i < samples; ++i) {
      const GapRecord& rec = out.records[s * samples + i];
      if (rec.ok) {
        deltas.push_back(rec.delta_min);
        gammas.push_back(rec.gamma_star);
      } else {
        ++st.excluded;
      }
    }
    st.count = deltas.size();
    out.excluded += st.excluded;
    if (!deltas.empty()) {
      st.delta_min = summarize(deltas);
      st.gamma_star = summarize(gammas);
      xs.push_back(ns[s]);
      ys.push_back(std::log2(st.delta_min.median));
    }
    out.stats.push_back(st);
  }
  out.fit = fit_line(xs, ys);
  return out;
}

}  // namespace qrem
