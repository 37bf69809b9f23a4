// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Arguments select a subset of criteria (e.g. `acceptance 4 5`);
// criteria 2, 3 and 7 reuse the ensemble of criterion 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrem/annealer.hpp"
#include "qrem/experiment.hpp"
#include "qrem/gap_analysis.hpp"
#include "qrem/hamiltonian.hpp"
#include "qrem/instanton.hpp"
#include "qrem/parallel.hpp"
#include "qrem/perturbation.hpp"
#include "qrem/rem.hpp"
#include "qrem/stats.hpp"

namespace fs = std::filesystem;
using namespace qrem;

namespace {

constexpr std::uint64_t kMasterSeed = 1;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1, 2, 3, 7: the minimal-gap ensemble.

const std::vector<int> kSizes{10, 12, 14, 16, 18, 20};
constexpr std::size_t kSamples = 50;

const ScalingResult& ensemble() {
  static const ScalingResult result = [] {
    const auto t0 = std::chrono::steady_clock::now();
    EnsembleOptions opts;
    opts.threads = default_threads();
    ScalingResult r = gap_scaling_ensemble(kSizes, kSamples, kMasterSeed, opts);
    std::cerr << "  ensemble: " << r.records.size() << " instances in " << fmt(seconds_since(t0), 4) << " s\n";
    return r;
  }();
  return result;
}

Verdict gap_scaling() {
  const ScalingResult& r = ensemble();
  Verdict v;
  v.pass = r.excluded == 0 && r.fit.slope >= -0.6 && r.fit.slope <= -0.4;
  v.detail = "slope " + fmt(r.fit.slope) + " (95% CI [" + fmt(r.fit.slope_ci_low) + ", " + fmt(r.fit.slope_ci_high) +
             "]), excluded " + std::to_string(r.excluded);
  for (int n : kSizes) {
    if (n < 14) continue;
    std::size_t within = 0;
    std::size_t total = 0;
    for (const GapRecord& rec : r.records) {
      if (rec.n != n || !rec.ok) continue;
      ++total;
      const double predicted = minimal_gap_prediction(rec.e0, n).delta_min;
      const double ratio = rec.delta_min / predicted;
      within += ratio >= 0.5 && ratio <= 2.0;
    }
    const double frac = total == 0 ? 0.0 : static_cast<double>(within) / static_cast<double>(total);
    v.pass = v.pass && frac >= 0.75;
    v.detail += "; n=" + std::to_string(n) + " within x2: " + std::to_string(within) + "/" + std::to_string(total);
  }
  return v;
}

Verdict crossing_location() {
  const ScalingResult& r = ensemble();
  double dev = 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (const GapRecord& rec : r.records) {
    if (rec.n < 16 || !rec.ok) continue;
    dev += std::abs(rec.gamma_star - std::abs(rec.e0) / rec.n);
    sum += rec.gamma_star;
    ++count;
  }
  Verdict v;
  if (count == 0) return {false, "no instances"};
  const double mean_dev = dev / static_cast<double>(count);
  const double mean_gamma = sum / static_cast<double>(count);
  v.pass = mean_dev <= 0.05 && std::abs(mean_gamma - kSqrtLn2) <= 0.1;
  v.detail = "mean |Gamma* - |E0|/n| = " + fmt(mean_dev) + ", mean Gamma* = " + fmt(mean_gamma) + " vs sqrt(ln 2) " +
             fmt(kSqrtLn2) + " over " + std::to_string(count) + " instances (n=16..20)";
  return v;
}

Verdict perturbative_branches() {
  const ScalingResult& r = ensemble();
  constexpr std::size_t kPerSize = 5;
  const std::vector<double> below{0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<double> above{1.5, 2.0, 2.5, 3.0};
  double worst_rem = 0.0;
  double worst_qp = 0.0;
  bool converged = true;
  for (int n : {16, 18, 20}) {
    std::size_t used = 0;
    for (const GapRecord& rec : r.records) {
      if (rec.n != n || !rec.ok || used == kPerSize) continue;
      ++used;
      const RemInstance inst = sample_instance(n, rec.seed);
      auto lowest = [&](double gamma) {
        LanczosOptions o;
        o.k = 1;
        o.tol = 1e-8;
        const EigenResult e = solve_levels(inst, gamma, o);
        converged = converged && e.all_converged();
        return e.eigenvalues[0];
      };
      for (double f : below) {
        const double g = f * rec.gamma_star;
        worst_rem = std::max(worst_rem, std::abs(lowest(g) - rem_branch(rec.e0, n, g)));
      }
      for (double f : above) {
        const double g = f * rec.gamma_star;
        worst_qp = std::max(worst_qp, std::abs(lowest(g) - qp_branch(n, g, 0)));
      }
    }
  }
  return {converged && worst_rem <= 0.2 && worst_qp <= 0.2,
          "max |lambda0 - rem_branch| = " + fmt(worst_rem) + " (Gamma <= 0.5 Gamma*), max |lambda0 - qp_branch| = " +
              fmt(worst_qp) + " (Gamma >= 1.5 Gamma*), 5 instances at each of n=16,18,20"};
}

// ---------------------------------------------------------------------------
// 4: matrix-free Krylov against dense diagonalization.

Verdict oracle_equivalence() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> field(0.05, 2.0);
  double worst = 0.0;
  bool converged = true;
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + i % 9;
    const double gamma = field(gen);
    const RemInstance inst = sample_instance(n, derive_sample_seed(kMasterSeed, n, 1000 + i));
    const FieldedHamiltonian h(inst, gamma);
    LanczosOptions o;
    o.k = 4;
    const EigenResult r = lowest_eigenpairs(h, o);
    converged = converged && r.all_converged();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense_matrix(), Eigen::EigenvaluesOnly);
    for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(r.eigenvalues[j] - es.eigenvalues()(j)));
  }
  return {converged && worst <= 1e-8, "max |Krylov - dense| = " + fmt(worst, 3) + " over 100 instances, n=2..10, k=4"};
}

// ---------------------------------------------------------------------------
// 5: phase boundary.

Verdict phase_boundary_check() {
  const double g0 = phase_boundary(0.0).gamma_c;
  bool monotone = true;
  double prev = g0;
  for (int i = 1; i <= 150; ++i) {
    const double g = phase_boundary(0.01 * i).gamma_c;
    monotone = monotone && g <= prev;
    prev = g;
  }
  const double err = std::abs(g0 - kSqrtLn2);
  return {err <= 1e-10 && monotone, "|Gamma_c(0) - sqrt(ln 2)| = " + fmt(err, 3) +
                                        ", non-increasing on T = 0, 0.01, ..., 1.5: " + (monotone ? "yes" : "no") +
                                        ", Gamma_c(1.5) = " + fmt(prev)};
}

// ---------------------------------------------------------------------------
// 6: annealing time against the minimal gap.

double worst_trajectory_drift = 0.0;

Verdict annealing() {
  constexpr std::size_t kInstances = 10;
  const Schedule base{2.0, 0.0, 1.0};
  std::vector<double> ratios;
  std::vector<double> tau_half;
  std::vector<double> inverse_gap_sq;
  double worst_adiabatic = 1.0;
  std::size_t adiabatic_runs = 0;
  double quench = 0.0;
  std::string detail;
  bool ok = true;

  for (int n : {6, 8, 10}) {
    std::vector<RemInstance> insts;
    std::vector<double> deltas;
    for (std::size_t i = 0; i < kInstances; ++i) {
      insts.push_back(sample_instance(n, derive_sample_seed(kMasterSeed + 1, n, i)));
      const GapResult g = minimal_gap(insts.back());
      ok = ok && g.converged;
      deltas.push_back(g.delta_min);
    }
    std::vector<double> inv(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) inv[i] = 1.0 / (deltas[i] * deltas[i]);
    const double unit = median(inv);

    // Common grid from 0.1 to 100 times the median 1/Delta^2, three points
    // per decade. Runs with tau >= 100/Delta_i^2 are the adiabatic ones.
    std::vector<double> taus;
    for (int j = -3; j <= 6; ++j) taus.push_back(unit * std::pow(10.0, j / 3.0));
    std::vector<std::vector<AnnealResult>> runs(insts.size());
    parallel_for(insts.size(), default_threads(), [&](std::size_t i) { runs[i] = success_vs_tau(insts[i], taus, base); });
    std::vector<std::vector<double>> fid(taus.size());
    for (std::size_t i = 0; i < insts.size(); ++i) {
      for (std::size_t t = 0; t < taus.size(); ++t) {
        const AnnealResult& r = runs[i][t];
        fid[t].push_back(r.fidelity);
        worst_trajectory_drift = std::max(worst_trajectory_drift, r.max_norm_drift);
        if (taus[t] >= 100.0 * inv[i]) {
          ++adiabatic_runs;
          worst_adiabatic = std::min(worst_adiabatic, r.fidelity);
        }
      }
    }
    double half = std::numeric_limits<double>::quiet_NaN();
    double prev_f = 0.0;
    for (std::size_t t = 0; t < taus.size(); ++t) {
      const double f = median(fid[t]);
      if (f > 0.5) {
        if (t == 0) {
          half = taus[0];
        } else {
          // Log-linear interpolation between the bracketing grid points.
          const double s = (0.5 - prev_f) / (f - prev_f);
          half = taus[t - 1] * std::pow(taus[t] / taus[t - 1], s);
        }
        break;
      }
      prev_f = f;
    }
    tau_half.push_back(half);
    inverse_gap_sq.push_back(unit);
    ratios.push_back(half / unit);
    detail += "n=" + std::to_string(n) + ": tau_1/2 " + fmt(half, 4) + ", median 1/Delta^2 " + fmt(unit, 4) + "; ";

    // Sudden quench: same protocol with tau -> 0.
    if (n == 8) {
      std::vector<double> q;
      for (const RemInstance& inst : insts) {
        const Schedule s{base.gamma_start, base.gamma_end, 1e-6};
        const AnnealResult a = evolve(inst, s, rule_dt(inst, s));
        q.push_back(a.fidelity);
        worst_trajectory_drift = std::max(worst_trajectory_drift, a.max_norm_drift);
      }
      quench = median(q);
    }
  }

  bool scaling = std::all_of(ratios.begin(), ratios.end(), [](double r) { return std::isfinite(r); });
  if (scaling) {
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    scaling = *hi / *lo <= 10.0;
    detail += "tau_1/2 * Delta^2 spread x" + fmt(*hi / *lo, 3) + "; ";
  }
  for (std::size_t i = 1; i < tau_half.size(); ++i) {
    if (inverse_gap_sq[i] > inverse_gap_sq[i - 1]) scaling = scaling && tau_half[i] > tau_half[i - 1];
  }
  const double quench_ratio = quench / std::exp2(-8.0);
  detail += "quench n=8 median " + fmt(quench, 4) + " = " + fmt(quench_ratio, 3) + " x 2^-8; worst of " +
            std::to_string(adiabatic_runs) + " adiabatic runs " + fmt(worst_adiabatic, 4) + "; max norm drift " + fmt(worst_trajectory_drift, 3);
  const bool pass = ok && scaling && quench_ratio >= 1.0 / 3.0 && quench_ratio <= 3.0 && adiabatic_runs > 0 &&
                    worst_adiabatic >= 0.9 && worst_trajectory_drift <= 1e-8;
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 7: instanton consistency.

Verdict instanton_consistency() {
  bool exact = true;
  for (int n = 1; n <= kMaxSpins; ++n) {
    const double got = surface_cost_gap(n).gap_scale;
    if (n % 2 == 0) {
      exact = exact && got == std::ldexp(1.0, -n / 2);
    } else {
      // Odd n carry one factor 1/sqrt(2); allow its rounding.
      const double expected = std::ldexp(std::sqrt(2.0), -(n + 1) / 2);
      exact = exact && std::abs(got - expected) <= 2.3e-16 * expected;
    }
  }
  double worst_jump = 0.0;
  for (double theta : {0.0, 0.3, 1.0}) {
    for (int k = 0; k <= 8; k += 2) {
      const InstantonParams a{theta, 10.0, 1.0, 0.9, k, 1};
      InstantonParams b = a;
      b.k = k + 2;
      const double per_jump = 0.5 * (instanton_action(b) - instanton_action(a));
      worst_jump = std::max(worst_jump, std::abs(per_jump - std::log(1.0 / std::sqrt(2.0))));
    }
  }
  const LinearFit& fit = ensemble().fit;
  const double exponent = -kLn2 / 2.0;
  const double lo = fit.slope_ci_low * kLn2;
  const double hi = fit.slope_ci_high * kLn2;
  const bool inside = exponent >= lo && exponent <= hi;
  return {exact && worst_jump <= 1e-12 && inside,
          "gap_scale = 2^(-n/2) for n=1..26: " + std::string(exact ? "yes" : "no") + "; per-jump error " +
              fmt(worst_jump, 3) + "; -ln2/2 = " + fmt(exponent) + " vs fit CI [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

// ---------------------------------------------------------------------------
// 8: property suites.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict properties() {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal;
  double sym = 0.0;
  double lin = 0.0;
  for (int n : {3, 8, 12, 16}) {
    const RemInstance inst = sample_instance(n, derive_sample_seed(kMasterSeed, n, 7));
    const FieldedHamiltonian h(inst, 0.3 + 0.05 * n);
    std::vector<double> x(inst.dimension());
    std::vector<double> y(inst.dimension());
    for (double& v : x) v = normal(gen);
    for (double& v : y) v = normal(gen);
    const auto hx = h.apply(x);
    const auto hy = h.apply(y);
    double yhx = 0.0;
    double hyx = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      yhx += y[i] * hx[i];
      hyx += hy[i] * x[i];
      scale += std::abs(y[i] * hx[i]);
    }
    sym = std::max(sym, std::abs(yhx - hyx) / scale);
    std::vector<double> combo(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) combo[i] = 1.3 * x[i] - 0.7 * y[i];
    const auto hc = h.apply(combo);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double rhs = 1.3 * hx[i] - 0.7 * hy[i];
      lin = std::max(lin, std::abs(hc[i] - rhs) / std::max(1.0, std::abs(rhs)));
    }
  }

  // Normalization after every step over a set of dedicated trajectories,
  // plus everything criterion 6 ran when it was selected.
  double drift = worst_trajectory_drift;
  for (int n : {4, 7, 10}) {
    const RemInstance inst = sample_instance(n, derive_sample_seed(kMasterSeed, n, 3));
    for (InitialState init : {InitialState::kGround, InitialState::kUniform}) {
      const Schedule s{2.5, 0.0, 40.0};
      EvolveOptions o;
      o.initial = init;
      drift = std::max(drift, evolve(inst, s, rule_dt(inst, s), o).max_norm_drift);
    }
  }

  // Determinism: the same config twice, with different thread counts.
  const fs::path root = fs::temp_directory_path() / "qrem_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> configs{
      R"({"command": "gap", "n": 8, "samples": 4, "master_seed": 11})",
      R"({"command": "anneal", "n": 6, "samples": 3, "taus": [1, 10, 100]})",
      R"({"command": "spectrum", "instance": {"n": 9, "sample": 2}, "gammas": {"start": 0.1, "stop": 1.5, "points": 15}})",
      R"({"command": "scaling", "ns": [6, 8], "samples": 10})",
      R"({"command": "phase-diagram"})",
      R"({"command": "instanton"})",
  };
  bool identical = true;
  std::size_t compared = 0;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    ExperimentConfig a = parse_config(configs[c], "config");
    ExperimentConfig b = a;
    a.out = root / (std::to_string(c) + "a");
    b.out = root / (std::to_string(c) + "b");
    a.threads = 1;
    b.threads = default_threads() + 1;
    run(a);
    run(b);
    for (const auto& entry : fs::directory_iterator(a.out)) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      identical = identical && slurp(entry.path()) == slurp(b.out / entry.path().filename());
    }
  }
  fs::remove_all(root);

  return {sym <= 1e-12 && lin <= 1e-12 && drift <= 1e-8 && identical && compared >= configs.size(),
          "symmetry " + fmt(sym, 3) + ", linearity " + fmt(lin, 3) + ", max step norm drift " + fmt(drift, 3) + ", " +
              std::to_string(compared) + " CSV files byte-identical: " + (identical ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gap scaling", gap_scaling},
      {"crossing location", crossing_location},
      {"perturbative branches", perturbative_branches},
      {"oracle equivalence", oracle_equivalence},
      {"phase boundary", phase_boundary_check},
      {"annealing scaling", annealing},
      {"instanton consistency", instanton_consistency},
      {"property suites", properties},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << v.detail
              << " [" << fmt(seconds_since(t0), 4) << " s]" << std::endl;
  }
  return all ? EXIT_SUCCESS : EXIT_FAILURE;
}
