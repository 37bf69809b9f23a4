#pragma once

// Real-time Schrodinger evolution under a decreasing transverse field.
//
// The field is held constant over each step at its midpoint value and the
// step propagator exp(-i H dt) is applied by its Taylor series, summed until
// the next term is below round-off. With dt ||H|| <= 0.1 that takes about a
// dozen products and leaves the norm unchanged to machine precision, so the
// reported norm drift is a genuine diagnostic.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrem/eigensolver.hpp"
#include "qrem/errors.hpp"
#include "qrem/hamiltonian.hpp"
#include "qrem/perturbation.hpp"
#include "qrem/rem.hpp"

namespace qrem {

enum class ScheduleShape { kLinear };

struct Schedule {
  double gamma_start = 1.0;
  double gamma_end = 0.0;
  double tau = 1.0;
  ScheduleShape shape = ScheduleShape::kLinear;

  void validate() const {
    if (!(gamma_start > 0.0 && std::isfinite(gamma_start))) throw DomainError("gamma_start must be > 0");
    if (!(gamma_end >= 0.0 && std::isfinite(gamma_end))) throw DomainError("gamma_end must be >= 0");
    if (gamma_end > gamma_start) throw DomainError("a linear schedule must not raise the field");
    if (!(tau > 0.0 && std::isfinite(tau))) throw DomainError("annealing time tau must be > 0");
  }

  double gamma_at(double t) const {
    const double s = std::clamp(t / tau, 0.0, 1.0);
    return gamma_start + (gamma_end - gamma_start) * s;
  }
};

enum class InitialState { kGround, kUniform };

struct Checkpoint {
  double t = 0.0;
  double gamma = 0.0;
  double fidelity = 0.0;
};

struct AnnealResult {
  Schedule schedule;
  double dt = 0.0;  // step actually used (tau / steps)
  std::uint64_t steps = 0;
  double fidelity = 0.0;        // |<classical ground|psi(tau)>|^2
  double norm_drift = 0.0;      // | ||psi(tau)|| - 1 |
  double max_norm_drift = 0.0;  // worst over all steps
  double initial_fidelity = 0.0;
  InitialState initial = InitialState::kGround;
  std::vector<Checkpoint> checkpoints;
  std::vector<std::string> warnings;
};

inline constexpr double kDefaultDtRule = 0.1;
inline constexpr double kMaxStepNorm = 0.1;    // dt * ||H|| bound
inline constexpr double kMaxNormDrift = 1e-6;  // beyond this a run is rejected

struct EvolveOptions {
  InitialState initial = InitialState::kGround;
  std::optional<QuantumState> initial_state;  // overrides `initial`
  std::uint64_t checkpoint_every = 0;         // 0: no checkpoints
  int threads = 1;
};

inline double schedule_norm_bound(const RemInstance& instance, const Schedule& schedule) {
  return instance.max_abs_energy() + instance.n() * std::max(schedule.gamma_start, schedule.gamma_end);
}

inline double rule_dt(const RemInstance& instance, const Schedule& schedule, double dt_rule = kDefaultDtRule) {
  return dt_rule / schedule_norm_bound(instance, schedule);
}

// psi <- exp(-i H dt) psi. Throws if the series does not settle.
inline void propagate_step(const FieldedHamiltonian& h, double dt, std::vector<Complex>& psi,
                           std::vector<Complex>& term, std::vector<Complex>& scratch, int threads = 1) {
  const std::size_t dim = psi.size();
  term = psi;
  double ref = 0.0;
  for (const Complex& z : psi) ref += std::norm(z);
  const double cutoff = 1e-34 * ref;  // squared norm of the last retained term
  for (int order = 1;; ++order) {
    if (order > 60) throw StepSizeError("propagator series did not converge; reduce dt");
    h.apply<Complex>(std::span<const Complex>(term), std::span<Complex>(scratch), threads);
    const Complex factor(0.0, -dt / order);
    double term_norm = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      term[a] = factor * scratch[a];
      psi[a] += term[a];
      term_norm += std::norm(term[a]);
    }
    if (term_norm <= cutoff) break;
  }
}

inline double state_norm(std::span<const Complex> psi) {
  double s = 0.0;
  for (const Complex& z : psi) s += std::norm(z);
  return std::sqrt(s);
}

// <psi|H|psi> for a normalized state.
inline double energy_expectation(const FieldedHamiltonian& h, std::span<const Complex> psi) {
  std::vector<Complex> hpsi(psi.size());
  h.apply<Complex>(psi, std::span<Complex>(hpsi));
  Complex s{};
  for (std::size_t a = 0; a < psi.size(); ++a) s += std::conj(psi[a]) * hpsi[a];
  return s.real();
}

// Ground state of H(gamma) as a complex state; falls back to the uniform
// superposition (with a warning) if the eigensolver does not converge.
inline QuantumState prepare_initial_state(const RemInstance& instance, double gamma, InitialState kind,
                                          std::vector<std::string>* warnings = nullptr) {
  if (kind == InitialState::kUniform) return qp_ground_state(instance.n());
  const FieldedHamiltonian h(instance, gamma);
  LanczosOptions opts;
  opts.k = 1;
  opts.tol = 1e-10;
  const EigenResult r = lowest_eigenpairs(h, opts);
  if (!r.all_converged()) {
    if (warnings) warnings->push_back("ground state did not converge at gamma_start; using uniform superposition");
    return qp_ground_state(instance.n());
  }
  std::vector<double> v = r.eigenvectors[0];
  // Fix the global sign so that the state overlaps positively with the uniform one.
  double sum = 0.0;
  for (double x : v) sum += x;
  if (sum < 0.0) {
    for (double& x : v) x = -x;
  }
  QuantumState s = QuantumState::from_real(instance.n(), v);
  s.normalize();
  return s;
}

inline AnnealResult evolve(const RemInstance& instance, const Schedule& schedule, double dt,
                           const EvolveOptions& options = {}) {
  schedule.validate();
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const double bound = schedule_norm_bound(instance, schedule);
  if (dt * bound > kMaxStepNorm * (1.0 + 1e-9)) {
    throw DomainError("time step " + std::to_string(dt) + " violates dt*||H|| <= " + std::to_string(kMaxStepNorm) +
                      " (||H|| <= " + std::to_string(bound) + ")");
  }

  AnnealResult out;
  out.schedule = schedule;
  const double ratio = schedule.tau / dt;
  out.steps = static_cast<std::uint64_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
  out.dt = schedule.tau / static_cast<double>(out.steps);

  QuantumState start;
  if (options.initial_state) {
    if (options.initial_state->n != instance.n()) throw DimensionError("initial state has wrong spin count");
    start = *options.initial_state;
    out.initial = options.initial;
  } else {
    out.initial = options.initial;
    if (options.initial == InitialState::kUniform && instance.ground_energy() < 0.0) {
      const double predicted = minimal_gap_prediction(instance.ground_energy(), instance.n()).gamma_star;
      if (schedule.gamma_start < 3.0 * predicted) {
        out.warnings.push_back("uniform start below 3x the predicted crossing field");
      }
    }
    start = prepare_initial_state(instance, schedule.gamma_start, options.initial, &out.warnings);
  }

  const std::size_t target = instance.ground_index();
  std::vector<Complex> psi = std::move(start.amplitudes);
  std::vector<Complex> term(psi.size());
  std::vector<Complex> scratch(psi.size());
  out.initial_fidelity = std::norm(psi[target]);

  for (std::uint64_t step = 0; step < out.steps; ++step) {
    const double t_mid = (static_cast<double>(step) + 0.5) * out.dt;
    const FieldedHamiltonian h(instance, schedule.gamma_at(t_mid));
    propagate_step(h, out.dt, psi, term, scratch, options.threads);
    const double drift = std::abs(state_norm(psi) - 1.0);
    out.max_norm_drift = std::max(out.max_norm_drift, drift);
    if (drift > kMaxNormDrift) {
      throw StepSizeError("norm drift " + std::to_string(drift) + " exceeds " + std::to_string(kMaxNormDrift) +
                          "; use a smaller dt");
    }
    if (options.checkpoint_every > 0 && ((step + 1) % options.checkpoint_every == 0 || step + 1 == out.steps)) {
      const double t = static_cast<double>(step + 1) * out.dt;
      out.checkpoints.push_back({t, schedule.gamma_at(t), std::norm(psi[target])});
    }
  }
  out.norm_drift = std::abs(state_norm(psi) - 1.0);
  out.fidelity = std::norm(psi[target]);
  return out;
}

// One anneal per tau, sharing the initial state and the dt rule.
inline std::vector<AnnealResult> success_vs_tau(const RemInstance& instance, const std::vector<double>& taus,
                                                const Schedule& schedule_template,
                                                double dt_rule = kDefaultDtRule, const EvolveOptions& options = {}) {
  for (std::size_t i = 1; i < taus.size(); ++i) {
    if (!(taus[i] >= taus[i - 1])) throw DomainError("annealing times must be ascending");
  }
  if (!(dt_rule > 0.0 && dt_rule <= kMaxStepNorm)) throw DomainError("dt rule must lie in (0, 0.1]");
  schedule_template.validate();
  EvolveOptions shared = options;
  std::vector<std::string> warnings;
  if (!shared.initial_state && options.initial == InitialState::kUniform && instance.ground_energy() < 0.0 &&
      schedule_template.gamma_start < 3.0 * minimal_gap_prediction(instance.ground_energy(), instance.n()).gamma_star) {
    warnings.push_back("uniform start below 3x the predicted crossing field");
  }
  if (!shared.initial_state) {
    shared.initial_state = prepare_initial_state(instance, schedule_template.gamma_start, options.initial, &warnings);
  }
  const double dt = rule_dt(instance, schedule_template, dt_rule);
  std::vector<AnnealResult> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    Schedule s = schedule_template;
    s.tau = tau;
    AnnealResult r = evolve(instance, s, dt, shared);
    r.warnings.insert(r.warnings.end(), warnings.begin(), warnings.end());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace qrem
