#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "qrem/gap_analysis.hpp"

namespace qrem {
namespace {

Eigen::VectorXd dense_levels(const RemInstance& inst, double gamma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_matrix(FieldedHamiltonian(inst, gamma)),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// Brute-force oracle: dense gap on a uniform grid, refined on a second grid
// spanning the neighbouring cells of the best point.
std::pair<double, double> dense_grid_minimum(const RemInstance& inst, double lo, double hi, int points) {
  double best = std::numeric_limits<double>::infinity();
  double where = lo;
  auto scan = [&](double a, double b) {
    for (int i = 0; i < points; ++i) {
      const double g = a + (b - a) * i / (points - 1);
      const Eigen::VectorXd ev = dense_levels(inst, g);
      if (ev(1) - ev(0) < best) {
        best = ev(1) - ev(0);
        where = g;
      }
    }
  };
  scan(lo, hi);
  const double step = (hi - lo) / (points - 1);
  scan(std::max(lo, where - step), std::min(hi, where + step));
  return {where, best};
}

TEST(Spectrum, ZeroFieldGivesTheLowestDiagonalEntries) {
  const RemInstance inst = sample_instance(10, 31);
  const SpectrumCurve c = spectrum_vs_field(inst, {0.0}, 4);
  const auto low = inst.lowest_energies(4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c.levels[i][0], low[i]);
  EXPECT_TRUE(c.all_converged());
}

TEST(Spectrum, MatchesDenseOnAGrid) {
  const RemInstance inst = sample_instance(8, 32);
  std::vector<double> gammas;
  for (int i = 0; i <= 20; ++i) gammas.push_back(0.1 * i);
  for (bool warm : {true, false}) {
    SpectrumOptions o;
    o.warm_start = warm;
    const SpectrumCurve c = spectrum_vs_field(inst, gammas, 3, o);
    ASSERT_TRUE(c.all_converged());
    for (std::size_t p = 0; p < gammas.size(); ++p) {
      const Eigen::VectorXd ref = dense_levels(inst, gammas[p]);
      for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.levels[i][p], ref(i), 1e-8) << "gamma=" << gammas[p];
      for (int i = 0; i < 3; ++i) EXPECT_LE(c.residuals[i][p], 1e-10);
    }
  }
}

TEST(Spectrum, WarmStartSavesWork) {
  const RemInstance inst = sample_instance(12, 33);
  std::vector<double> gammas;
  for (int i = 1; i <= 30; ++i) gammas.push_back(0.03 * i);
  SpectrumOptions warm;
  SpectrumOptions cold;
  cold.warm_start = false;
  const SpectrumCurve a = spectrum_vs_field(inst, gammas, 2, warm);
  const SpectrumCurve b = spectrum_vs_field(inst, gammas, 2, cold);
  EXPECT_LT(a.iterations, b.iterations);
  for (std::size_t p = 0; p < gammas.size(); ++p) EXPECT_NEAR(a.levels[0][p], b.levels[0][p], 1e-9);
}

TEST(Spectrum, RejectsBadGrids) {
  const RemInstance inst = sample_instance(4, 1);
  EXPECT_THROW(spectrum_vs_field(inst, {0.2, 0.1}, 2), DomainError);
  EXPECT_THROW(spectrum_vs_field(inst, {0.1, 0.1}, 2), DomainError);
  EXPECT_THROW(spectrum_vs_field(inst, {-0.1}, 2), DomainError);
  EXPECT_THROW(spectrum_vs_field(inst, {0.1}, 1), DomainError);
  EXPECT_THROW(spectrum_vs_field(inst, {0.1}, 17), DomainError);
}

TEST(MinimalGap, CraftedTwoSpinInstance) {
  const RemInstance inst = RemInstance::from_energies({-2.0, 0.1, 0.2, 0.3});
  const GapResult r = minimal_gap(inst);
  const auto [lo, hi] = default_gap_bracket(inst);
  EXPECT_DOUBLE_EQ(lo, 0.6);
  EXPECT_DOUBLE_EQ(hi, 1.4);
  const auto [where, best] = dense_grid_minimum(inst, lo, hi, 401);
  EXPECT_NEAR(r.delta_min, best, 1e-6);
  EXPECT_NEAR(r.gamma_star, where, 2e-4);
  EXPECT_TRUE(r.converged);
}

TEST(MinimalGap, MatchesDenseGridOracle) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const RemInstance inst = sample_instance(8, 40 + seed);
    const GapResult r = minimal_gap(inst);
    const auto [lo, hi] = default_gap_bracket(inst);
    const auto [where, best] = dense_grid_minimum(inst, lo, hi, 201);
    // The grid can only overestimate the minimum.
    EXPECT_LE(r.delta_min, best + 1e-7) << "seed=" << seed;
    EXPECT_GE(r.delta_min, best - 1e-3 * best) << "seed=" << seed;
    EXPECT_GE(r.gamma_star, lo);
    EXPECT_LE(r.gamma_star, hi);
  }
}

TEST(MinimalGap, NeverAboveTheSpectrumGrid) {
  std::size_t flagged = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const RemInstance inst = sample_instance(10, 900 + seed);
    const GapResult r = minimal_gap(inst);
    flagged += r.non_unimodal;
    const auto [lo, hi] = default_gap_bracket(inst);
    std::vector<double> grid;
    for (int i = 0; i < 60; ++i) grid.push_back(lo + (hi - lo) * i / 59.0);
    SpectrumOptions o;
    o.tol = 1e-9;
    const SpectrumCurve c = spectrum_vs_field(inst, grid, 2, o);
    double grid_min = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < grid.size(); ++p) grid_min = std::min(grid_min, c.levels[1][p] - c.levels[0][p]);
    EXPECT_LE(r.delta_min, grid_min + 1e-6) << "seed=" << seed;
    EXPECT_TRUE(r.converged);
  }
  // The fallback is exercised by this ensemble.
  EXPECT_GT(flagged, 0u);
}

TEST(MinimalGap, TwoLevelPredictionIsTheRightScale) {
  const RemInstance inst = sample_instance(14, 5);
  const GapResult r = minimal_gap(inst);
  const GapPrediction p = minimal_gap_prediction(inst.ground_energy(), 14);
  EXPECT_GT(r.delta_min, 0.25 * p.delta_min);
  EXPECT_LT(r.delta_min, 4.0 * p.delta_min);
}

TEST(MinimalGap, Deterministic) {
  const RemInstance inst = sample_instance(11, 17);
  const GapResult a = minimal_gap(inst);
  const GapResult b = minimal_gap(inst);
  EXPECT_EQ(a.delta_min, b.delta_min);
  EXPECT_EQ(a.gamma_star, b.gamma_star);
  EXPECT_EQ(a.search_evals, b.search_evals);
  EXPECT_EQ(a.matvecs, b.matvecs);
  EXPECT_EQ(a.non_unimodal, b.non_unimodal);
}

TEST(MinimalGap, RejectsBadInput) {
  const RemInstance positive = RemInstance::from_energies({0.5, 1.0});
  EXPECT_THROW(minimal_gap(positive), DomainError);
  const RemInstance inst = sample_instance(6, 1);
  GapSearchOptions o;
  o.bracket = std::pair{0.9, 0.3};
  EXPECT_THROW(minimal_gap(inst, o), DomainError);
  o.bracket = std::pair{0.0, 0.3};
  EXPECT_THROW(minimal_gap(inst, o), DomainError);
  o.bracket.reset();
  o.tol_gamma = 0.0;
  EXPECT_THROW(minimal_gap(inst, o), DomainError);
  o.tol_gamma = 1e-4;
  o.tol_eig = -1.0;
  EXPECT_THROW(minimal_gap(inst, o), DomainError);
}

TEST(Statistics, QuantilesAndMeans) {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(median(v), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(mean(v), 2.5);
  EXPECT_NEAR(geometric_mean(v), std::pow(24.0, 0.25), 1e-15);
  EXPECT_TRUE(std::isnan(median(std::vector<double>{})));
}

TEST(Statistics, LineFitRecoversExactLine) {
  const std::vector<double> x{10, 12, 14, 16, 18, 20};
  std::vector<double> y;
  for (double v : x) y.push_back(1.0 - 0.5 * v);
  const LinearFit f = fit_line(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.slope_ci_low, -0.5, 1e-12);
  EXPECT_NEAR(f.slope_ci_high, -0.5, 1e-12);
}

// Oracle: textbook OLS with t(0.975, 4) = 2.7764451051977987.
TEST(Statistics, LineFitIntervalMatchesTextbookFormula) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const std::vector<double> y{1.1, 1.9, 3.2, 3.8, 5.3, 5.9};
  const LinearFit f = fit_line(x, y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (int i = 0; i < 6; ++i) {
    sxx += (x[i] - 3.5) * (x[i] - 3.5);
    sxy += (x[i] - 3.5) * (y[i] - 3.5333333333333333);
  }
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double r = y[i] - (3.5333333333333333 + slope * (x[i] - 3.5));
    sse += r * r;
  }
  const double se = std::sqrt(sse / 4.0 / sxx);
  EXPECT_NEAR(f.slope, slope, 1e-12);
  EXPECT_NEAR(f.slope_stderr, se, 1e-12);
  EXPECT_NEAR(f.slope_ci_high - f.slope, 2.7764451051977987 * se, 1e-10);
  EXPECT_NEAR(f.slope - f.slope_ci_low, 2.7764451051977987 * se, 1e-10);
}

TEST(Statistics, DegenerateFits) {
  EXPECT_FALSE(fit_line(std::vector<double>{1.0}, std::vector<double>{2.0}).has_slope());
  const LinearFit two = fit_line(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0, 3.0});
  EXPECT_TRUE(two.has_slope());
  EXPECT_FALSE(two.has_interval());
  EXPECT_THROW(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), DimensionError);
}

TEST(Ensemble, OrderedRecordsAndThreadIndependence) {
  const std::vector<int> ns{6, 8};
  EnsembleOptions one;
  EnsembleOptions two;
  two.threads = 2;
  const ScalingResult a = gap_scaling_ensemble(ns, 10, 7, one);
  const ScalingResult b = gap_scaling_ensemble(ns, 10, 7, two);
  ASSERT_EQ(a.records.size(), 20u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].n, ns[i / 10]);
    EXPECT_EQ(a.records[i].sample, i % 10);
    EXPECT_EQ(a.records[i].seed, derive_sample_seed(7, ns[i / 10], i % 10));
    EXPECT_EQ(a.records[i].delta_min, b.records[i].delta_min);
    EXPECT_EQ(a.records[i].gamma_star, b.records[i].gamma_star);
  }
  EXPECT_EQ(a.fit.slope, b.fit.slope);
  ASSERT_EQ(a.stats.size(), 2u);
  EXPECT_EQ(a.stats[0].count + a.stats[0].excluded, 10u);
  std::vector<double> d;
  for (std::size_t i = 0; i < 10; ++i) {
    if (a.records[i].ok) d.push_back(a.records[i].delta_min);
  }
  EXPECT_DOUBLE_EQ(a.stats[0].delta_min.median, median(d));
  EXPECT_LT(a.fit.slope, 0.0);
}

TEST(Ensemble, RejectsBadRequests) {
  EXPECT_THROW(gap_scaling_ensemble({}, 10, 1), DomainError);
  EXPECT_THROW(gap_scaling_ensemble({6}, 9, 1), DomainError);
  EXPECT_THROW(gap_scaling_ensemble({0}, 10, 1), CapacityError);
}

TEST(Ensemble, RecordCapturesFailures) {
  GapSearchOptions o;
  o.tol_gamma = -1.0;
  const GapRecord rec = gap_record(6, 0, 1, o);
  EXPECT_FALSE(rec.ok);
  EXPECT_FALSE(rec.error.empty());
}

}  // namespace
}  // namespace qrem
