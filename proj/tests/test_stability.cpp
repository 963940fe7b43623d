#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "phail/stability.hpp"

using namespace phail;

namespace {

GrowthSetup<1> unit_cubes() { return GrowthSetup<1>{}; }

GrowthSetup<1> point_grains() {
  GrowthSetup<1> s;
  s.shape = ShapeLaw{ShapeKind::cube, Distribution::constant(0.0)};
  return s;
}

}  // namespace

TEST(StabilityHelpers, Schedules) {
  EXPECT_EQ(exponential_schedule(8, 64), (std::vector<double>{8, 16, 32, 64}));
  EXPECT_EQ(exponential_schedule(8, 50), (std::vector<double>{8, 16, 32, 50}));
  EXPECT_THROW(exponential_schedule(0, 10), ConfigError);
  EXPECT_EQ(integer_grid(10, 4), (std::vector<double>{3, 5, 8, 10}));
  EXPECT_EQ(integer_grid(3, 8), (std::vector<double>{1, 2, 3}));
}

TEST(StabilityHelpers, Model2RadiusLaw) {
  auto r1 = model2_radius_law<1>(ShapeLaw{ShapeKind::cube, Distribution::constant(1.0)});
  EXPECT_EQ(r1.kmin, 3);
  EXPECT_EQ(r1.max_radius(), 3);
  auto r2 = model2_radius_law<2>(ShapeLaw{ShapeKind::ball, Distribution::uniform(0.0, 1.0)});
  EXPECT_EQ(r2.kmin, 1);
  EXPECT_EQ(r2.max_radius(), 2);
  EXPECT_NEAR(r2.prob(1), 0.5, 1e-3);
  EXPECT_NEAR(r2.prob(2), 0.5, 1e-3);
}

TEST(KappaEstimate, ZeroIntensity) {
  for (auto m : {GrowthModel::continuous, GrowthModel::model5}) {
    auto e = kappa_estimate<1>(0.0, m, 50, 4, 1, unit_cubes());
    EXPECT_EQ(e.kappa_hat, 0.0);
    EXPECT_EQ(e.ci_lo, 0.0);
    EXPECT_EQ(e.ci_hi, 0.0);
  }
}

TEST(KappaEstimate, CiContainsMeanAndIsNonnegative) {
  auto e = kappa_estimate<1>(0.1, GrowthModel::continuous, 80, 8, 2, unit_cubes());
  EXPECT_GE(e.kappa_hat, 0.0);
  EXPECT_LE(e.ci_lo, e.kappa_hat);
  EXPECT_GE(e.ci_hi, e.kappa_hat);
  EXPECT_EQ(e.per_rep.size(), 8u);
  EXPECT_FALSE(e.lower_bound);
}

TEST(KappaEstimate, MonotoneUnderCoupledThinning) {
  KappaOptions opt;
  opt.couple_at = 0.2;
  std::vector<GrowthRateEstimate> es;
  for (double lam : {0.02, 0.05, 0.1, 0.2})
    es.push_back(kappa_estimate<1>(lam, GrowthModel::continuous, 60, 6, 3, unit_cubes(), opt));
  for (std::size_t k = 1; k < es.size(); ++k)
    for (std::size_t r = 0; r < 6; ++r) EXPECT_LE(es[k - 1].per_rep[r], es[k].per_rep[r]);
}

TEST(KappaEstimate, Model5DominatesContinuousPerSample) {
  for (int d = 0; d < 2; ++d) {
    double lam = d == 0 ? 0.05 : 0.15;
    auto c = kappa_estimate<1>(lam, GrowthModel::continuous, 60, 6, 4 + d, unit_cubes());
    auto m = kappa_estimate<1>(lam, GrowthModel::model5, 60, 6, 4 + d, unit_cubes());
    for (std::size_t r = 0; r < 6; ++r) EXPECT_LE(c.per_rep[r], m.per_rep[r]);
  }
  GrowthSetup<2> s2;
  s2.shape = ShapeLaw{ShapeKind::ball, Distribution::uniform(0.1, 0.6)};
  s2.sigma = Distribution::exponential(1.0);
  s2.window = 12;
  auto c = kappa_estimate<2>(0.1, GrowthModel::continuous, 30, 4, 9, s2);
  auto m = kappa_estimate<2>(0.1, GrowthModel::model5, 30, 4, 9, s2);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_LE(c.per_rep[r], m.per_rep[r]);
}

TEST(KappaEstimate, PointGrainsAgreeAcrossSeedBatches) {
  auto a = kappa_estimate<1>(0.05, GrowthModel::model5, 100, 20, 100, point_grains());
  auto b = kappa_estimate<1>(0.05, GrowthModel::model5, 100, 20, 200, point_grains());
  EXPECT_GT(a.kappa_hat, 0.0);
  double joint = 2.576 * std::sqrt(a.se * a.se + b.se * b.se);
  EXPECT_LE(std::abs(a.kappa_hat - b.kappa_hat), joint);
  // Points never meet the origin or each other in the continuum.
  auto c = kappa_estimate<1>(0.05, GrowthModel::continuous, 100, 4, 100, point_grains());
  EXPECT_EQ(c.kappa_hat, 0.0);
}

TEST(KappaEstimate, NarrowWindowFlagsLowerBound) {
  auto s = unit_cubes();
  s.window = 2.0;
  auto e = kappa_estimate<1>(0.3, GrowthModel::continuous, 60, 3, 5, s);
  EXPECT_TRUE(e.lower_bound);
  EXPECT_GT(e.truncated_reps, 0u);
}

TEST(ScalingCheck, IdentityRescaling) {
  auto r = scaling_check<1>(0.2, 0.2, 50, 5, 1, unit_cubes());
  EXPECT_TRUE(r.ok());
  EXPECT_GT(r.compared, 0u);
}

TEST(ScalingCheck, ExactTopsUnderRescaling) {
  std::vector<Point<1>> probes{{0.0}, {0.5}, {-3.25}};
  for (double ratio : {2.0, 0.5}) {
    auto r = scaling_check<1>(0.1 * ratio, 0.1, 40, 100, 11, unit_cubes(), probes);
    EXPECT_TRUE(r.ok()) << "ratio " << ratio << " witness rep " << r.witness_rep;
    EXPECT_GT(r.arrivals, 1000u);
  }
  GrowthSetup<2> s2;
  s2.shape = ShapeLaw{ShapeKind::ball, Distribution::uniform(0.2, 0.8)};
  s2.sigma = Distribution::exponential(1.0);
  s2.window = 6;
  auto r = scaling_check<2>(0.3, 0.1, 10, 20, 12, s2, {Point<2>{0.0, 0.0}});
  EXPECT_TRUE(r.ok());
}

TEST(ScalingCheck, KappaScalesLinearly) {
  double a = 0.1, lam = 0.2, T = 200;
  auto ka = kappa_estimate<1>(a, GrowthModel::continuous, T * lam / a, 12, 21, unit_cubes());
  auto kl = kappa_estimate<1>(lam, GrowthModel::continuous, T, 12, 22, unit_cubes());
  double lhs = kl.kappa_hat * a, rhs = ka.kappa_hat * lam;
  double joint = 2.576 * std::sqrt(std::pow(kl.se * a, 2) + std::pow(ka.se * lam, 2));
  EXPECT_LE(std::abs(lhs - rhs), joint);
}

TEST(ThresholdScan, ZeroIntensityIsStable) {
  ScanOptions opt;
  opt.reps = 3;
  opt.schedule = exponential_schedule(4, 32);
  auto v = threshold_scan<1>({0.0}, {Point<1>{0.0}, Point<1>{1.5}}, 1, unit_cubes(), opt);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].verdict, Verdict::stable);
  for (auto& row : v[0].W_mean)
    for (double w : row) EXPECT_EQ(w, 0.0);
}

TEST(ThresholdScan, RejectsUnsortedGrid) {
  EXPECT_THROW(threshold_scan<1>({0.2, 0.1}, {Point<1>{0.0}}, 1), UsageError);
}

TEST(ThresholdScan, VerdictsMonotoneAndLoynesHolds) {
  ScanOptions opt;
  opt.reps = 6;
  opt.schedule = exponential_schedule(8, 128);
  std::vector<double> grid{0.05, 0.1, 0.2, 0.3, 0.4};
  auto v = threshold_scan<1>(grid, {Point<1>{0.0}, Point<1>{0.5}}, 5, unit_cubes(), opt);
  int worst = -1;
  for (auto& x : v) {
    EXPECT_EQ(x.loynes_violations, 0u);
    int rank = x.verdict == Verdict::stable ? 0 : x.verdict == Verdict::inconclusive ? 1 : 2;
    // No stable-evidence after unstable-evidence.
    if (worst == 2) {
      EXPECT_NE(rank, 0) << x.lambda;
    }
    worst = std::max(worst, rank);
    // Coupled thinning: mean profiles nondecreasing in lambda.
    if (&x != &v.front()) {
      auto& prev = *(&x - 1);
      for (std::size_t k = 0; k < x.schedule.size(); ++k) EXPECT_LE(prev.W_mean[0][k], x.W_mean[0][k]);
    }
  }
  EXPECT_EQ(v.front().verdict, Verdict::stable);
  EXPECT_EQ(v.back().verdict, Verdict::unstable);
  for (auto& x : v) {
    if (x.verdict != Verdict::unstable) continue;
    for (std::size_t i = 0; i < x.H_mean.size(); ++i)
      for (std::size_t k = 0; k < x.schedule.size(); ++k)
        if (x.schedule[k] >= x.schedule.back() / 2) {
          EXPECT_GE(x.H_mean[i][k] / x.schedule[k], 1.0);
        }
  }
}

TEST(ThresholdScan, BoundNotRefutedInOneDimension) {
  auto s = unit_cubes();
  BoundOptions bo;
  bo.T = 300;
  bo.reps = 8;
  bo.touch_reps = 200;
  auto bound = stability_bound<1>(s, 31, bo);
  EXPECT_GT(bound.a, 0.0);
  EXPECT_LE(bound.lo, bound.value);
  EXPECT_LE(bound.value, bound.hi);
  ScanOptions opt;
  opt.reps = 6;
  opt.schedule = exponential_schedule(8, 128);
  opt.bound = bound;
  auto v = threshold_scan<1>({0.05, 0.1, 0.3, 0.45}, {Point<1>{0.0}}, 32, s, opt);
  for (auto& x : v) EXPECT_FALSE(x.refuted) << x.lambda << " " << verdict_name(x.verdict);
}

TEST(Percolation, SparseRainHasSingletons) {
  auto r = percolation_probe<1>(1e-4, {20, 40}, 50, 3, unit_cubes(), 10);
  for (auto& s : r.snapshots) EXPECT_LE(s.largest, 1u);
}

TEST(Percolation, MatchesPairwiseComponents) {
  auto s = unit_cubes();
  s.window = 20;
  double t = 30;
  auto rain = sample_rain(s.rain(0.3, t + 1), SeedSpec{7});
  auto dag = build_dag(rain);
  Schedule sch;
  fifo_schedule(dag, rain, sch);
  auto snap = percolation_snapshot(dag, rain, sch, t, 1.0);
  std::vector<std::size_t> present;
  for (std::size_t j = 0; j < rain.size(); ++j)
    if (rain[j].t <= t && sch.done[j] > t) present.push_back(j);
  UnionFind uf(present.size());
  for (std::size_t a = 0; a < present.size(); ++a)
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      const auto& p = rain[present[a]];
      const auto& q = rain[present[b]];
      if (std::abs(p.x[0] - q.x[0]) <= 2.0) uf.unite(a, b);
    }
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t k = 0; k < present.size(); ++k) ++sizes[uf.find(k)];
  std::size_t largest = 0;
  for (auto& [r, n] : sizes) largest = std::max(largest, n);
  EXPECT_GT(present.size(), 5u);
  EXPECT_EQ(snap.present, present.size());
  EXPECT_EQ(snap.components, sizes.size());
  EXPECT_EQ(snap.largest, largest);
}

TEST(Percolation, LargestComponentGrowsWithCoupledIntensity) {
  std::vector<double> snaps{30, 45, 60};
  auto lo = percolation_probe<1>(0.08, snaps, 40, 9, unit_cubes(), 20, 0.16);
  auto hi = percolation_probe<1>(0.16, snaps, 40, 9, unit_cubes(), 20, 0.16);
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    EXPECT_LE(lo.snapshots[k].present, hi.snapshots[k].present);
    EXPECT_LE(lo.snapshots[k].largest, hi.snapshots[k].largest);
  }
}

TEST(Percolation, RegionDoublingTableRuns) {
  std::ostringstream os;
  for (double w : {20.0, 40.0}) {
    auto r = percolation_probe<1>(0.12, {40, 60}, w, 4, unit_cubes(), 30);
    write_percolation_csv(os, r);
    EXPECT_EQ(r.snapshots.size(), 2u);
  }
  EXPECT_NE(os.str().find("largest_fraction"), std::string::npos);
}

TEST(StabilityCsv, SweepRowsPerReplication) {
  ScanOptions opt;
  opt.reps = 4;
  opt.schedule = exponential_schedule(4, 16);
  auto v = threshold_scan<1>({0.05, 0.1}, {Point<1>{0.0}}, 2, unit_cubes(), opt);
  std::ostringstream os;
  write_sweep_csv_header(os);
  for (auto& x : v) write_sweep_csv<1>(os, x, Point<1>{0.0});
  std::size_t lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 2 * 4);
}
