#include <gtest/gtest.h>

#include <sstream>

#include "oracles/grid_oracle.hpp"
#include "phail/grid.hpp"

using namespace phail;

namespace {

GridInput manual(std::size_t w, std::size_t N, Boundary b) {
  GridInput g;
  g.width = w;
  g.N = N;
  g.p = 0.5;
  g.boundary = b;
  g.v.assign(w * N, 0);
  g.e.assign(w * N, 0);
  return g;
}

}  // namespace

TEST(GridGrowth, ZeroProbabilityStaysFlat) {
  auto g = sample_grid(10, 8, 0.0, Boundary::torus, 1);
  for (auto& row : simulate_growth(g))
    for (double h : row) EXPECT_EQ(h, 0.0);
  for (auto& row : simulate_service(g))
    for (double h : row) EXPECT_EQ(h, 0.0);
  for (double h : h_sequence(g)) EXPECT_EQ(h, 0.0);
}

TEST(GridGrowth, SingleBlackNode) {
  auto g = manual(6, 3, Boundary::free);
  g.v[g.at(2, 1)] = 1;
  auto H = simulate_growth(g);
  EXPECT_EQ(H[0][2], 1.0);
  EXPECT_EQ(H[2][2], 1.0);
  EXPECT_EQ(H[0][1], 0.0);
  auto W = simulate_service(g);
  EXPECT_EQ(W[0][2], 1.0);
  EXPECT_EQ(W[1][2], 0.0);
}

TEST(GridGrowth, IsolatedColumnCountsRunLength) {
  auto g = manual(5, 6, Boundary::free);
  for (std::size_t n : {1, 2, 3, 5}) g.v[g.at(2, n)] = 1;
  auto O = max_height_path_oracle(g);
  std::vector<double> expect{1, 2, 3, 3, 4, 4};
  for (std::size_t n = 1; n <= 6; ++n) EXPECT_EQ(O[n - 1][2], expect[n - 1]);
  EXPECT_EQ(simulate_growth(g), O);
}

TEST(GridGrowth, AllWhiteOracleIsZero) {
  auto g = manual(5, 4, Boundary::torus);
  for (auto& row : max_height_path_oracle(g))
    for (double h : row) EXPECT_EQ(h, 0.0);
}

TEST(GridGrowth, SameRowChains) {
  // all black, orientations r r l: node 0 waits for 1, 1 waits for 2, 3 waits for 2
  auto g = manual(4, 1, Boundary::free);
  for (std::size_t i = 0; i < 4; ++i) g.v[g.at(i, 1)] = 1;
  g.e[g.at(0, 1)] = 1;
  g.e[g.at(1, 1)] = 1;
  g.e[g.at(2, 1)] = 0;
  auto H = simulate_growth(g);
  EXPECT_EQ(H[0], (std::vector<double>{3, 2, 1, 2}));
  EXPECT_EQ(max_height_path_oracle(g), H);
}

TEST(GridGrowth, NodeWaitingOnBothSides) {
  auto g = manual(3, 1, Boundary::free);
  for (std::size_t i = 0; i < 3; ++i) g.v[g.at(i, 1)] = 1;
  g.e[g.at(0, 1)] = 0;  // 1 waits for 0
  g.e[g.at(1, 1)] = 1;  // 1 waits for 2
  EXPECT_EQ(simulate_growth(g)[0], (std::vector<double>{1, 2, 1}));
}

TEST(GridGrowth, TorusCycleDropsSeam) {
  auto g = manual(5, 2, Boundary::torus);
  for (std::size_t i = 0; i < 5; ++i) {
    g.v[g.at(i, 1)] = 1;
    g.e[g.at(i, 1)] = 1;  // everyone waits for the right neighbor
  }
  auto dir = row_pairs(g, 1);
  EXPECT_EQ(dir[4], 0);
  auto H = simulate_growth(g);
  EXPECT_EQ(H[0], (std::vector<double>{5, 4, 3, 2, 1}));
  EXPECT_EQ(max_height_path_oracle(g), H);
}

TEST(GridGrowth, FullProbabilityWindowMatchesOracle) {
  for (auto b : {Boundary::torus, Boundary::free}) {
    auto g = sample_grid(8, 6, 1.0, b, 42);
    EXPECT_EQ(simulate_growth(g), max_height_path_oracle(g));
  }
}

TEST(GridGrowth, RandomWindowsMatchOracles) {
  SplitMix64 r(7);
  for (int k = 0; k < 3000; ++k) {
    std::size_t w = 2 + r() % 11, N = 1 + r() % 8;
    double p = uniform01(r);
    auto b = (r() & 1) ? Boundary::torus : Boundary::free;
    auto g = sample_grid(w, N, p, b, static_cast<std::uint64_t>(k));
    auto H = simulate_growth(g);
    ASSERT_EQ(H, max_height_path_oracle(g)) << k;
    if (w <= 6 && N <= 5) {
      for (std::size_t i = 0; i < w; ++i) ASSERT_EQ(H[N - 1][i], oracle::enumerate_paths(g, i, N)) << k;
    }
  }
}

TEST(GridGrowth, HeightAtLeastArrivalCount) {
  auto g = sample_grid(30, 40, 0.3, Boundary::torus, 3);
  auto H = simulate_growth(g);
  std::vector<double> beta(30, 0.0);
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::size_t i = 0; i < 30; ++i) {
      beta[i] += g.black(i, n);
      EXPECT_GE(H[n - 1][i], beta[i]);
      if (n > 1) {
        EXPECT_GE(H[n - 1][i], H[n - 2][i]);
      }
    }
}

TEST(GridService, MatchesFifoSchedule) {
  SplitMix64 r(11);
  for (int k = 0; k < 1000; ++k) {
    std::size_t w = 2 + r() % 11, N = 1 + r() % 8;
    auto b = (r() & 1) ? Boundary::torus : Boundary::free;
    std::optional<Distribution> sig;
    if (k % 3 == 0) sig = Distribution::exponential(1.0);
    auto g = sample_grid(w, N, uniform01(r), b, static_cast<std::uint64_t>(k), 0, 1, sig);
    auto W = simulate_service(g);
    auto O = oracle::fifo_workloads(g);
    ASSERT_EQ(W.size(), O.size());
    // unit heights are integers and must agree exactly; random heights differ only
    // by where the rounding happens (residuals versus absolute clearing times)
    if (!sig) {
      ASSERT_EQ(W, O) << k;
      continue;
    }
    for (std::size_t n = 0; n < W.size(); ++n)
      for (std::size_t i = 0; i < w; ++i) ASSERT_NEAR(W[n][i], O[n][i], 1e-9) << k << ' ' << n << ' ' << i;
  }
  auto g = sample_grid(8, 5, 0.5, Boundary::free, 99);
  EXPECT_EQ(simulate_service(g), oracle::fifo_workloads(g));
}

TEST(Gamma, ZeroProbability) {
  auto e = gamma_estimate(0.0, 50, 3, 1);
  EXPECT_EQ(e.gamma_hat, 0.0);
}

TEST(Gamma, HSequenceMatchesPathOracleOnSmallTorus) {
  // h_n <= H_n and h_n equals the best path that ends at (0, 1), cross-checked by
  // pruning the oracle: zero every node but (0,1) on the first row does not work for
  // heights, so compare with enumeration restricted to paths ending at (0,1).
  for (std::uint64_t k = 0; k < 300; ++k) {
    auto g = sample_grid(5, 5, 0.5, k % 2 ? Boundary::torus : Boundary::free, k);
    auto h = h_sequence(g);
    std::function<double(std::size_t, std::size_t)> best = [&](std::size_t i, std::size_t n) -> double {
      const double none = -1e18;
      std::size_t w = g.width;
      bool torus = g.boundary == Boundary::torus;
      bool b = g.black(i, n);
      double own = b ? 1.0 : 0.0, m = none;
      if (n == 1 && i == 0) m = 0.0;
      if (n >= 2) {
        m = std::max(m, best(i, n - 1));
        if (b && (torus || i > 0)) m = std::max(m, best((i + w - 1) % w, n - 1));
        if (b && (torus || i + 1 < w)) m = std::max(m, best((i + 1) % w, n - 1));
      }
      if (b) {
        auto dir = row_pairs(g, n);
        std::size_t r = (i + 1) % w, l = (i + w - 1) % w;
        bool seam = torus && dir[w - 1] == 0 && g.black(0, n) && g.black(w - 1, n);
        if ((torus || i + 1 < w) && g.right_priority(i, n) && !(seam && i == w - 1))
          m = std::max(m, g.black(r, n) ? best(r, n) : (n == 1 ? (r == 0 ? 0.0 : none) : best(r, n - 1)));
        if ((torus || i > 0) && !g.right_priority(l, n) && !(seam && i == 0))
          m = std::max(m, g.black(l, n) ? best(l, n) : (n == 1 ? (l == 0 ? 0.0 : none) : best(l, n - 1)));
      }
      return m <= none / 2 ? none : m + own;
    };
    auto H = simulate_growth(g);
    for (std::size_t n = 1; n <= 5; ++n) {
      EXPECT_EQ(h[n - 1], best(0, n)) << k << ' ' << n;
      EXPECT_LE(h[n - 1], H[n - 1][0]);
    }
  }
}

TEST(Gamma, MonotoneInProbabilityOnCoupledSamples) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    double prev = 0.0;
    for (double p : {0.05, 0.1, 0.2, 0.3, 0.5}) {
      auto g = sample_grid(401, 150, p, Boundary::torus, s);
      double h = h_sequence(g).back();
      EXPECT_GE(h, prev);
      prev = h;
    }
  }
}

TEST(Gamma, StableAcrossSeedBatches) {
  auto a = gamma_estimate(0.2, 2000, 8, 1);
  auto b = gamma_estimate(0.2, 2000, 8, 2);
  EXPECT_LE(a.ci_lo, b.ci_hi);
  EXPECT_LE(b.ci_lo, a.ci_hi);
  EXPECT_GT(a.gamma_hat, 0.2);  // the vertical path alone collects about p per row
}

TEST(Loynes, ZeroProbability) {
  auto l = loynes_grid(0.0, 40, 21, 1);
  EXPECT_EQ(l.violations, 0u);
  for (double v : l.origin) EXPECT_EQ(v, 0.0);
}

TEST(Loynes, NondecreasingInStartDepth) {
  std::size_t plateau = 0;
  for (std::uint64_t r = 0; r < 20; ++r) {
    auto l = loynes_grid(0.3, 500, 61, r);
    EXPECT_EQ(l.violations, 0u) << r;
    for (std::size_t n = 1; n < l.origin.size(); ++n) EXPECT_GE(l.origin[n], l.origin[n - 1]);
    plateau += l.plateau_reached;
  }
  RecordProperty("plateau_runs_of_20", static_cast<int>(plateau));
}

TEST(Loynes, RandomHeights) {
  for (std::uint64_t r = 0; r < 10; ++r) {
    auto l = loynes_grid(0.25, 200, 41, r, Boundary::torus, Distribution::exponential(1.0));
    EXPECT_EQ(l.violations, 0u);
  }
}

TEST(Regeneration, ZeroProbability) {
  auto l = loynes_grid(0.0, 20, 21, 1);
  auto r = regeneration_scan(l.row_full, 10);
  EXPECT_EQ(r.right, 0);
  EXPECT_EQ(r.left, 0);
  EXPECT_FALSE(r.right_censored || r.left_censored);
}

TEST(Regeneration, ScanAndCensoring) {
  std::vector<double> row{0, 1, 2, 0.5, 3, 2};
  auto r = regeneration_scan(row, 3);
  EXPECT_EQ(r.left, -3);
  EXPECT_TRUE(r.right_censored);
  auto q = regeneration_scan(row, 0);
  EXPECT_EQ(q.right, 0);
  EXPECT_EQ(q.left, 0);
}

TEST(Regeneration, DistancesGrowWithProbability) {
  // coupled rows: nested hail gives pointwise larger workloads, hence fewer idle sites
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto a = loynes_grid(0.15, 200, 81, s);
    auto b = loynes_grid(0.3, 200, 81, s);
    auto ra = regeneration_scan(a.row_full, 40), rb = regeneration_scan(b.row_full, 40);
    EXPECT_LE(ra.right, rb.right);
    EXPECT_GE(ra.left, rb.left);
  }
}

TEST(P0, BracketAndCsv) {
  auto b = p0_estimate({0.1, 0.3, 0.6, 0.9}, 200, 4, 5, 2, 100, 41);
  EXPECT_LT(b.lo, b.hi);
  EXPECT_LE(b.lo_ci, b.lo);
  for (std::size_t k = 1; k < b.estimates.size(); ++k)
    EXPECT_GT(b.estimates[k].gamma_hat, b.estimates[k - 1].gamma_hat);
  EXPECT_EQ(b.plateau_rate.size(), 4u);
  std::ostringstream os;
  write_gamma_sweep_csv(os, b);
  EXPECT_EQ(os.str().substr(0, 38), "p,N,gamma_hat,ci_lo,ci_hi,plateau_rate");
}

TEST(GridIo, RowDump) {
  auto g = manual(2, 1, Boundary::free);
  g.v[g.at(0, 1)] = 1;
  std::ostringstream os;
  write_grid_rows_csv(os, g, simulate_growth(g), simulate_service(g));
  EXPECT_EQ(os.str(), "n,i,v,e,H,W\n1,0,1,l,1,1\n1,1,0,l,0,0\n");
}
