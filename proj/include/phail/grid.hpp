#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "distribution.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace phail {

enum class Boundary { torus, free };

inline const char* boundary_name(Boundary b) { return b == Boundary::torus ? "torus" : "free"; }

// Bernoulli hail on a line of sites. Rows are slots n = 1..N, columns sites
// i = 0..width-1; (i0 + i, n0 + n - 1) is the absolute node, which is what the
// random draws are keyed on.
struct GridInput {
  std::size_t width = 0;
  std::size_t N = 0;
  double p = 0.0;
  Boundary boundary = Boundary::torus;
  std::int64_t i0 = 0;
  std::int64_t n0 = 1;
  std::vector<std::uint8_t> v;  // arrival indicator
  std::vector<std::uint8_t> e;  // pair (i, i+1): 1 when the right node has priority (e = r)
  std::vector<double> sigma;    // heights; empty means unit heights

  std::size_t at(std::size_t i, std::size_t n) const { return (n - 1) * width + i; }
  bool black(std::size_t i, std::size_t n) const { return v[at(i, n)] != 0; }
  bool right_priority(std::size_t i, std::size_t n) const { return e[at(i, n)] != 0; }
  double height(std::size_t i, std::size_t n) const { return sigma.empty() ? 1.0 : sigma[at(i, n)]; }

  void validate() const {
    if (width < 2) throw ConfigError("grid: width must be >= 2");
    if (!(p >= 0 && p <= 1)) throw ConfigError("grid: p must lie in [0, 1]");
    if (v.size() != width * N || e.size() != width * N) throw ConfigError("grid: row data does not match width x N");
    if (!sigma.empty() && sigma.size() != width * N) throw ConfigError("grid: sigma does not match width x N");
  }
};

// Draws keyed by absolute (site, slot): v = [u < p], so rows are nested in p and
// overlapping windows see the same hail.
inline GridInput sample_grid(std::size_t width, std::size_t N, double p, Boundary boundary, std::uint64_t seed,
                             std::int64_t i0 = 0, std::int64_t n0 = 1,
                             std::optional<Distribution> sigma = std::nullopt) {
  GridInput g;
  g.width = width;
  g.N = N;
  g.p = p;
  g.boundary = boundary;
  g.i0 = i0;
  g.n0 = n0;
  g.v.resize(width * N);
  g.e.resize(width * N);
  if (sigma) {
    sigma->validate();
    g.sigma.resize(width * N);
  }
  for (std::size_t n = 1; n <= N; ++n)
    for (std::size_t i = 0; i < width; ++i) {
      auto a = static_cast<std::uint64_t>(i0 + static_cast<std::int64_t>(i));
      auto b = static_cast<std::uint64_t>(n0 + static_cast<std::int64_t>(n) - 1);
      SplitMix64 r(hash_words(seed, {a, b}));
      auto k = g.at(i, n);
      g.v[k] = uniform01(r) < p;
      g.e[k] = (r() >> 63) != 0;
      if (sigma) g.sigma[k] = sigma->sample(r);
    }
  g.validate();
  return g;
}

// Same-row precedence of slot n. dir[i] describes pair (i, i+1 mod width):
// 0 none, 'l' (i+1 waits for i), 'r' (i waits for i+1). A pair needs both nodes
// black. On a torus whose row is all black with one common orientation the pairs
// form a cycle; the seam pair (width-1, 0) is then dropped.
inline std::vector<char> row_pairs(const GridInput& g, std::size_t n) {
  std::size_t w = g.width;
  std::vector<char> dir(w, 0);
  std::size_t pairs = g.boundary == Boundary::torus ? w : w - 1;
  for (std::size_t i = 0; i < pairs; ++i) {
    std::size_t j = (i + 1) % w;
    if (g.black(i, n) && g.black(j, n)) dir[i] = g.right_priority(i, n) ? 'r' : 'l';
  }
  if (g.boundary == Boundary::torus) {
    bool all_l = std::all_of(dir.begin(), dir.end(), [](char c) { return c == 'l'; });
    bool all_r = std::all_of(dir.begin(), dir.end(), [](char c) { return c == 'r'; });
    if (all_l || all_r) dir[w - 1] = 0;
  }
  return dir;
}

// Resolve a row where value(i) = base(i) max (value(nbr) + add(i)) over the
// neighbors i waits for. A left-to-right pass carries 'l' chains, a right-to-left
// pass carries 'r' chains; a node waiting on both sides takes the larger.
inline void resolve_row(const std::vector<char>& dir, bool torus, std::vector<double>& val,
                        const std::vector<double>& add) {
  std::size_t w = val.size();
  auto base = val;
  std::vector<double> L = base, R = base;
  // i waits for i-1 when pair (i-1, i) is 'l'
  auto left_dep = [&](std::size_t i) { return torus ? dir[(i + w - 1) % w] == 'l' : (i > 0 && dir[i - 1] == 'l'); };
  auto right_dep = [&](std::size_t i) { return dir[i] == 'r' && (torus || i + 1 < w); };
  std::size_t s = 0;
  if (torus)
    while (s < w && left_dep(s)) ++s;
  for (std::size_t k = 0; k < w; ++k) {
    std::size_t i = (s + k) % w;
    if (k > 0 && left_dep(i)) L[i] = std::max(L[i], L[(i + w - 1) % w] + add[i]);
  }
  s = w - 1;
  if (torus)
    for (std::size_t k = 0; k < w && right_dep(s); ++k) s = (s + w - 1) % w;
  for (std::size_t k = 0; k < w; ++k) {
    std::size_t i = (s + w - k) % w;
    if (k > 0 && right_dep(i)) R[i] = std::max(R[i], R[(i + 1) % w] + add[i]);
  }
  for (std::size_t i = 0; i < w; ++i) val[i] = std::max(L[i], R[i]);
}

namespace detail {

// max over the previous row at i-1, i, i+1 after applying f; missing neighbors skipped.
template <class F>
double neighborhood_max(const std::vector<double>& prev, std::size_t i, bool torus, F&& f) {
  std::size_t w = prev.size();
  double m = f(prev[i]);
  if (torus || i > 0) m = std::max(m, f(prev[(i + w - 1) % w]));
  if (torus || i + 1 < w) m = std::max(m, f(prev[(i + 1) % w]));
  return m;
}

}  // namespace detail

// One slot of the growth model: black nodes sit on top of the highest of the three
// lower neighbors and of the same-row nodes they wait for; white nodes keep their value.
inline void growth_step(const GridInput& g, std::size_t n, std::vector<double>& row) {
  bool torus = g.boundary == Boundary::torus;
  auto prev = row;
  std::vector<double> add(g.width, 0.0);
  for (std::size_t i = 0; i < g.width; ++i) {
    if (!g.black(i, n)) continue;
    add[i] = g.height(i, n);
    row[i] = detail::neighborhood_max(prev, i, torus, [](double x) { return x; }) + add[i];
  }
  resolve_row(row_pairs(g, n), torus, row, add);
}

// One slot of the service model: residuals drop by one per slot; a black node
// starts after the residuals of its three lower neighbors and the same-row nodes
// it waits for.
inline void service_step(const GridInput& g, std::size_t n, std::vector<double>& row) {
  bool torus = g.boundary == Boundary::torus;
  auto prev = row;
  auto dec = [](double x) { return std::max(x - 1.0, 0.0); };
  std::vector<double> add(g.width, 0.0);
  for (std::size_t i = 0; i < g.width; ++i) {
    if (!g.black(i, n)) {
      row[i] = dec(prev[i]);
      continue;
    }
    add[i] = g.height(i, n);
    row[i] = detail::neighborhood_max(prev, i, torus, dec) + add[i];
  }
  resolve_row(row_pairs(g, n), torus, row, add);
}

using GridRows = std::vector<std::vector<double>>;  // rows n = 1..N

inline GridRows simulate_growth(const GridInput& g) {
  g.validate();
  GridRows out;
  std::vector<double> row(g.width, 0.0);
  for (std::size_t n = 1; n <= g.N; ++n) {
    growth_step(g, n, row);
    out.push_back(row);
  }
  return out;
}

inline GridRows simulate_service(const GridInput& g) {
  g.validate();
  GridRows out;
  std::vector<double> row(g.width, 0.0);
  for (std::size_t n = 1; n <= g.N; ++n) {
    service_step(g, n, row);
    out.push_back(row);
  }
  return out;
}

// Service workloads after slot `last`, starting empty before slot `first`.
inline std::vector<double> service_row(const GridInput& g, std::size_t first, std::size_t last) {
  std::vector<double> row(g.width, 0.0);
  for (std::size_t n = first; n <= last; ++n) service_step(g, n, row);
  return row;
}

// Heights as maximal path heights in the precedence graph G(p), by memoized search
// over explicitly listed edges. Cost O(width * N) memory and time; meant for small windows.
inline GridRows max_height_path_oracle(const GridInput& g) {
  g.validate();
  std::size_t w = g.width, N = g.N;
  bool torus = g.boundary == Boundary::torus;
  std::vector<std::vector<char>> dirs(N + 1);
  for (std::size_t n = 1; n <= N; ++n) dirs[n] = row_pairs(g, n);
  auto id = [&](std::size_t i, std::size_t n) { return (n - 1) * w + i; };
  // successors of (i, n)
  auto successors = [&](std::size_t i, std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> s;
    bool b = g.black(i, n);
    if (n >= 2) {
      s.push_back({i, n - 1});
      if (b) {
        if (torus || i > 0) s.push_back({(i + w - 1) % w, n - 1});
        if (torus || i + 1 < w) s.push_back({(i + 1) % w, n - 1});
      }
    }
    if (b) {
      // spatial edges exist towards the node with priority; thinning keeps them
      // whenever the source is black
      bool has_right = torus || i + 1 < w;
      bool has_left = torus || i > 0;
      std::size_t r = (i + 1) % w, l = (i + w - 1) % w;
      bool seam_dropped_r = torus && i == w - 1 && g.black(r, n) && dirs[n][w - 1] == 0;
      bool seam_dropped_l = torus && i == 0 && g.black(l, n) && dirs[n][w - 1] == 0;
      if (has_right && g.right_priority(i, n) && !seam_dropped_r) s.push_back({r, n});
      if (has_left && !g.right_priority(l, n) && !seam_dropped_l) s.push_back({l, n});
    }
    return s;
  };
  std::vector<double> memo(w * N, -1.0);
  std::vector<char> state(w * N, 0);  // 0 new, 1 on stack, 2 done
  std::function<double(std::size_t, std::size_t)> value = [&](std::size_t i, std::size_t n) -> double {
    auto k = id(i, n);
    if (state[k] == 2) return memo[k];
    if (state[k] == 1) throw UsageError("max_height_path_oracle: cycle in G(p)");
    state[k] = 1;
    double best = 0.0;
    for (auto [a, m] : successors(i, n)) best = std::max(best, value(a, m));
    memo[k] = best + (g.black(i, n) ? g.height(i, n) : 0.0);
    state[k] = 2;
    return memo[k];
  };
  GridRows out(N, std::vector<double>(w, 0.0));
  for (std::size_t n = 1; n <= N; ++n)
    for (std::size_t i = 0; i < w; ++i) out[n - 1][i] = value(i, n);
  return out;
}

// h_n for n = 1..N: maximal height over paths of G(p) from (c, n) to (c, 1).
// Computed row by row as the best path from every node down to (c, 1).
inline std::vector<double> h_sequence(const GridInput& g, std::size_t c = 0) {
  g.validate();
  const double none = -std::numeric_limits<double>::infinity();
  bool torus = g.boundary == Boundary::torus;
  std::size_t w = g.width;
  std::vector<double> f(w, none), out;
  for (std::size_t n = 1; n <= g.N; ++n) {
    auto prev = f;
    std::vector<double> add(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
      bool b = g.black(i, n);
      double own = b ? g.height(i, n) : 0.0;
      double below;
      if (n == 1) {
        // on the first row a path can still end at (c, 1) through one spatial edge into a white c
        std::size_t l = (c + w - 1) % w, r = (c + 1) % w;
        bool into_c = !g.black(c, 1) && ((i == l && (torus || c > 0) && g.right_priority(l, 1)) ||
                                         (i == r && (torus || c + 1 < w) && !g.right_priority(c, 1)));
        below = i == c || (b && into_c) ? 0.0 : none;
      }
      else if (b) below = detail::neighborhood_max(prev, i, torus, [](double x) { return x; });
      else below = prev[i];
      f[i] = below + own;
      if (b) add[i] = own;
    }
    resolve_row(row_pairs(g, n), torus, f, add);
    out.push_back(f[c]);
  }
  return out;
}

struct GammaEstimate {
  double p = 0.0;
  std::size_t N = 0;
  double gamma_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0, se = 0.0;
  std::vector<double> samples;  // h_N / N per replication
  double half_rate = 0.0;       // mean h_{N/2} / (N/2), convergence diagnostic
};

inline std::size_t default_torus_width(std::size_t N) { return 2 * N + 101; }

inline GammaEstimate gamma_estimate(double p, std::size_t N, std::size_t reps, std::uint64_t seed,
                                    std::size_t width = 0) {
  if (N < 2) throw UsageError("gamma_estimate: need N >= 2");
  if (width == 0) width = default_torus_width(N);
  GammaEstimate e;
  e.p = p;
  e.N = N;
  std::vector<double> half;
  for (std::size_t r = 0; r < reps; ++r) {
    auto g = sample_grid(width, N, p, Boundary::torus, hash_combine(seed, r));
    auto h = h_sequence(g);
    e.samples.push_back(h.back() / static_cast<double>(N));
    half.push_back(h[N / 2 - 1] / static_cast<double>(N / 2));
  }
  auto s = stats::summarize(e.samples);
  e.gamma_hat = s.mean;
  e.se = s.se;
  e.ci_lo = reps > 1 ? s.ci_lo : s.mean;
  e.ci_hi = reps > 1 ? s.ci_hi : s.mean;
  e.half_rate = stats::mean(half);
  return e;
}

// H_N / N at one site of a torus, per replication.
inline stats::Summary height_rate(double p, std::size_t N, std::size_t reps, std::uint64_t seed,
                                  std::size_t width = 0) {
  if (width == 0) width = default_torus_width(N);
  std::vector<double> x;
  for (std::size_t r = 0; r < reps; ++r) {
    auto g = sample_grid(width, N, p, Boundary::torus, hash_combine(seed, r));
    std::vector<double> row(width, 0.0);
    for (std::size_t n = 1; n <= N; ++n) growth_step(g, n, row);
    x.push_back(row[0] / static_cast<double>(N));
  }
  return stats::summarize(x);
}

struct LoynesGrid {
  std::vector<double> origin;                 // W at the origin, slot 0, started empty at -n, n = 1..K
  std::vector<double> row_half, row_full;     // whole rows for n = K/2 and n = K
  std::size_t violations = 0;                 // (i, n) with W(start -n-1) < W(start -n)
  std::optional<std::pair<std::size_t, std::size_t>> witness;
  std::size_t plateau_n = 0;                  // smallest n after which the whole row no longer changes
  bool plateau_reached = false;               // plateau_n < K
};

// Backward scheme on slots -K+1..0: the run started earlier sees a superset of the
// hail, so every workload at slot 0 is nondecreasing in the start depth n.
inline LoynesGrid loynes_grid(double p, std::size_t K, std::size_t width, std::uint64_t seed,
                              Boundary boundary = Boundary::free, std::optional<Distribution> sigma = std::nullopt) {
  if (K < 2) throw UsageError("loynes_grid: need K >= 2");
  auto i0 = -static_cast<std::int64_t>(width / 2);
  auto g = sample_grid(width, K, p, boundary, seed, i0, -static_cast<std::int64_t>(K) + 1, sigma);
  std::size_t c = width / 2;
  LoynesGrid out;
  std::vector<double> prev;
  std::size_t last_change = 0;
  for (std::size_t n = 1; n <= K; ++n) {
    auto row = service_row(g, K - n + 1, K);
    out.origin.push_back(row[c]);
    if (n > 1) {
      bool changed = false;
      for (std::size_t i = 0; i < width; ++i) {
        if (row[i] < prev[i]) {
          ++out.violations;
          if (!out.witness) out.witness = {i, n};
        }
        if (row[i] != prev[i]) changed = true;
      }
      if (changed) last_change = n;
    }
    if (n == K / 2) out.row_half = row;
    if (n == K) out.row_full = row;
    prev = std::move(row);
  }
  out.plateau_n = std::max<std::size_t>(last_change, 1);
  out.plateau_reached = last_change < K;
  return out;
}

struct Regeneration {
  std::int64_t right = 0;  // min{i >= 0 : W^i = 0}
  std::int64_t left = 0;   // max{i <= 0 : W^i = 0}
  bool right_censored = false;
  bool left_censored = false;
};

inline Regeneration regeneration_scan(const std::vector<double>& row, std::size_t origin) {
  Regeneration r;
  std::size_t i = origin;
  while (i < row.size() && row[i] != 0.0) ++i;
  if (i == row.size()) {
    r.right_censored = true;
    r.right = static_cast<std::int64_t>(row.size() - origin);
  } else {
    r.right = static_cast<std::int64_t>(i - origin);
  }
  std::int64_t j = static_cast<std::int64_t>(origin);
  while (j >= 0 && row[static_cast<std::size_t>(j)] != 0.0) --j;
  r.left_censored = j < 0;
  r.left = j - static_cast<std::int64_t>(origin);
  return r;
}

struct P0Bracket {
  double lo = 0.0, hi = 1.0;        // from point estimates: gamma_hat <= 1 up to lo, > 1 at hi
  double lo_ci = 0.0, hi_ci = 1.0;  // conservative: ci_hi <= 1 up to lo_ci; ci_lo > 1 first at hi_ci
  std::vector<GammaEstimate> estimates;
  std::vector<double> plateau_rate;  // Loynes plateau fraction per p (empty when not run)
};

// Bracket for sup{p : gamma(p) <= 1} on a grid of p values (sorted ascending).
inline P0Bracket p0_estimate(std::vector<double> ps, std::size_t N, std::size_t reps, std::uint64_t seed,
                             std::size_t loynes_reps = 0, std::size_t K = 500, std::size_t loynes_width = 101) {
  std::sort(ps.begin(), ps.end());
  P0Bracket b;
  bool below = true, below_ci = true;
  bool hi_set = false, hi_ci_set = false;
  for (double p : ps) {
    auto e = gamma_estimate(p, N, reps, seed);
    if (below && e.gamma_hat <= 1.0) b.lo = p;
    else if (!hi_set) {
      below = false;
      hi_set = true;
      b.hi = p;
    }
    if (below_ci && e.ci_hi <= 1.0) b.lo_ci = p;
    else below_ci = false;
    if (!hi_ci_set && e.ci_lo > 1.0) {
      hi_ci_set = true;
      b.hi_ci = p;
    }
    if (loynes_reps > 0) {
      std::size_t plateau = 0;
      for (std::size_t r = 0; r < loynes_reps; ++r)
        plateau += loynes_grid(p, K, loynes_width, hash_combine(seed ^ 0x10e5, r)).plateau_reached;
      b.plateau_rate.push_back(static_cast<double>(plateau) / static_cast<double>(loynes_reps));
    }
    b.estimates.push_back(std::move(e));
  }
  return b;
}

inline void write_grid_rows_csv(std::ostream& os, const GridInput& g, const GridRows& H, const GridRows& W) {
  os << "n,i,v,e,H,W\n";
  for (std::size_t n = 1; n <= g.N; ++n)
    for (std::size_t i = 0; i < g.width; ++i) {
      CsvRow r;
      r << static_cast<long long>(g.n0 + static_cast<std::int64_t>(n) - 1)
        << static_cast<long long>(g.i0 + static_cast<std::int64_t>(i)) << (g.black(i, n) ? 1 : 0)
        << std::string(g.right_priority(i, n) ? "r" : "l") << H[n - 1][i] << W[n - 1][i];
      os << r.str() << '\n';
    }
}

inline void write_gamma_sweep_csv(std::ostream& os, const P0Bracket& b) {
  os << "p,N,gamma_hat,ci_lo,ci_hi,plateau_rate\n";
  for (std::size_t k = 0; k < b.estimates.size(); ++k) {
    const auto& e = b.estimates[k];
    CsvRow r;
    r << e.p << static_cast<std::uint64_t>(e.N) << e.gamma_hat << e.ci_lo << e.ci_hi;
    if (k < b.plateau_rate.size()) r << b.plateau_rate[k];
    else r << std::string("");
    os << r.str() << '\n';
  }
}

}  // namespace phail
