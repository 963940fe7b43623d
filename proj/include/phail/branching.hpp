#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "clumps.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "lattice.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace phail {

// Offspring offsets relative to the parent (always containing 0) and the node height.
template <std::size_t D>
struct ProgenyPair {
  std::vector<Site<D>> V;
  double s = 0.0;
};

template <std::size_t D>
std::int64_t linf_radius(const std::vector<Site<D>>& V) {
  std::int64_t r = 0;
  for (auto& v : V) r = std::max(r, linf<D>(v, Site<D>{}));
  return r;
}

template <std::size_t D>
std::vector<Site<D>> ball_offsets(std::int64_t r) {
  std::vector<Site<D>> out;
  LatticeRegion<D>::centered(r).for_each([&](std::size_t, const Site<D>& z) { out.push_back(z); });
  return out;
}

template <std::size_t D>
struct ProgenyLaw {
  std::function<ProgenyPair<D>(SplitMix64&)> sampler;
  std::string source = "synthetic";
  bool heavy_tail_warning = false;

  ProgenyPair<D> sample(SplitMix64& g) const {
    auto p = sampler(g);
    if (std::find(p.V.begin(), p.V.end(), Site<D>{}) == p.V.end()) p.V.insert(p.V.begin(), Site<D>{});
    return p;
  }

  static ProgenyLaw constant(ProgenyPair<D> p) {
    return {[p](SplitMix64&) { return p; }, "synthetic", false};
  }

  // Finite mixture of fixed pairs.
  static ProgenyLaw atoms(std::vector<ProgenyPair<D>> pairs, std::vector<double> weights) {
    if (pairs.empty() || pairs.size() != weights.size()) throw ConfigError("progeny law: atoms and weights differ");
    double tot = 0.0;
    for (double w : weights) {
      if (!(w >= 0)) throw ConfigError("progeny law: negative weight");
      tot += w;
    }
    std::vector<double> cum;
    double c = 0.0;
    for (double w : weights) cum.push_back(c += w / tot);
    return {[pairs, cum](SplitMix64& g) {
              double u = uniform01(g);
              auto i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
              return pairs[std::min(i, pairs.size() - 1)];
            },
            "synthetic", false};
  }

  // Uniform resampling from a pool of observed pairs.
  static ProgenyLaw empirical(std::vector<ProgenyPair<D>> pool) {
    if (pool.empty()) throw ConfigError("progeny law: empty empirical pool");
    return {[pool](SplitMix64& g) { return pool[static_cast<std::size_t>(g() % pool.size())]; }, "empirical", false};
  }

  // Ball of a random radius (0 allowed) with an independent height.
  static ProgenyLaw ball(std::vector<double> radius_pmf, Distribution height) {
    height.validate();
    std::vector<double> cum;
    double c = 0.0;
    for (double w : radius_pmf) cum.push_back(c += w);
    return {[cum, height](SplitMix64& g) {
              double u = uniform01(g) * cum.back();
              auto r = static_cast<std::int64_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
              r = std::min<std::int64_t>(r, static_cast<std::int64_t>(cum.size()) - 1);
              return ProgenyPair<D>{ball_offsets<D>(r), height.sample(g)};
            },
            "synthetic", height.heavy_tailed()};
  }

  // Same draws with every height multiplied by `factor`.
  ProgenyLaw inflated(double factor) const {
    auto base = sampler;
    return {[base, factor](SplitMix64& g) {
              auto p = base(g);
              p.s *= factor;
              return p;
            },
            source, heavy_tail_warning};
  }
};

// Pool of (C_0^z u {z}, sigma_hat_0^z) draws at the origin of a fresh Boolean field,
// offsets relative to the origin. Censored draws are counted and dropped.
template <std::size_t D>
struct ClumpPool {
  std::vector<ProgenyPair<D>> pairs;
  std::size_t censored = 0;
};

template <std::size_t D>
ClumpPool<D> sample_clump_pool(const SiteLaw& law, std::size_t n, std::int64_t half, std::uint64_t seed) {
  law.validate();
  auto region = LatticeRegion<D>::centered(half);
  ClumpPool<D> pool;
  for (std::size_t r = 0; pool.pairs.size() < n; ++r) {
    if (r > 4 * n + 100) throw CapacityError("clump pool: too many censored draws (supercritical?)");
    auto key = hash_combine(seed, r);
    auto fn = [&](const Site<D>& u) { return sample_site_summary<D>(law, key, u); };
    auto c = clump_at<D>(fn, Site<D>{}, region, law.radius.max_radius(), true);
    if (c.censored) {
      ++pool.censored;
      continue;
    }
    ProgenyPair<D> p{c.sites, c.sigma_hat};
    if (p.V.empty()) p.V.push_back(Site<D>{});
    pool.pairs.push_back(std::move(p));
  }
  return pool;
}

struct GenerationStats {
  std::size_t n = 0;
  double h = 0.0;
  std::uint64_t front_paths = 0;
  std::uint64_t distinct_sites = 0;
};

class BranchingCapacityError : public CapacityError {
 public:
  BranchingCapacityError(const std::string& what, std::vector<GenerationStats> done)
      : CapacityError(what), completed(std::move(done)) {}
  std::vector<GenerationStats> completed;  // generations 0..last completed
};

// Branching process with heights from a single individual at the origin. Every
// individual of generation n draws its own pair (V, s); children sit at parent + V
// with height parent + s. Returns generations 0..N.
template <std::size_t D>
std::vector<GenerationStats> run_branching(const ProgenyLaw<D>& law, std::size_t N, std::uint64_t seed,
                                           std::size_t cap = 10'000'000) {
  if (N < 1) throw UsageError("run_branching: need N >= 1");
  SplitMix64 g(seed);
  std::vector<std::pair<Site<D>, double>> front{{Site<D>{}, 0.0}}, next;
  std::vector<GenerationStats> out{{0, 0.0, 1, 1}};
  for (std::size_t n = 1; n <= N; ++n) {
    next.clear();
    for (auto& [z, h] : front) {
      auto p = law.sample(g);
      if (next.size() + p.V.size() > cap)
        throw BranchingCapacityError("run_branching: front exceeds " + std::to_string(cap) +
                                         " paths in generation " + std::to_string(n) + "; last completed generation " +
                                         std::to_string(n - 1),
                                     out);
      for (auto& v : p.V) {
        Site<D> c;
        for (std::size_t k = 0; k < D; ++k) c[k] = z[k] + v[k];
        next.emplace_back(c, h + p.s);
      }
    }
    front.swap(next);
    GenerationStats st;
    st.n = n;
    st.front_paths = front.size();
    std::unordered_set<Site<D>, SiteHash<D>> ends;
    for (auto& [z, h] : front) {
      st.h = std::max(st.h, h);
      ends.insert(z);
    }
    st.distinct_sites = ends.size();
    out.push_back(st);
  }
  return out;
}

inline void write_generations_csv(std::ostream& os, const std::vector<GenerationStats>& gens) {
  os << "n,h_n,front_paths,distinct_sites\n";
  for (auto& g : gens) {
    CsvRow r;
    r << static_cast<std::uint64_t>(g.n) << g.h << g.front_paths << g.distinct_sites;
    os << r.str() << '\n';
  }
}

// Exponential-versus-power tail check on positive samples: fits log P(X > x) against
// x and against log x over the upper half of the sample and keeps the better fit.
struct TailCheck {
  double rate = 0.0;  // fitted exponential decay rate
  bool light = true;
};

inline TailCheck tail_check(std::vector<double> xs) {
  TailCheck t;
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  if (n < 50) return t;
  std::vector<double> ax, lx, ly;
  // thresholds at distinct values above the median, thinned to at most ~400
  std::size_t step = std::max<std::size_t>(1, n / 800);
  for (std::size_t i = n / 2; i < n; i += step) {
    double x = xs[i];
    auto above = static_cast<std::size_t>(xs.end() - std::upper_bound(xs.begin(), xs.end(), x));
    if (!(x > 0) || above < 10 || (!ax.empty() && ax.back() == x)) continue;
    ax.push_back(x);
    lx.push_back(std::log(x));
    ly.push_back(std::log(static_cast<double>(above) / static_cast<double>(n)));
  }
  if (ax.size() < 3) return t;
  auto sse = [&](const std::vector<double>& x) {
    auto f = stats::fit_line(x, ly);
    double s = 0.0, m = stats::mean(ly), tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double r = ly[i] - (f.intercept + f.slope * x[i]);
      s += r * r;
      tot += (ly[i] - m) * (ly[i] - m);
    }
    return tot > 0 ? s / tot : 0.0;
  };
  t.rate = -stats::fit_line(ax, ly).slope;
  t.light = t.rate > 0 && sse(ax) <= sse(lx);
  return t;
}

struct GrowthEstimate {
  double c_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  std::vector<double> slopes;         // per replication
  std::size_t min_generations = 0;    // fewest generations completed by any replication
  bool truncated = false;             // some replication hit the front cap
  bool heavy_tail_warning = false;
};

// Slope of h(n) against n over the last half of the generations, averaged over replications.
template <std::size_t D>
GrowthEstimate estimate_growth_constant(const ProgenyLaw<D>& law, std::size_t N, std::size_t reps,
                                        std::uint64_t seed, std::size_t cap = 10'000'000) {
  GrowthEstimate e;
  e.heavy_tail_warning = law.heavy_tail_warning;
  e.min_generations = N;
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<GenerationStats> gens;
    try {
      gens = run_branching(law, N, hash_combine(seed, r), cap);
    } catch (const BranchingCapacityError& err) {
      gens = err.completed;
      e.truncated = true;
    }
    std::size_t last = gens.size() - 1;
    e.min_generations = std::min(e.min_generations, last);
    if (last < 2) continue;
    std::vector<double> x, y;
    for (std::size_t n = last / 2; n <= last; ++n) {
      x.push_back(static_cast<double>(n));
      y.push_back(gens[n].h);
    }
    e.slopes.push_back(stats::fit_line(x, y).slope);
  }
  if (e.slopes.empty()) return e;
  auto s = stats::summarize(e.slopes);
  e.c_hat = s.mean;
  e.ci_lo = s.n > 1 ? s.ci_lo : s.mean;
  e.ci_hi = s.n > 1 ? s.ci_hi : s.mean;
  return e;
}

// Law G with survival F_bar^(1/2), where F is the (weighted) empirical law of
// zeta = max(0, X, Y). Quantiles use the right-continuous generalized inverse.
struct DominatedLaw {
  std::vector<double> atoms;  // sorted distinct values of zeta
  std::vector<double> F;      // F(atom_i)
  std::vector<std::string> warnings;

  double F_bar(double x) const {
    auto i = std::upper_bound(atoms.begin(), atoms.end(), x) - atoms.begin();
    return i == 0 ? 1.0 : std::max(0.0, 1.0 - F[static_cast<std::size_t>(i - 1)]);
  }
  double G_bar(double x) const { return std::sqrt(F_bar(x)); }
  double G(double x) const { return 1.0 - G_bar(x); }

  // smallest atom with F >= v
  double F_quantile(double v) const {
    auto j = static_cast<std::size_t>(std::lower_bound(F.begin(), F.end(), v) - F.begin());
    return atoms[std::min(j, atoms.size() - 1)];
  }
  // G^{-1}(u) = F^{-1}(1 - (1 - u)^2)
  double quantile(double u) const {
    double w = 1.0 - u;
    return F_quantile(1.0 - w * w);
  }
};

inline DominatedLaw dominated_law(std::vector<double> zeta, std::vector<double> weights = {}) {
  if (zeta.empty()) throw ConfigError("dominated law: no samples");
  if (weights.empty()) weights.assign(zeta.size(), 1.0);
  std::map<double, double> mass;
  double tot = 0.0;
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    if (!(zeta[i] >= 0) || !std::isfinite(zeta[i])) throw ConfigError("dominated law: zeta must be finite and >= 0");
    mass[zeta[i]] += weights[i];
    tot += weights[i];
  }
  DominatedLaw d;
  double c = 0.0;
  for (auto& [v, m] : mass) {
    d.atoms.push_back(v);
    d.F.push_back(c += m / tot);
  }
  d.F.back() = 1.0;
  if (d.atoms.size() < 100)
    d.warnings.push_back("dominated law: only " + std::to_string(d.atoms.size()) + " atoms, quantile resolution is coarse");
  return d;
}

struct CoupledDraw {
  double X = 0.0, Y = 0.0, xi = 0.0, eta = 0.0;
  std::size_t source = 0;  // index of the (X, Y) sample used
};

// (xi, eta) i.i.d. from G, then (X, Y) drawn from the samples whose zeta equals min(xi, eta).
struct LightTailDominator {
  DominatedLaw law;
  std::vector<double> X, Y;
  std::map<double, std::vector<std::size_t>> by_zeta;

  LightTailDominator(std::vector<double> xs, std::vector<double> ys) : X(std::move(xs)), Y(std::move(ys)) {
    if (X.size() != Y.size()) throw UsageError("lighttail_dominate: X and Y sample sizes differ");
    std::vector<double> z(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
      z[i] = std::max({0.0, X[i], Y[i]});
      by_zeta[z[i]].push_back(i);
    }
    law = dominated_law(z);
  }

  std::pair<double, double> sample_iid(SplitMix64& g) const {
    double a = law.quantile(uniform01(g));
    return {a, law.quantile(uniform01(g))};
  }

  CoupledDraw sample_coupled(SplitMix64& g) const {
    CoupledDraw d;
    std::tie(d.xi, d.eta) = sample_iid(g);
    const auto& idx = by_zeta.at(std::min(d.xi, d.eta));
    d.source = idx[static_cast<std::size_t>(g() % idx.size())];
    d.X = X[d.source];
    d.Y = Y[d.source];
    return d;
  }
};

inline LightTailDominator lighttail_dominate(std::vector<double> X, std::vector<double> Y) {
  return LightTailDominator(std::move(X), std::move(Y));
}

template <std::size_t D>
struct IndependentizedDraw {
  ProgenyPair<D> raw;
  std::int64_t w_radius = 0;  // W = L-infinity ball of this radius
  double t = 0.0;
};

// Dominates a progeny law by W = ball(ceil(xi)) and t = eta with xi, eta i.i.d.,
// using X = L-infinity radius of V and Y = s.
template <std::size_t D>
struct Independentized {
  std::vector<ProgenyPair<D>> pool;
  LightTailDominator dom;
  TailCheck card_tail;

  ProgenyLaw<D> law() const {
    auto d = dom.law;
    return {[d](SplitMix64& g) {
              auto r = static_cast<std::int64_t>(std::ceil(d.quantile(uniform01(g))));
              double t = d.quantile(uniform01(g));
              return ProgenyPair<D>{ball_offsets<D>(r), t};
            },
            "independentized", !card_tail.light};
  }

  IndependentizedDraw<D> sample_coupled(SplitMix64& g) const {
    auto c = dom.sample_coupled(g);
    return {pool[c.source], static_cast<std::int64_t>(std::ceil(c.xi)), c.eta};
  }
};

template <std::size_t D>
std::vector<double> xs_of(const std::vector<ProgenyPair<D>>& pool) {
  std::vector<double> x;
  for (auto& p : pool) x.push_back(static_cast<double>(linf_radius<D>(p.V)));
  return x;
}

template <std::size_t D>
Independentized<D> independentize(std::vector<ProgenyPair<D>> pool) {
  std::vector<double> Y;
  for (auto& p : pool) Y.push_back(p.s);
  auto X = xs_of<D>(pool);
  Independentized<D> r{std::move(pool), LightTailDominator(X, Y), {}};
  // card(W) = (2 ceil(xi) + 1)^d
  std::vector<double> card;
  SplitMix64 g(0x1d);
  for (std::size_t i = 0; i < 20000; ++i)
    card.push_back(std::pow(2.0 * std::ceil(r.dom.law.quantile(uniform01(g))) + 1.0, static_cast<double>(D)));
  r.card_tail = tail_check(card);
  return r;
}

// Draws a pool of size n from a progeny law.
template <std::size_t D>
std::vector<ProgenyPair<D>> draw_pool(const ProgenyLaw<D>& law, std::size_t n, std::uint64_t seed) {
  SplitMix64 g(seed);
  std::vector<ProgenyPair<D>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(law.sample(g));
  return out;
}

}  // namespace phail
