#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "distribution.hpp"
#include "format.hpp"
#include "lattice.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "union_find.hpp"

namespace phail {

// Per-site, per-slot arrival law of the discrete model: Poisson(lambda) arrivals,
// i.i.d. integer radii and heights.
struct SiteLaw {
  double lambda = 0.0;
  RadiusLaw radius;
  Distribution sigma = Distribution::constant(1.0);

  void validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("site law: lambda must be >= 0");
    radius.validate();
    sigma.validate();
  }
  double occupancy() const { return 1.0 - std::exp(-lambda); }
  static double lambda_for_occupancy(double p) { return -std::log1p(-p); }
};

struct SiteArrival {
  int radius = 0;
  double sigma = 0.0;
};

struct SiteSummary {
  std::uint32_t count = 0;
  int r_max = 0;
  double sigma_sum = 0.0;
  bool occupied() const { return count > 0; }
};

inline SiteSummary summarize_site(const std::vector<SiteArrival>& a) {
  SiteSummary s;
  for (auto& x : a) {
    ++s.count;
    s.r_max = std::max(s.r_max, x.radius);
    s.sigma_sum += x.sigma;
  }
  return s;
}

// Arrivals at site z for one slot, from a stream keyed by (key, z). The first uniform
// gives the count by inversion, so counts are nested when lambda grows.
template <std::size_t D>
std::vector<SiteArrival> sample_site(const SiteLaw& law, std::uint64_t key, const Site<D>& z) {
  SplitMix64 g(site_hash<D>(key, z));
  long m = poisson_inverse(law.lambda, uniform01(g));
  std::vector<SiteArrival> out(static_cast<std::size_t>(m));
  for (auto& a : out) {
    a.radius = law.radius.quantile(uniform01(g));
    a.sigma = law.sigma.sample(g);
  }
  return out;
}

template <std::size_t D>
SiteSummary sample_site_summary(const SiteLaw& law, std::uint64_t key, const Site<D>& z) {
  SplitMix64 g(site_hash<D>(key, z));
  long m = poisson_inverse(law.lambda, uniform01(g));
  SiteSummary s;
  for (long i = 0; i < m; ++i) {
    ++s.count;
    s.r_max = std::max(s.r_max, law.radius.quantile(uniform01(g)));
    s.sigma_sum += law.sigma.sample(g);
  }
  return s;
}

inline std::uint64_t slot_key(std::uint64_t seed, std::int64_t slot) {
  return hash_combine(seed, static_cast<std::uint64_t>(slot));
}

template <std::size_t D>
struct LatticeSlotField {
  LatticeRegion<D> region;
  std::vector<std::uint8_t> alpha;
  std::vector<int> r_max;
  std::vector<double> sigma_sum;
  std::vector<std::vector<SiteArrival>> arrivals;  // per-site breakdown; empty when built from cells

  explicit LatticeSlotField(const LatticeRegion<D>& r = {})
      : region(r), alpha(r.size(), 0), r_max(r.size(), 0), sigma_sum(r.size(), 0.0) {}

  bool has_breakdown() const { return !arrivals.empty(); }

  void set(const Site<D>& z, int r, double s) {
    auto i = region.index(z);
    alpha[i] = r > 0 ? 1 : 0;
    r_max[i] = r;
    sigma_sum[i] = r > 0 ? s : 0.0;
  }

  void set_arrivals(std::size_t i, std::vector<SiteArrival> a) {
    if (arrivals.empty()) arrivals.resize(region.size());
    auto s = summarize_site(a);
    alpha[i] = s.occupied();
    r_max[i] = s.r_max;
    sigma_sum[i] = s.sigma_sum;
    arrivals[i] = std::move(a);
  }

  SiteSummary summary(const Site<D>& z) const {
    if (!region.contains(z)) return {};
    auto i = region.index(z);
    SiteSummary s;
    s.count = alpha[i];
    s.r_max = r_max[i];
    s.sigma_sum = sigma_sum[i];
    return s;
  }

  int max_radius() const { return r_max.empty() ? 0 : *std::max_element(r_max.begin(), r_max.end()); }
};

template <std::size_t D>
LatticeSlotField<D> build_slot_field(const LatticeRegion<D>& region, const SiteLaw& law, std::uint64_t seed,
                                     std::int64_t slot = 0) {
  law.validate();
  LatticeSlotField<D> f(region);
  f.arrivals.resize(region.size());
  auto key = slot_key(seed, slot);
  region.for_each([&](std::size_t i, const Site<D>& z) { f.set_arrivals(i, sample_site<D>(law, key, z)); });
  return f;
}

template <std::size_t D>
struct Clump {
  std::vector<Site<D>> sites;         // covered sites, region order
  std::vector<Site<D>> ball_centers;  // occupied sites whose balls form the clump
  std::size_t L = 0;
  double sigma_hat = 0.0;
  bool censored = false;  // touches the region boundary
};

template <std::size_t D>
struct ClumpPartition {
  LatticeRegion<D> region;
  std::vector<Clump<D>> clumps;
  std::vector<std::int32_t> site_clump;  // -1: not covered (empty clump)

  const Clump<D>* clump_of(const Site<D>& z) const {
    if (!region.contains(z)) return nullptr;
    auto c = site_clump[region.index(z)];
    return c < 0 ? nullptr : &clumps[static_cast<std::size_t>(c)];
  }
};

// Balls B(y, R_y) and B(z, R_z) are connected iff |y - z|_inf <= R_y + R_z (closed balls).
template <std::size_t D>
ClumpPartition<D> find_clumps(const LatticeSlotField<D>& f) {
  const auto& reg = f.region;
  std::size_t n = reg.size();
  std::vector<std::int64_t> ordinal(n, -1);
  std::vector<std::size_t> occupied;
  for (std::size_t i = 0; i < n; ++i)
    if (f.alpha[i]) {
      ordinal[i] = static_cast<std::int64_t>(occupied.size());
      occupied.push_back(i);
    }
  int rmax = f.max_radius();
  UnionFind uf(occupied.size());
  for (std::size_t a = 0; a < occupied.size(); ++a) {
    Site<D> y = reg.site(occupied[a]);
    int ry = f.r_max[occupied[a]];
    reg.for_ball(y, ry + rmax, [&](const Site<D>& z) {
      auto j = reg.index(z);
      if (ordinal[j] > static_cast<std::int64_t>(a) && linf<D>(y, z) <= ry + f.r_max[j])
        uf.unite(a, static_cast<std::size_t>(ordinal[j]));
    });
  }
  std::vector<std::int64_t> root_of_site(n, -1);
  for (std::size_t a = 0; a < occupied.size(); ++a) {
    auto root = static_cast<std::int64_t>(uf.find(a));
    reg.for_ball(reg.site(occupied[a]), f.r_max[occupied[a]],
                 [&](const Site<D>& z) { root_of_site[reg.index(z)] = root; });
  }
  ClumpPartition<D> p;
  p.region = reg;
  p.site_clump.assign(n, -1);
  std::unordered_map<std::int64_t, std::int32_t> clump_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (root_of_site[i] < 0) continue;
    auto [it, fresh] = clump_id.try_emplace(root_of_site[i], static_cast<std::int32_t>(p.clumps.size()));
    if (fresh) p.clumps.emplace_back();
    auto& c = p.clumps[static_cast<std::size_t>(it->second)];
    p.site_clump[i] = it->second;
    Site<D> z = reg.site(i);
    c.sites.push_back(z);
    if (reg.on_boundary(z)) c.censored = true;
    if (f.alpha[i]) {
      c.ball_centers.push_back(z);
      c.sigma_hat += f.sigma_sum[i];
      if (reg.ball_touches_boundary(z, f.r_max[i])) c.censored = true;
    }
  }
  for (auto& c : p.clumps) c.L = c.sites.size();
  return p;
}

// Clump containing z, grown by search from z. `site` maps a site to its summary;
// sites outside `region` are treated as empty and reaching the boundary censors.
template <std::size_t D, class SiteFn>
Clump<D> clump_at(SiteFn&& site, const Site<D>& z, const LatticeRegion<D>& region, int max_radius,
                  bool stop_when_censored = false) {
  Clump<D> c;
  std::unordered_map<Site<D>, int, SiteHash<D>> balls;  // center -> radius
  std::vector<Site<D>> queue;
  // balls covering z
  region.for_ball(z, max_radius, [&](const Site<D>& u) {
    SiteSummary s = site(u);
    if (s.occupied() && linf<D>(u, z) <= s.r_max && !balls.count(u)) {
      balls.emplace(u, s.r_max);
      queue.push_back(u);
    }
  });
  std::size_t head = 0;
  while (head < queue.size()) {
    Site<D> y = queue[head++];
    int ry = balls[y];
    if (region.ball_touches_boundary(y, ry)) {
      c.censored = true;
      if (stop_when_censored) return c;
    }
    region.for_ball(y, ry + max_radius, [&](const Site<D>& u) {
      if (balls.count(u)) return;
      SiteSummary s = site(u);
      if (s.occupied() && linf<D>(u, y) <= ry + s.r_max) {
        balls.emplace(u, s.r_max);
        queue.push_back(u);
      }
    });
  }
  std::unordered_set<Site<D>, SiteHash<D>> covered;
  for (auto& [y, r] : balls) {
    c.ball_centers.push_back(y);
    region.for_ball(y, r, [&](const Site<D>& u) { covered.insert(u); });
  }
  c.sites.assign(covered.begin(), covered.end());
  auto by_index = [&](const Site<D>& a, const Site<D>& b) { return region.index(a) < region.index(b); };
  std::sort(c.sites.begin(), c.sites.end(), by_index);
  std::sort(c.ball_centers.begin(), c.ball_centers.end(), by_index);
  c.L = c.sites.size();
  for (auto& u : c.sites)
    if (region.on_boundary(u)) c.censored = true;
  // sigma_hat summed in region order for reproducible rounding
  c.sigma_hat = 0.0;
  for (auto& y : c.ball_centers) c.sigma_hat += site(y).sigma_sum;
  return c;
}

template <std::size_t D>
Clump<D> clump_at(const LatticeSlotField<D>& f, const Site<D>& z) {
  return clump_at<D>([&](const Site<D>& u) { return f.summary(u); }, z, f.region, std::max(1, f.max_radius()));
}

using HeightRow = std::vector<double>;

// One step of the Boolean height recursion: every site of a clump gets
// sigma_hat + max of the previous row over the clump; uncovered sites keep their value.
template <std::size_t D>
HeightRow model5_step(const ClumpPartition<D>& part, const HeightRow& prev) {
  HeightRow next = prev;
  for (const auto& c : part.clumps) {
    double m = 0.0;
    for (auto& z : c.sites) m = std::max(m, prev[part.region.index(z)]);
    double v = c.sigma_hat + m;
    for (auto& z : c.sites) next[part.region.index(z)] = v;
  }
  return next;
}

// Rows after slots 1..n, starting from the zero row. All fields share one region.
template <std::size_t D>
std::vector<HeightRow> iterate_model5(const std::vector<LatticeSlotField<D>>& fields) {
  std::vector<HeightRow> rows;
  if (fields.empty()) return rows;
  HeightRow h(fields.front().region.size(), 0.0);
  for (const auto& f : fields) {
    h = model5_step(find_clumps(f), h);
    rows.push_back(h);
  }
  return rows;
}

// Backward recursion at `origin`: value n uses the n most recent slots, fields given
// most recent first. Evaluated as a max-plus path program over the reachable sites.
template <std::size_t D>
std::vector<double> backward_model5(const std::vector<ClumpPartition<D>>& recent_first, const Site<D>& origin) {
  std::vector<double> out;
  if (recent_first.empty()) return out;
  const auto& reg = recent_first.front().region;
  const double none = -std::numeric_limits<double>::infinity();
  std::vector<double> acc(reg.size(), none);
  std::vector<std::size_t> support{reg.index(origin)};
  acc[support[0]] = 0.0;
  std::vector<char> in_support(reg.size(), 0);
  in_support[support[0]] = 1;
  double best = 0.0;
  for (const auto& part : recent_first) {
    std::unordered_map<std::int32_t, double> clump_best;
    for (auto i : support) {
      auto c = part.site_clump[i];
      if (c < 0) continue;
      auto [it, fresh] = clump_best.try_emplace(c, acc[i]);
      if (!fresh) it->second = std::max(it->second, acc[i]);
    }
    for (auto& [c, v] : clump_best) {
      const auto& cl = part.clumps[static_cast<std::size_t>(c)];
      double nv = v + cl.sigma_hat;
      for (auto& z : cl.sites) {
        auto j = reg.index(z);
        if (!in_support[j]) {
          in_support[j] = 1;
          support.push_back(j);
          acc[j] = nv;
        } else {
          acc[j] = std::max(acc[j], nv);
        }
        best = std::max(best, acc[j]);
      }
    }
    out.push_back(best);
  }
  return out;
}

struct TailStats {
  std::vector<std::size_t> k;           // thresholds
  std::vector<double> p_exceed;         // P(L > k) over uncensored root sites
  std::vector<stats::Interval> band;    // Wilson 95% band
  double decay_rate = 0.0;              // fitted -d/dk log P(L > k)
  double decay_ci_lo = 0.0, decay_ci_hi = 0.0;
  std::size_t root_sites = 0;           // uncensored sites used
  std::size_t censored_sites = 0;
  bool boundary_warning = false;        // some clump touched the region boundary
  std::vector<double> sigma_hat_samples;  // sigma_hat of the root site's clump, uncensored, nonempty
  std::vector<double> L_samples;
};

// Site-rooted tail of L(C^z) and sigma_hat^z. Fields are drawn on a box of
// half-side `half`; every site is a root, censored clumps are excluded.
template <std::size_t D>
TailStats clump_tail_stats(const SiteLaw& law, std::int64_t half, std::size_t fields, std::uint64_t seed,
                           std::size_t batches = 10, std::size_t kmax = 0) {
  auto region = LatticeRegion<D>::centered(half);
  TailStats ts;
  std::vector<std::vector<std::size_t>> batch_counts;  // per batch histogram of L
  std::vector<std::size_t> batch_n(batches, 0);
  std::vector<std::size_t> hist;
  batch_counts.assign(batches, {});
  for (std::size_t f = 0; f < fields; ++f) {
    auto field = build_slot_field<D>(region, law, hash_combine(seed, f));
    auto part = find_clumps(field);
    std::size_t b = f % batches;
    for (std::size_t i = 0; i < region.size(); ++i) {
      auto c = part.site_clump[i];
      std::size_t L = 0;
      if (c >= 0) {
        const auto& cl = part.clumps[static_cast<std::size_t>(c)];
        if (cl.censored) {
          ++ts.censored_sites;
          ts.boundary_warning = true;
          continue;
        }
        L = cl.L;
        ts.sigma_hat_samples.push_back(cl.sigma_hat);
      }
      ts.L_samples.push_back(static_cast<double>(L));
      if (hist.size() <= L) hist.resize(L + 1, 0);
      if (batch_counts[b].size() <= L) batch_counts[b].resize(L + 1, 0);
      ++hist[L];
      ++batch_counts[b][L];
      ++batch_n[b];
      ++ts.root_sites;
    }
  }
  if (kmax == 0) kmax = hist.empty() ? 0 : hist.size() - 1;
  auto tail_from = [&](const std::vector<std::size_t>& h, std::size_t n, std::size_t k) {
    std::size_t c = 0;
    for (std::size_t l = k + 1; l < h.size(); ++l) c += h[l];
    return std::make_pair(c, n);
  };
  for (std::size_t k = 0; k <= kmax; ++k) {
    auto [c, n] = tail_from(hist, ts.root_sites, k);
    ts.k.push_back(k);
    ts.p_exceed.push_back(n ? static_cast<double>(c) / static_cast<double>(n) : 0.0);
    ts.band.push_back(stats::wilson(c, n));
  }
  // Fit log P(L > k) ~ a - rate*k on thresholds with at least 20 exceeding sites.
  auto fit = [&](const std::vector<std::size_t>& h, std::size_t n) -> std::optional<double> {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k <= kmax; ++k) {
      auto [c, nn] = tail_from(h, n, k);
      if (c < 20) break;
      xs.push_back(static_cast<double>(k));
      ys.push_back(std::log(static_cast<double>(c) / static_cast<double>(nn)));
    }
    if (xs.size() < 3) return std::nullopt;
    return -stats::fit_line(xs, ys).slope;
  };
  if (auto r = fit(hist, ts.root_sites)) ts.decay_rate = *r;
  std::vector<double> rates;
  for (std::size_t b = 0; b < batches; ++b)
    if (auto r = fit(batch_counts[b], batch_n[b])) rates.push_back(*r);
  if (rates.size() >= 2) {
    auto s = stats::summarize(rates);
    ts.decay_ci_lo = s.ci_lo;
    ts.decay_ci_hi = s.ci_hi;
  }
  return ts;
}

// Fraction of replications whose clump at the origin reaches the boundary of
// the box of half-side `half`. Site draws are keyed by (seed, rep, site), so the
// statistic is coupled across lambda and across box sizes.
template <std::size_t D>
std::size_t origin_touch_count(const SiteLaw& law, std::int64_t half, std::size_t reps, std::uint64_t seed) {
  auto region = LatticeRegion<D>::centered(half);
  std::size_t touched = 0;
  Site<D> origin{};
  for (std::size_t r = 0; r < reps; ++r) {
    auto key = hash_combine(seed, r);
    auto fn = [&](const Site<D>& u) { return sample_site_summary<D>(law, key, u); };
    auto c = clump_at<D>(fn, origin, region, law.radius.max_radius(), true);
    if (c.censored) ++touched;
  }
  return touched;
}

struct LambdaBracket {
  double lo = 0.0;  // largest lambda classified subcritical
  double hi = 0.0;  // smallest lambda classified not subcritical
  stats::Interval touch_lo;  // touch probability CI at lo (largest box)
  stats::Interval touch_hi;  // touch probability CI at hi (largest box)
  std::vector<std::int64_t> sizes;
  std::size_t reps = 0;
  bool lo_is_floor = false;    // lambda_min itself was not subcritical
  bool hi_is_ceiling = false;  // never left the subcritical side
};

// Bisection for the clump percolation threshold. Diagnostic at lambda: the touch
// probability on the largest box is < 0.01 and does not increase from the
// next-smaller box (region doubling). Returns a bracket, never a point value.
template <std::size_t D>
LambdaBracket estimate_lambda_c(const RadiusLaw& radius, const std::vector<std::int64_t>& sizes, std::uint64_t seed,
                                std::size_t reps = 400, double lambda_min = 1e-3, double lambda_max = 8.0,
                                int iterations = 12) {
  if (sizes.size() < 2) throw UsageError("estimate_lambda_c: need at least two region sizes");
  auto sorted = sizes;
  std::sort(sorted.begin(), sorted.end());
  SiteLaw law;
  law.radius = radius;
  auto touch = [&](double lambda, std::int64_t half) {
    law.lambda = lambda;
    return origin_touch_count<D>(law, half, reps, seed);
  };
  auto subcritical = [&](double lambda) {
    auto big = touch(lambda, sorted.back());
    auto small = touch(lambda, sorted[sorted.size() - 2]);
    double pb = static_cast<double>(big) / static_cast<double>(reps);
    return pb < 0.01 && big <= small;
  };
  LambdaBracket b;
  b.sizes = sorted;
  b.reps = reps;
  double lo = lambda_min, hi = lambda_max;
  if (!subcritical(lo)) {
    b.lo_is_floor = true;
    hi = lo;
    lo = 0.0;
  } else if (subcritical(hi)) {
    b.hi_is_ceiling = true;
    lo = hi;
  } else {
    for (int it = 0; it < iterations; ++it) {
      double mid = std::sqrt(lo * hi);
      if (subcritical(mid)) lo = mid;
      else hi = mid;
    }
  }
  b.lo = lo;
  b.hi = hi;
  b.touch_lo = stats::wilson(touch(lo, sorted.back()), reps);
  b.touch_hi = stats::wilson(touch(hi, sorted.back()), reps);
  return b;
}

template <std::size_t D>
struct ExtensionResult {
  Clump<D> cx;        // clump of x in the original field
  Clump<D> cy;        // clump of y in the original field
  Clump<D> under_cy;  // clump of y after resampling the hit set of cx
  std::size_t hit_pairs = 0;  // (site, radius) coordinates resampled
  bool flagged = false;       // clump of x censored or hit set leaves the region
};

// Resampling extension: on the hit set {(z,k) : B(z,k) meets C^x} the radius-k
// arrivals at z are replaced by an independent Poisson(lambda * P(R=k)) batch;
// everything else is kept. The clump of y is then recomputed.
template <std::size_t D>
ExtensionResult<D> resample_extension(const LatticeSlotField<D>& field, const SiteLaw& law, const Site<D>& x,
                                      const Site<D>& y, std::uint64_t fresh_seed,
                                      LatticeSlotField<D>* under_out = nullptr) {
  if (!field.has_breakdown()) throw UsageError("resample_extension: field needs the per-site arrival breakdown");
  const auto& reg = field.region;
  int kmax = law.radius.max_radius();
  ExtensionResult<D> r;
  r.cx = clump_at(field, x);
  r.cy = clump_at(field, y);
  if (r.cx.censored) r.flagged = true;
  LatticeSlotField<D> under = field;
  // An empty clump still reveals that no ball covers x, so its hit set is that of {x}.
  std::vector<Site<D>> A = r.cx.sites.empty() ? std::vector<Site<D>>{x} : r.cx.sites;
  {
    std::unordered_map<Site<D>, int, SiteHash<D>> dist;  // distance to A, up to kmax
    LatticeRegion<D> everywhere;
    everywhere.lo.fill(std::numeric_limits<std::int64_t>::min() / 4);
    everywhere.hi.fill(std::numeric_limits<std::int64_t>::max() / 4);
    for (auto& a : A)
      everywhere.for_ball(a, kmax, [&](const Site<D>& z) {
        int d = static_cast<int>(linf<D>(a, z));
        auto [it, fresh] = dist.try_emplace(z, d);
        if (!fresh) it->second = std::min(it->second, d);
      });
    std::vector<std::pair<Site<D>, int>> hit(dist.begin(), dist.end());
    std::sort(hit.begin(), hit.end());
    for (auto& [z, d] : hit) {
      int k0 = std::max(d, law.radius.min_radius());
      if (k0 > kmax) continue;
      if (!reg.contains(z)) {
        r.flagged = true;
        continue;
      }
      auto i = reg.index(z);
      std::vector<SiteArrival> kept;
      for (auto& a : field.arrivals[i])
        if (a.radius < k0) kept.push_back(a);
      for (int k = k0; k <= kmax; ++k) {
        double pk = law.radius.prob(k);
        if (pk <= 0) continue;
        ++r.hit_pairs;
        SplitMix64 g(hash_combine(site_hash<D>(fresh_seed, z), static_cast<std::uint64_t>(k)));
        long m = poisson_inverse(law.lambda * pk, uniform01(g));
        for (long j = 0; j < m; ++j) kept.push_back({k, law.sigma.sample(g)});
      }
      under.set_arrivals(i, std::move(kept));
    }
  }
  r.under_cy = clump_at(under, y);
  if (under_out) *under_out = std::move(under);
  return r;
}

// C^x u C^y is contained in C^x u (resampled C^y).
template <std::size_t D>
bool extension_inclusion_holds(const ExtensionResult<D>& r) {
  std::unordered_set<Site<D>, SiteHash<D>> rhs(r.cx.sites.begin(), r.cx.sites.end());
  rhs.insert(r.under_cy.sites.begin(), r.under_cy.sites.end());
  return std::all_of(r.cy.sites.begin(), r.cy.sites.end(), [&](const Site<D>& z) { return rhs.count(z) > 0; });
}

template <std::size_t D>
void write_clumps_csv_header(std::ostream& os) {
  CsvRow h;
  h << "slot";
  for (std::size_t k = 1; k <= D; ++k) h << "root_z" + std::to_string(k);
  h << "L" << "sigma_hat" << "censored";
  os << h.str() << '\n';
}

// One row per clump; the root site is the clump's first site in region order.
template <std::size_t D>
void write_clumps_csv(std::ostream& os, std::int64_t slot, const ClumpPartition<D>& p) {
  for (const auto& c : p.clumps) {
    CsvRow row;
    row << static_cast<long long>(slot);
    for (auto v : c.sites.front()) row << static_cast<long long>(v);
    row << static_cast<std::uint64_t>(c.L) << c.sigma_hat << (c.censored ? 1 : 0);
    os << row.str() << '\n';
  }
}

template <std::size_t D>
void write_field_csv(std::ostream& os, const LatticeSlotField<D>& f) {
  CsvRow h;
  for (std::size_t k = 1; k <= D; ++k) h << "z" + std::to_string(k);
  h << "alpha" << "R_max" << "sigma_sum";
  os << h.str() << '\n';
  f.region.for_each([&](std::size_t i, const Site<D>& z) {
    CsvRow row;
    for (auto v : z) row << static_cast<long long>(v);
    row << static_cast<int>(f.alpha[i]) << f.r_max[i] << f.sigma_sum[i];
    os << row.str() << '\n';
  });
}

}  // namespace phail
