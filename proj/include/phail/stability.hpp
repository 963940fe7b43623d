#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clumps.hpp"
#include "discretize.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "precedence.hpp"
#include "rain.hpp"
#include "stats.hpp"
#include "union_find.hpp"

namespace phail {

// Continuous input used by the stability experiments: rain on [-window, window]^d
// (padded) and times [0, T]. Backward quantities at time T use the arrivals of [T - s, T).
template <std::size_t D>
struct GrowthSetup {
  ShapeLaw shape{ShapeKind::cube, Distribution::constant(1.0)};
  Distribution sigma = Distribution::constant(1.0);
  double window = 0.0;  // half width; 0 picks auto_window(T)
  double window_per_time = 1.0;
  double min_window = 16.0;
  double max_expected = 2e7;

  void validate() const {
    shape.size.validate();
    sigma.validate();
    if (!(window >= 0) || !(window_per_time >= 0) || !(min_window > 0))
      throw ConfigError("growth setup: window parameters must be >= 0");
  }

  double auto_window(double T) const { return window > 0 ? window : std::max(min_window, window_per_time * T); }

  // Window actually used: shrunk so the expected arrival count stays within budget.
  RainConfig<D> rain(double lambda, double T) const {
    RainConfig<D> c;
    c.lambda = lambda;
    c.shape = shape;
    c.sigma = sigma;
    c.t0 = 0.0;
    c.t1 = T;
    c.max_expected = max_expected;
    double w = auto_window(T), pad = c.effective_pad();
    double per_unit = lambda * T;
    if (per_unit > 0) {
      double side = std::pow(max_expected / per_unit, 1.0 / static_cast<double>(D));
      w = std::min(w, std::max(1.0, side / 2 - pad));
    }
    c.lo.fill(-w);
    c.hi.fill(w);
    return c;
  }
};

// Sample at max(lambda, couple_at) and thin down, so runs at different lambda with the
// same seed are nested.
template <std::size_t D>
std::vector<Arrival<D>> coupled_rain(const GrowthSetup<D>& setup, double lambda, double T, const SeedSpec& seed,
                                     double couple_at = 0.0) {
  double top = std::max(lambda, couple_at);
  if (top <= 0) return {};
  auto rain = sample_rain(setup.rain(top, T), seed);
  if (top == lambda) return rain;
  return thin(rain, lambda / top, seed.derive("thin"));
}

// Lattice radius law of Model 2 for this grain law: floor(diameter) + 1, read off a
// quantile grid of the size law.
template <std::size_t D>
RadiusLaw model2_radius_law(const ShapeLaw& shape, int grid = 4096) {
  std::map<int, double> mass;
  for (int i = 0; i < grid; ++i) {
    double s = shape.size.quantile((i + 0.5) / grid);
    double diam = shape.kind == ShapeKind::ball ? 2 * s : 2 * s * std::sqrt(static_cast<double>(D));
    mass[static_cast<int>(std::floor(diam)) + 1] += 1.0 / grid;
  }
  RadiusLaw r;
  r.kmin = mass.begin()->first;
  r.pmf.assign(static_cast<std::size_t>(mass.rbegin()->first - r.kmin + 1), 0.0);
  for (auto& [k, m] : mass) r.pmf[static_cast<std::size_t>(k - r.kmin)] = m;
  return r;
}

// Integer horizons ceil(T k / K), k = 1..K, deduplicated.
inline std::vector<double> integer_grid(double T, std::size_t K) {
  std::vector<double> g;
  for (std::size_t k = 1; k <= K; ++k) {
    double v = std::ceil(T * static_cast<double>(k) / static_cast<double>(K));
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

// base * 2^k up to T, with T itself last.
inline std::vector<double> exponential_schedule(double base, double T) {
  if (!(base > 0) || !(T >= base)) throw ConfigError("schedule: need 0 < base <= T");
  std::vector<double> s;
  for (double v = base; v < T; v *= 2) s.push_back(v);
  s.push_back(T);
  return s;
}

template <std::size_t D>
std::size_t first_at_or_after(const std::vector<Arrival<D>>& rain, double t) {
  auto it = std::lower_bound(rain.begin(), rain.end(), t, [](const Arrival<D>& a, double v) { return a.t < v; });
  return static_cast<std::size_t>(it - rain.begin());
}

template <std::size_t D>
bool footprint_inside(const Arrival<D>& a, const Point<D>& lo, const Point<D>& hi) {
  auto h = half_widths(a.shape);
  for (std::size_t k = 0; k < D; ++k)
    if (a.x[k] - h[k] < lo[k] || a.x[k] + h[k] > hi[k]) return false;
  return true;
}

// True when some arrival the value at (x, T) depends on (suffix from `first`) has a
// footprint leaving the window, so arrivals outside the sampled rain could matter.
template <std::size_t D>
bool dependency_leaves_window(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& rain, std::size_t first,
                              const Point<D>& x, double T, const Point<D>& lo, const Point<D>& hi) {
  std::vector<char> seen(rain.size(), 0);
  std::vector<std::size_t> stack;
  for_covering(dag, rain, x, T, TimeBound::open, first, [&](std::size_t j) {
    if (!seen[j]) {
      seen[j] = 1;
      stack.push_back(j);
    }
  });
  while (!stack.empty()) {
    auto j = stack.back();
    stack.pop_back();
    if (!footprint_inside(rain[j], lo, hi)) return true;
    for (auto i : dag.pred(j))
      if (i >= first && !seen[i]) {
        seen[i] = 1;
        stack.push_back(i);
      }
  }
  return false;
}

struct HeightPath {
  std::vector<double> t;
  std::vector<double> H;
  bool truncated = false;
};

// Backward growth heights at (x, T) over the spans in `grid` (each <= T).
template <std::size_t D>
HeightPath continuous_backward(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& rain, const Point<D>& x,
                               double T, const std::vector<double>& grid, const RainConfig<D>& cfg) {
  HeightPath p;
  Schedule s;
  for (double g : grid) {
    growth_heights(dag, rain, s, first_at_or_after(rain, T - g));
    p.t.push_back(g);
    p.H.push_back(height_at(dag, rain, s, x, T, TimeBound::open));
  }
  if (!grid.empty()) p.truncated = dependency_leaves_window(dag, rain, first_at_or_after(rain, T - grid.back()), x, T, cfg.lo, cfg.hi);
  return p;
}

// Boolean Model 5 backward heights at floor(x) after slot T, from the discretized
// rain; grid entries must be integers in [1, T].
template <std::size_t D>
HeightPath model5_backward(const std::vector<Arrival<D>>& rain, const Point<D>& x, double T,
                           const std::vector<double>& grid) {
  auto Tn = static_cast<std::int64_t>(std::ceil(T));
  auto cells = to_model4(to_model3(to_model2(rain)));
  auto origin = floor_site(x);
  auto region = cell_region(cells, {origin});
  auto fields = cell_fields(cells, region, 1, Tn);
  std::vector<ClumpPartition<D>> parts;
  parts.reserve(fields.size());
  for (auto it = fields.rbegin(); it != fields.rend(); ++it) parts.push_back(find_clumps(*it));
  auto back = backward_model5(parts, origin);
  HeightPath p;
  for (double g : grid) {
    auto n = static_cast<std::size_t>(g);
    if (n < 1 || n > back.size() || static_cast<double>(n) != g)
      throw UsageError("model5_backward: grid must hold integers in [1, T]");
    p.t.push_back(g);
    p.H.push_back(back[n - 1]);
  }
  return p;
}

enum class GrowthModel { continuous, model5 };

inline const char* model_name(GrowthModel m) { return m == GrowthModel::continuous ? "continuous" : "model5"; }

// Per-path estimate: mean of H(t)/t over the last half of the grid. Pathwise
// nondecreasing in the input (every H(t) is).
inline double last_half_rate(const HeightPath& p) {
  double s = 0.0;
  std::size_t n = 0;
  double T = p.t.empty() ? 0.0 : p.t.back();
  for (std::size_t k = 0; k < p.t.size(); ++k)
    if (p.t[k] >= T / 2) {
      s += p.H[k] / p.t[k];
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

struct GrowthRateEstimate {
  double lambda = 0.0;
  GrowthModel model = GrowthModel::continuous;
  double T = 0.0;
  std::size_t reps = 0;
  double kappa_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double se = 0.0;
  double final_ratio = 0.0;  // mean H(T)/T
  std::vector<double> per_rep;
  std::size_t truncated_reps = 0;
  bool lower_bound = false;  // some replication may have been cut by the window
};

struct KappaOptions {
  std::size_t grid_points = 16;
  double couple_at = 0.0;  // sample at this intensity and thin (0: sample at lambda)
};

template <std::size_t D>
GrowthRateEstimate kappa_estimate(double lambda, GrowthModel model, double T, std::size_t reps, std::uint64_t seed,
                                  const GrowthSetup<D>& setup = {}, const KappaOptions& opt = {}) {
  setup.validate();
  if (!(T >= 1)) throw ConfigError("kappa_estimate: T must be >= 1");
  if (reps == 0) throw ConfigError("kappa_estimate: need at least one replication");
  GrowthRateEstimate e;
  e.lambda = lambda;
  e.model = model;
  e.T = std::ceil(T);
  e.reps = reps;
  auto grid = integer_grid(e.T, opt.grid_points);
  std::vector<double> finals;
  Point<D> origin{};
  for (std::size_t r = 0; r < reps; ++r) {
    SeedSpec s{SeedSpec{seed}.derive("rep", r)};
    auto rain = coupled_rain(setup, lambda, e.T, s, opt.couple_at);
    HeightPath p;
    if (model == GrowthModel::continuous) {
      auto cfg = setup.rain(std::max(lambda, opt.couple_at), e.T);
      p = continuous_backward(build_dag(rain), rain, origin, e.T, grid, cfg);
    } else {
      p = model5_backward(rain, origin, e.T, grid);
    }
    if (p.truncated) ++e.truncated_reps;
    e.per_rep.push_back(last_half_rate(p));
    finals.push_back(p.H.back() / p.t.back());
  }
  auto sm = stats::summarize(e.per_rep);
  e.kappa_hat = sm.mean;
  e.ci_lo = sm.ci_lo;
  e.ci_hi = sm.ci_hi;
  e.se = sm.se;
  e.final_ratio = stats::mean(finals);
  e.lower_bound = e.truncated_reps > 0;
  return e;
}

struct ScalingReport {
  std::size_t reps = 0;
  std::size_t arrivals = 0;
  std::size_t compared = 0;  // tops plus final heights
  std::size_t violations = 0;
  std::optional<std::uint64_t> witness_id;  // arrival id of the first mismatch
  std::size_t witness_rep = 0;
  bool ok() const { return violations == 0; }
};

// One rain of intensity a on [0, lambda T / a], times multiplied by a / lambda: the
// result is a rain of intensity lambda on [0, T] with the same arrival order, so all
// growth tops must agree bit for bit. Final heights at `probes` are compared too.
template <std::size_t D>
ScalingReport scaling_check(double lambda, double a, double T, std::size_t reps, std::uint64_t seed,
                            const GrowthSetup<D>& setup = {}, const std::vector<Point<D>>& probes = {Point<D>{}}) {
  if (!(a > 0) || !(lambda > 0)) throw ConfigError("scaling_check: need a > 0 and lambda > 0");
  ScalingReport rep;
  rep.reps = reps;
  double stretch = lambda * T / a, factor = a / lambda;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < reps; ++r) {
    SeedSpec s{SeedSpec{seed}.derive("rep", r)};
    RainConfig<D> cfg = setup.rain(a, stretch);
    auto rain_a = sample_rain(cfg, s);
    auto rain_l = rain_a;
    for (auto& x : rain_l) x.t *= factor;
    auto dag_a = build_dag(rain_a);
    auto dag_l = build_dag(rain_l);
    Schedule sa, sl;
    growth_heights(dag_a, rain_a, sa);
    growth_heights(dag_l, rain_l, sl);
    rep.arrivals += rain_a.size();
    auto mismatch = [&](std::uint64_t id) {
      ++rep.violations;
      if (!rep.witness_id) {
        rep.witness_id = id;
        rep.witness_rep = r;
      }
    };
    for (std::size_t j = 0; j < rain_a.size(); ++j) {
      ++rep.compared;
      if (sa.top[j] != sl.top[j]) mismatch(rain_a[j].id);
    }
    for (const auto& x : probes) {
      ++rep.compared;
      if (height_at(dag_a, rain_a, sa, x, inf) != height_at(dag_l, rain_l, sl, x, inf)) mismatch(UINT64_MAX);
    }
  }
  return rep;
}

enum class Verdict { stable, unstable, inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable-evidence";
    case Verdict::unstable: return "unstable-evidence";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

// Loynes profiles (FIFO workload at (x, T) from the arrivals of [T - s, T)) and backward
// growth heights for every s of the schedule, at every probe.
template <std::size_t D>
struct BackwardProfiles {
  std::vector<std::vector<double>> W;  // [probe][schedule index]
  std::vector<std::vector<double>> H;
  bool truncated = false;
};

template <std::size_t D>
BackwardProfiles<D> backward_profiles(const std::vector<Arrival<D>>& rain, const std::vector<Point<D>>& xs,
                                      const std::vector<double>& schedule, const RainConfig<D>& cfg) {
  double T = schedule.back();
  auto dag = build_dag(rain);
  BackwardProfiles<D> out;
  out.W.assign(xs.size(), {});
  out.H.assign(xs.size(), {});
  Schedule s;
  for (double g : schedule) {
    auto first = first_at_or_after(rain, T - g);
    growth_heights(dag, rain, s, first);
    fifo_schedule(dag, rain, s, first);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out.W[i].push_back(workload_at(dag, rain, s, xs[i], T, TimeBound::open));
      out.H[i].push_back(height_at(dag, rain, s, xs[i], T, TimeBound::open));
    }
  }
  auto first = first_at_or_after(rain, 0.0);
  for (const auto& x : xs)
    if (dependency_leaves_window(dag, rain, first, x, T, cfg.lo, cfg.hi)) out.truncated = true;
  return out;
}

// Profile s -> value nondecreasing (Loynes); returns the first offending index.
inline std::optional<std::size_t> first_decrease(const std::vector<double>& profile) {
  for (std::size_t k = 1; k < profile.size(); ++k)
    if (profile[k] < profile[k - 1]) return k;
  return std::nullopt;
}

struct PlateauStats {
  double level = 0.0;     // mean W at the longest span
  double increase = 0.0;  // mean W growth over the last quarter of the schedule
  bool plateau = false;   // increase <= eps * level
};

// Stability bound min(lambda_c, a / kappa(a)) with its spread.
struct StabilityBound {
  double a = 0.0;
  GrowthRateEstimate kappa_a;
  LambdaBracket lambda_c;
  double value = 0.0;
  double lo = 0.0;  // min(lambda_c.lo, a / kappa ci_hi)
  double hi = 0.0;  // min(lambda_c.hi, a / kappa ci_lo)
};

inline StabilityBound make_bound(double a, const GrowthRateEstimate& k, const LambdaBracket& lc) {
  const double inf = std::numeric_limits<double>::infinity();
  auto ratio = [&](double kk) { return kk > 0 ? a / kk : inf; };
  StabilityBound b;
  b.a = a;
  b.kappa_a = k;
  b.lambda_c = lc;
  b.value = std::min(0.5 * (lc.lo + lc.hi), ratio(k.kappa_hat));
  b.lo = std::min(lc.lo, ratio(k.ci_hi));
  b.hi = std::min(lc.hi, ratio(k.ci_lo));
  return b;
}

struct BoundOptions {
  std::vector<std::int64_t> box_sizes{64, 128};
  std::size_t touch_reps = 400;
  double lambda_max = 8.0;
  std::optional<double> a;  // default: midpoint of the subcritical bracket [0, lambda_c.lo]
  double T = 400.0;
  std::size_t reps = 20;
};

template <std::size_t D>
StabilityBound stability_bound(const GrowthSetup<D>& setup, std::uint64_t seed, const BoundOptions& opt = {}) {
  auto lc = estimate_lambda_c<D>(model2_radius_law<D>(setup.shape), opt.box_sizes, SeedSpec{seed}.derive("lambda_c"),
                                 opt.touch_reps, 1e-3, opt.lambda_max);
  double a = opt.a ? *opt.a : 0.5 * lc.lo;
  if (!(a > 0)) throw ConfigError("stability_bound: reference intensity must be > 0");
  auto k = kappa_estimate<D>(a, GrowthModel::continuous, opt.T, opt.reps, SeedSpec{seed}.derive("kappa"), setup);
  return make_bound(a, k, lc);
}

struct StabilityVerdict {
  double lambda = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::vector<double> schedule;
  std::vector<PlateauStats> plateau;                  // per probe
  std::vector<std::vector<stats::Summary>> ratio;     // [probe][schedule index] of H(s)/s
  std::vector<std::vector<double>> W_mean, H_mean;    // [probe][schedule index]
  std::vector<std::vector<double>> W_final, H_final;  // [probe][rep] at the longest span
  std::size_t reps = 0;
  std::size_t truncated_reps = 0;
  std::size_t loynes_violations = 0;
  double min_ratio_ci_lo = 0.0;  // over probes and the last half of the schedule
  std::optional<StabilityBound> bound;
  bool refuted = false;  // unstable below bound.lo, or stable above lambda_c.hi
};

struct ScanOptions {
  std::vector<double> schedule;  // spans, sorted; default exponential_schedule(8, 512)
  std::size_t reps = 20;
  double eps = 0.01;
  std::optional<StabilityBound> bound;
};

// Verdict per lambda from coupled (thinned) samples: stable-evidence when every probe's
// mean Loynes profile grows by at most eps of its level over the last quarter of the
// schedule; unstable-evidence when the CI of H(s)/s stays >= 1 over the last half of
// the schedule at every probe; inconclusive otherwise.
template <std::size_t D>
std::vector<StabilityVerdict> threshold_scan(const std::vector<double>& lambdas, const std::vector<Point<D>>& xs,
                                             std::uint64_t seed, const GrowthSetup<D>& setup = {},
                                             const ScanOptions& opt = {}) {
  setup.validate();
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) throw UsageError("threshold_scan: lambda grid must be sorted");
  if (xs.empty()) throw UsageError("threshold_scan: need at least one probe");
  auto schedule = opt.schedule.empty() ? exponential_schedule(8, 512) : opt.schedule;
  if (!std::is_sorted(schedule.begin(), schedule.end())) throw UsageError("threshold_scan: schedule must be sorted");
  double T = schedule.back(), top = lambdas.empty() ? 0.0 : lambdas.back();
  std::size_t K = schedule.size(), P = xs.size();
  std::size_t q_from = K - std::max<std::size_t>(1, K / 4) - 1;
  if (K < 2) q_from = 0;

  std::vector<StabilityVerdict> out(lambdas.size());
  std::vector<std::vector<std::vector<std::vector<double>>>> ratios(
      lambdas.size(), std::vector<std::vector<std::vector<double>>>(P, std::vector<std::vector<double>>(K)));
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    auto& v = out[l];
    v.lambda = lambdas[l];
    v.schedule = schedule;
    v.reps = opt.reps;
    v.W_mean.assign(P, std::vector<double>(K, 0.0));
    v.H_mean.assign(P, std::vector<double>(K, 0.0));
    v.W_final.assign(P, {});
    v.H_final.assign(P, {});
  }
  auto cfg = setup.rain(top, T);
  for (std::size_t r = 0; r < opt.reps; ++r) {
    SeedSpec s{SeedSpec{seed}.derive("rep", r)};
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      auto& v = out[l];
      auto rain = coupled_rain(setup, lambdas[l], T, s, top);
      auto prof = backward_profiles(rain, xs, schedule, cfg);
      if (prof.truncated) ++v.truncated_reps;
      for (std::size_t i = 0; i < P; ++i) {
        if (first_decrease(prof.W[i])) ++v.loynes_violations;
        for (std::size_t k = 0; k < K; ++k) {
          v.W_mean[i][k] += prof.W[i][k] / static_cast<double>(opt.reps);
          v.H_mean[i][k] += prof.H[i][k] / static_cast<double>(opt.reps);
          ratios[l][i][k].push_back(prof.H[i][k] / schedule[k]);
        }
        v.W_final[i].push_back(prof.W[i].back());
        v.H_final[i].push_back(prof.H[i].back());
      }
    }
  }
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    auto& v = out[l];
    bool all_plateau = true, all_above = true;
    v.min_ratio_ci_lo = std::numeric_limits<double>::infinity();
    v.ratio.assign(P, {});
    for (std::size_t i = 0; i < P; ++i) {
      PlateauStats ps;
      ps.level = v.W_mean[i].back();
      ps.increase = ps.level - v.W_mean[i][q_from];
      ps.plateau = ps.increase <= opt.eps * ps.level;
      all_plateau = all_plateau && ps.plateau;
      v.plateau.push_back(ps);
      for (std::size_t k = 0; k < K; ++k) {
        v.ratio[i].push_back(stats::summarize(ratios[l][i][k]));
        if (schedule[k] >= T / 2) {
          v.min_ratio_ci_lo = std::min(v.min_ratio_ci_lo, v.ratio[i][k].ci_lo);
          if (!(v.ratio[i][k].ci_lo >= 1.0)) all_above = false;
        }
      }
    }
    if (all_above) v.verdict = Verdict::unstable;
    else if (all_plateau) v.verdict = Verdict::stable;
    v.bound = opt.bound;
    if (v.bound)
      v.refuted = (v.verdict == Verdict::unstable && v.lambda < v.bound->lo) ||
                  (v.verdict == Verdict::stable && v.lambda > v.bound->lambda_c.hi);
  }
  return out;
}

struct PercolationSnapshot {
  double t = 0.0;
  std::size_t present = 0;  // arrivals with t_j <= t < done_j
  std::size_t components = 0;
  std::size_t largest = 0;
  double largest_fraction = 0.0;  // largest / present
  double density = 0.0;           // present per unit volume of the window
  std::map<std::size_t, std::size_t> histogram;  // component size -> count
};

struct PercolationReport {
  double lambda = 0.0;
  double window = 0.0;
  double burn_in = 0.0;
  double volume = 0.0;
  std::vector<PercolationSnapshot> snapshots;
};

// Components of the intersection graph of the customers in the system at each snapshot.
template <std::size_t D>
PercolationSnapshot percolation_snapshot(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& rain,
                                         const Schedule& s, double t, double volume) {
  PercolationSnapshot snap;
  snap.t = t;
  std::vector<std::size_t> present;
  std::vector<std::size_t> slot(rain.size(), SIZE_MAX);
  for (std::size_t j = 0; j < rain.size() && rain[j].t <= t; ++j)
    if (s.done[j] > t) {
      slot[j] = present.size();
      present.push_back(j);
    }
  UnionFind uf(present.size());
  for (auto j : present)
    for (auto i : dag.pred(j))
      if (slot[i] != SIZE_MAX) uf.unite(slot[i], slot[j]);
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t k = 0; k < present.size(); ++k) ++sizes[uf.find(k)];
  for (auto& [root, n] : sizes) {
    ++snap.histogram[n];
    snap.largest = std::max(snap.largest, n);
  }
  snap.present = present.size();
  snap.components = sizes.size();
  snap.largest_fraction = snap.present ? static_cast<double>(snap.largest) / static_cast<double>(snap.present) : 0.0;
  snap.density = static_cast<double>(snap.present) / volume;
  return snap;
}

template <std::size_t D>
PercolationReport percolation_probe(double lambda, const std::vector<double>& snapshots, double window,
                                    std::uint64_t seed, const GrowthSetup<D>& base = {}, double burn_in = 0.0,
                                    double couple_at = 0.0) {
  if (snapshots.empty()) throw UsageError("percolation_probe: need snapshot times");
  if (!std::is_sorted(snapshots.begin(), snapshots.end()) || snapshots.front() < burn_in)
    throw UsageError("percolation_probe: snapshots must be sorted and after burn-in");
  auto setup = base;
  setup.window = window;
  double T = snapshots.back() + 1.0;
  auto rain = coupled_rain(setup, lambda, T, SeedSpec{seed}, couple_at);
  auto dag = build_dag(rain);
  Schedule s;
  fifo_schedule(dag, rain, s);
  PercolationReport rep;
  rep.lambda = lambda;
  rep.window = window;
  rep.burn_in = burn_in;
  auto cfg = setup.rain(std::max(lambda, couple_at), T);
  rep.volume = 1.0;
  for (std::size_t k = 0; k < D; ++k) rep.volume *= cfg.hi[k] - cfg.lo[k] + 2 * cfg.effective_pad();
  for (double t : snapshots) rep.snapshots.push_back(percolation_snapshot(dag, rain, s, t, rep.volume));
  return rep;
}

inline void write_kappa_csv_header(std::ostream& os) { os << "lambda,model,T,reps,kappa_hat,ci_lo,ci_hi,se,lower_bound\n"; }

inline void write_kappa_csv(std::ostream& os, const GrowthRateEstimate& e) {
  CsvRow row;
  row << e.lambda << model_name(e.model) << e.T << e.reps << e.kappa_hat << e.ci_lo << e.ci_hi << e.se
      << (e.lower_bound ? 1 : 0);
  os << row.str() << '\n';
}

inline void write_sweep_csv_header(std::ostream& os) {
  os << "lambda,T,x,W_hat,H_hat,kappa_hat,ci_lo,ci_hi,verdict,rep\n";
}

// One row per (lambda, replication) at the longest span and the first probe; the CI
// columns and verdict are the lambda-level values.
template <std::size_t D>
void write_sweep_csv(std::ostream& os, const StabilityVerdict& v, const Point<D>& x0) {
  double T = v.schedule.back();
  const auto& last = v.ratio.front().back();
  for (std::size_t r = 0; r < v.W_final.front().size(); ++r) {
    CsvRow row;
    row << v.lambda << T << x0[0] << v.W_final.front()[r] << v.H_final.front()[r] << v.H_final.front()[r] / T
        << last.ci_lo << last.ci_hi << verdict_name(v.verdict) << static_cast<std::uint64_t>(r);
    os << row.str() << '\n';
  }
}

inline void write_profile_csv_header(std::ostream& os) { os << "lambda,s,probe,W_mean,H_mean,ratio_ci_lo,ratio_ci_hi\n"; }

inline void write_profile_csv(std::ostream& os, const StabilityVerdict& v) {
  for (std::size_t i = 0; i < v.W_mean.size(); ++i)
    for (std::size_t k = 0; k < v.schedule.size(); ++k) {
      CsvRow row;
      row << v.lambda << v.schedule[k] << static_cast<std::uint64_t>(i) << v.W_mean[i][k] << v.H_mean[i][k]
          << v.ratio[i][k].ci_lo << v.ratio[i][k].ci_hi;
      os << row.str() << '\n';
    }
}

inline void write_percolation_csv(std::ostream& os, const PercolationReport& r) {
  os << "lambda,t,present,components,largest,largest_fraction,density\n";
  for (auto& s : r.snapshots) {
    CsvRow row;
    row << r.lambda << s.t << static_cast<std::uint64_t>(s.present) << static_cast<std::uint64_t>(s.components)
        << static_cast<std::uint64_t>(s.largest) << s.largest_fraction << s.density;
    os << row.str() << '\n';
  }
}

}  // namespace phail
