#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "clumps.hpp"
#include "format.hpp"
#include "geometry.hpp"
#include "lattice.hpp"
#include "precedence.hpp"
#include "rain.hpp"

namespace phail {

template <std::size_t D>
struct LatticeArrival {
  std::uint64_t id = 0;
  Site<D> z{};
  std::int64_t slot = 0;    // n: the arrival belongs to [n-1, n)
  double time = 0.0;        // epoch used by the model (continuous t, or n-1 after re-timing)
  std::int64_t half_side = 1;
  double sigma = 0.0;
  double tie_rank = 0.0;    // original continuous time
};

template <std::size_t D>
struct AggregatedCell {
  Site<D> z{};
  std::int64_t slot = 0;
  std::int64_t r_max = 0;
  double sigma_sum = 0.0;
  std::uint32_t count = 0;
};

template <std::size_t D>
Site<D> floor_site(const Point<D>& x) {
  Site<D> z;
  for (std::size_t k = 0; k < D; ++k) z[k] = static_cast<std::int64_t>(std::floor(x[k]));
  return z;
}

inline std::int64_t slot_of(double t) { return static_cast<std::int64_t>(std::floor(t)) + 1; }

// Space discretization: cube of half side floor(diameter) + 1 centred at floor(x).
template <std::size_t D>
std::vector<LatticeArrival<D>> to_model2(const std::vector<Arrival<D>>& arrivals) {
  std::vector<LatticeArrival<D>> out;
  out.reserve(arrivals.size());
  for (const auto& a : arrivals) {
    LatticeArrival<D> l;
    l.id = a.id;
    l.z = floor_site(a.x);
    l.slot = slot_of(a.t);
    l.time = a.t;
    l.half_side = static_cast<std::int64_t>(std::floor(diameter(a.shape))) + 1;
    l.sigma = a.sigma;
    l.tie_rank = a.t;
    out.push_back(l);
  }
  return out;
}

// Every point y of the footprint has floor(y) inside the lattice cube, i.e. the
// footprint lies in [z - R, z + R + 1)^d.
template <std::size_t D>
bool footprint_in_lattice_cube(const Arrival<D>& a, const LatticeArrival<D>& l) {
  auto h = half_widths(a.shape);
  for (std::size_t k = 0; k < D; ++k) {
    double lo = static_cast<double>(l.z[k] - l.half_side), hi = static_cast<double>(l.z[k] + l.half_side + 1);
    if (a.x[k] - h[k] < lo || !(a.x[k] + h[k] < hi)) return false;
  }
  return true;
}

// Time discretization: arrivals of [n-1, n) all arrive at n-1, continuous order kept.
template <std::size_t D>
std::vector<LatticeArrival<D>> to_model3(std::vector<LatticeArrival<D>> in) {
  for (auto& l : in) l.time = static_cast<double>(l.slot - 1);
  std::stable_sort(in.begin(), in.end(), [](const LatticeArrival<D>& a, const LatticeArrival<D>& b) {
    return a.time < b.time || (a.time == b.time && a.tie_rank < b.tie_rank);
  });
  return in;
}

// One cell per occupied (z, n): largest half side and total height.
template <std::size_t D>
std::vector<AggregatedCell<D>> to_model4(const std::vector<LatticeArrival<D>>& model3) {
  std::map<std::pair<std::int64_t, Site<D>>, AggregatedCell<D>> cells;
  for (const auto& l : model3) {
    auto& c = cells[{l.slot, l.z}];
    c.z = l.z;
    c.slot = l.slot;
    c.r_max = std::max(c.r_max, l.half_side);
    c.sigma_sum += l.sigma;
    ++c.count;
  }
  std::vector<AggregatedCell<D>> out;
  out.reserve(cells.size());
  for (auto& [k, c] : cells) out.push_back(c);
  return out;
}

// Model 3 with every cube enlarged to its cell's largest half side; heights stay
// individual so the per-sample order Model 3 <= this <= Boolean Model 5 holds.
template <std::size_t D>
std::vector<LatticeArrival<D>> lift_to_cells(std::vector<LatticeArrival<D>> model3,
                                             const std::vector<AggregatedCell<D>>& cells) {
  std::map<std::pair<std::int64_t, Site<D>>, std::int64_t> rmax;
  for (auto& c : cells) rmax[{c.slot, c.z}] = c.r_max;
  for (auto& l : model3) l.half_side = rmax.at({l.slot, l.z});
  return model3;
}

// Lattice cubes as continuum arrivals centred on integer points.
template <std::size_t D>
std::vector<Arrival<D>> as_arrivals(const std::vector<LatticeArrival<D>>& in) {
  std::vector<Arrival<D>> out;
  out.reserve(in.size());
  for (const auto& l : in) {
    Arrival<D> a;
    a.id = l.id;
    a.t = l.time;
    for (std::size_t k = 0; k < D; ++k) a.x[k] = static_cast<double>(l.z[k]);
    a.shape = Cube{static_cast<double>(l.half_side)};
    a.sigma = l.sigma;
    out.push_back(a);
  }
  return out;
}

template <std::size_t D>
LatticeRegion<D> cell_region(const std::vector<AggregatedCell<D>>& cells, const std::vector<Site<D>>& extra,
                             std::int64_t margin = 1) {
  LatticeRegion<D> r;
  r.lo.fill(std::numeric_limits<std::int64_t>::max());
  r.hi.fill(std::numeric_limits<std::int64_t>::min());
  auto grow = [&](const Site<D>& z, std::int64_t rad) {
    for (std::size_t k = 0; k < D; ++k) {
      r.lo[k] = std::min(r.lo[k], z[k] - rad - margin);
      r.hi[k] = std::max(r.hi[k], z[k] + rad + margin);
    }
  };
  for (auto& c : cells) grow(c.z, c.r_max);
  for (auto& z : extra) grow(z, 0);
  if (cells.empty() && extra.empty()) {
    r.lo.fill(0);
    r.hi.fill(0);
  }
  return r;
}

// Boolean Model 5 slot fields built from aggregated cells, for slots first..last.
template <std::size_t D>
std::vector<LatticeSlotField<D>> cell_fields(const std::vector<AggregatedCell<D>>& cells,
                                             const LatticeRegion<D>& region, std::int64_t first, std::int64_t last) {
  std::vector<LatticeSlotField<D>> fields;
  for (std::int64_t n = first; n <= last; ++n) fields.emplace_back(region);
  for (auto& c : cells) {
    if (c.slot < first || c.slot > last) continue;
    fields[static_cast<std::size_t>(c.slot - first)].set(c.z, static_cast<int>(c.r_max), c.sigma_sum);
  }
  return fields;
}

template <std::size_t D>
struct ChainReport {
  std::vector<std::array<double, 5>> values;  // Models 1..5 per query
  std::array<double, 4> min_margin{};         // min over queries of H_{k+1} - H_k
  std::size_t violations = 0;
  std::optional<std::size_t> witness;          // first violating query
  int witness_link = -1;                       // k such that Model k+1 > Model k+2 at the witness
  bool ok() const { return violations == 0; }
};

// Tolerance for comparing sums of the same heights accumulated in different orders.
inline double reassociation_slack(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

// Evaluate Models 1-5 on one rain sample at every query (x, t): Model 1 at x, the
// lattice models at floor(x), Model 5 after slot ceil(t). Arrivals count when t_j < t.
template <std::size_t D>
ChainReport<D> chain_check(const std::vector<Arrival<D>>& rain, const std::vector<QueryPoint<D>>& queries) {
  auto m2 = to_model2(rain);
  auto m3 = to_model3(m2);
  auto cells = to_model4(m3);
  auto m4 = lift_to_cells(m3, cells);
  std::array<std::vector<Arrival<D>>, 4> inputs{rain, as_arrivals(m2), as_arrivals(m3), as_arrivals(m4)};
  std::array<PrecedenceDag<D>, 4> dags;
  std::array<Schedule, 4> sched;
  for (int m = 0; m < 4; ++m) {
    dags[m] = build_dag(inputs[m]);
    growth_heights(dags[m], inputs[m], sched[m]);
  }
  std::vector<Site<D>> qsites;
  std::int64_t last = 0, first = 1;
  for (auto& q : queries) {
    qsites.push_back(floor_site(q.x));
    last = std::max(last, static_cast<std::int64_t>(std::ceil(q.t)));
  }
  for (auto& c : cells) first = std::min(first, c.slot);
  auto region = cell_region(cells, qsites);
  auto fields = cell_fields(cells, region, first, last);
  auto rows = iterate_model5(fields);

  ChainReport<D> r;
  r.min_margin.fill(std::numeric_limits<double>::infinity());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    Point<D> zc;
    for (std::size_t k = 0; k < D; ++k) zc[k] = static_cast<double>(qsites[qi][k]);
    std::array<double, 5> v{};
    v[0] = height_at(dags[0], inputs[0], sched[0], q.x, q.t, TimeBound::open);
    for (int m = 1; m < 4; ++m) v[m] = height_at(dags[m], inputs[m], sched[m], zc, q.t, TimeBound::open);
    auto n = static_cast<std::int64_t>(std::ceil(q.t));
    v[4] = n < first ? 0.0 : rows[static_cast<std::size_t>(n - first)][region.index(qsites[qi])];
    for (int k = 0; k < 4; ++k) {
      double margin = v[k + 1] - v[k];
      r.min_margin[k] = std::min(r.min_margin[k], margin);
      if (margin < -reassociation_slack(v[k])) {
        ++r.violations;
        if (!r.witness) {
          r.witness = qi;
          r.witness_link = k;
        }
      }
    }
    r.values.push_back(v);
  }
  return r;
}

// Lattice points of the window plus `per_cell` uniform points in every unit cell;
// lattice points are queried at each integer time in [1, T], the rest at uniform times.
template <std::size_t D>
std::vector<QueryPoint<D>> chain_query_grid(const Site<D>& lo, const Site<D>& hi, double T, int per_cell,
                                            std::uint64_t seed) {
  std::vector<QueryPoint<D>> q;
  LatticeRegion<D> lat{lo, hi};
  SplitMix64 g(seed);
  lat.for_each([&](std::size_t, const Site<D>& z) {
    Point<D> x;
    for (std::size_t k = 0; k < D; ++k) x[k] = static_cast<double>(z[k]);
    for (int t = 1; t <= static_cast<int>(T); ++t) q.push_back({x, static_cast<double>(t)});
    bool interior = true;
    for (std::size_t k = 0; k < D; ++k) interior = interior && z[k] < hi[k];
    if (!interior) return;
    for (int c = 0; c < per_cell; ++c) {
      Point<D> y;
      for (std::size_t k = 0; k < D; ++k) y[k] = x[k] + uniform01(g);
      q.push_back({y, T * uniform01(g)});
    }
  });
  return q;
}

template <std::size_t D>
void write_lattice_csv(std::ostream& os, const std::vector<LatticeArrival<D>>& in) {
  CsvRow h;
  for (std::size_t k = 1; k <= D; ++k) h << "z" + std::to_string(k);
  h << "n" << "half_side" << "sigma" << "tie_rank";
  os << h.str() << '\n';
  for (auto& l : in) {
    CsvRow row;
    for (auto v : l.z) row << static_cast<long long>(v);
    row << static_cast<long long>(l.slot) << static_cast<long long>(l.half_side) << l.sigma << l.tie_rank;
    os << row.str() << '\n';
  }
}

}  // namespace phail
