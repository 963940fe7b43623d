#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "geometry.hpp"
#include "rain.hpp"
#include "spatial_hash.hpp"

namespace phail {

template <std::size_t D>
struct QueryPoint {
  Point<D> x{};
  double t = 0.0;
};

// Which arrivals count as present at a query time: t_j <= t (closed) or t_j < t (open).
enum class TimeBound { closed, open };

template <std::size_t D>
class PrecedenceDag {
 public:
  PrecedenceDag() = default;

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::span<const std::uint32_t> pred(std::size_t j) const {
    return {preds_.data() + offsets_[j], preds_.data() + offsets_[j + 1]};
  }
  std::size_t edge_count() const { return preds_.size(); }
  const SpatialHash<D>& index() const { return index_; }

  template <std::size_t E>
  friend PrecedenceDag<E> build_dag(const std::vector<Arrival<E>>& arrivals);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> preds_;  // ascending within each node
  SpatialHash<D> index_;
};

// pred(j) = { i < j : footprint(i) meets footprint(j) }.
template <std::size_t D>
PrecedenceDag<D> build_dag(const std::vector<Arrival<D>>& arrivals) {
  check_sorted(arrivals);
  if (arrivals.size() >= UINT32_MAX) throw CapacityError("build_dag: too many arrivals");
  double cell = 0.0;
  for (const auto& a : arrivals)
    for (double h : half_widths(a.shape)) cell = std::max(cell, 2 * h);
  PrecedenceDag<D> dag;
  dag.index_ = SpatialHash<D>(cell > 0 ? cell : 1.0);
  dag.offsets_.assign(1, 0);
  std::vector<std::size_t> stamp(arrivals.size(), SIZE_MAX);
  std::vector<std::uint32_t> found;
  for (std::size_t j = 0; j < arrivals.size(); ++j) {
    const auto& a = arrivals[j];
    auto h = half_widths(a.shape);
    Point<D> lo, hi;
    for (std::size_t k = 0; k < D; ++k) {
      lo[k] = a.x[k] - h[k];
      hi[k] = a.x[k] + h[k];
    }
    found.clear();
    dag.index_.for_cells(lo, hi, [&](const auto& key) {
      if (auto b = dag.index_.bucket(key))
        for (auto i : *b) {
          if (stamp[i] == j) continue;
          stamp[i] = j;
          if (intersects(arrivals[i].shape, arrivals[i].x, a.shape, a.x)) found.push_back(i);
        }
    });
    std::sort(found.begin(), found.end());
    dag.preds_.insert(dag.preds_.end(), found.begin(), found.end());
    dag.offsets_.push_back(dag.preds_.size());
    dag.index_.insert(lo, hi, static_cast<std::uint32_t>(j));
  }
  return dag;
}

struct Schedule {
  std::size_t first = 0;  // arrivals before `first` are ignored (suffix evaluation)
  std::vector<double> base, top, start, done;
};

// Growth model: base_j = max top over pred (0 if none), top_j = base_j + sigma_j.
template <std::size_t D>
void growth_heights(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals, Schedule& s,
                    std::size_t first = 0) {
  std::size_t n = arrivals.size();
  s.first = first;
  s.base.assign(n, 0.0);
  s.top.assign(n, 0.0);
  for (std::size_t j = first; j < n; ++j) {
    double b = 0.0;
    for (auto i : dag.pred(j))
      if (i >= first) b = std::max(b, s.top[i]);
    s.base[j] = b;
    s.top[j] = b + arrivals[j].sigma;
  }
}

// FIFO hard exclusion: start_j = max(t_j, max done over pred), done_j = start_j + sigma_j.
template <std::size_t D>
void fifo_schedule(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals, Schedule& s,
                   std::size_t first = 0) {
  std::size_t n = arrivals.size();
  s.first = first;
  s.start.assign(n, 0.0);
  s.done.assign(n, 0.0);
  for (std::size_t j = first; j < n; ++j) {
    double st = arrivals[j].t;
    for (auto i : dag.pred(j))
      if (i >= first) st = std::max(st, s.done[i]);
    s.start[j] = st;
    s.done[j] = st + arrivals[j].sigma;
  }
}

template <std::size_t D>
Schedule evaluate(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals, std::size_t first = 0) {
  Schedule s;
  growth_heights(dag, arrivals, s, first);
  fifo_schedule(dag, arrivals, s, first);
  return s;
}

// Calls f(j) for every arrival j >= first whose footprint contains x and is present at t.
template <std::size_t D, class F>
void for_covering(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals, const Point<D>& x, double t,
                  TimeBound bound, std::size_t first, F&& f) {
  auto b = dag.index().bucket_at(x);
  if (!b) return;
  for (auto j : *b) {
    if (j < first) continue;
    const auto& a = arrivals[j];
    bool present = bound == TimeBound::closed ? a.t <= t : a.t < t;
    if (present && contains(a.shape, a.x, x)) f(j);
  }
}

// H_t^x: top of the last arrival covering x by time t (0 if none).
template <std::size_t D>
double height_at(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals, const Schedule& s,
                 const Point<D>& x, double t, TimeBound bound = TimeBound::closed) {
  double h = 0.0;
  for_covering(dag, arrivals, x, t, bound, s.first, [&](std::size_t j) { h = std::max(h, s.top[j]); });
  return h;
}

// W_t^x: residual FIFO work at x at time t (0 if none).
template <std::size_t D>
double workload_at(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals, const Schedule& s,
                   const Point<D>& x, double t, TimeBound bound = TimeBound::closed) {
  double w = 0.0;
  for_covering(dag, arrivals, x, t, bound, s.first, [&](std::size_t j) { w = std::max(w, s.done[j] - t); });
  return w;
}

// Index of the first arrival with t_j >= -s.
template <std::size_t D>
std::size_t suffix_start(const std::vector<Arrival<D>>& arrivals, double s) {
  auto it = std::lower_bound(arrivals.begin(), arrivals.end(), -s,
                             [](const Arrival<D>& a, double v) { return a.t < v; });
  return static_cast<std::size_t>(it - arrivals.begin());
}

// Backward (Loynes) workload at x and time 0 when only arrivals in [-s, 0] are kept,
// for every s in `grid`. Arrivals are expected on [-T, 0].
template <std::size_t D>
std::vector<double> loynes_profile(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals,
                                   const Point<D>& x, const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  Schedule s;
  for (double g : grid) {
    fifo_schedule(dag, arrivals, s, suffix_start(arrivals, g));
    out.push_back(workload_at(dag, arrivals, s, x, 0.0));
  }
  return out;
}

template <std::size_t D>
std::vector<double> loynes_profile(const std::vector<Arrival<D>>& arrivals, const Point<D>& x,
                                   const std::vector<double>& grid) {
  return loynes_profile(build_dag(arrivals), arrivals, x, grid);
}

// Backward growth height at x and time 0 with input restricted to [-s, 0].
template <std::size_t D>
std::vector<double> backward_heights(const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals,
                                     const Point<D>& x, const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  Schedule s;
  for (double g : grid) {
    growth_heights(dag, arrivals, s, suffix_start(arrivals, g));
    out.push_back(height_at(dag, arrivals, s, x, 0.0));
  }
  return out;
}

enum class Perturbation { superset, earlier_times, enlarged_marks };

template <std::size_t D>
struct MonotonicityReport {
  bool ok = true;
  std::optional<QueryPoint<D>> witness;
  std::string quantity;  // "H" or "W" at the witness
  double base_value = 0.0;
  double perturbed_value = 0.0;
};

namespace detail {
template <std::size_t D>
bool same_geometry(const Arrival<D>& a, const Arrival<D>& b) {
  return a.x == b.x && a.shape == b.shape;
}

template <std::size_t D>
void check_relation(const std::vector<Arrival<D>>& base, const std::vector<Arrival<D>>& pert, Perturbation rel) {
  auto fail = [](const std::string& m) { throw UsageError("monotonicity_check: " + m); };
  if (rel == Perturbation::superset) {
    std::size_t k = 0;
    for (const auto& a : base) {
      while (k < pert.size() && pert[k].id != a.id) ++k;
      if (k == pert.size()) fail("perturbed input is not a superset (missing id " + std::to_string(a.id) + ")");
      const auto& b = pert[k];
      if (b.t != a.t || !same_geometry(a, b) || b.sigma != a.sigma) fail("superset member changed");
    }
    return;
  }
  if (base.size() != pert.size()) fail("arrival sets differ in size");
  for (std::size_t j = 0; j < base.size(); ++j) {
    const auto& a = base[j];
    const auto& b = pert[j];
    if (a.id != b.id) fail("arrival order differs");
    if (rel == Perturbation::earlier_times) {
      if (!(b.t <= a.t) || !same_geometry(a, b) || b.sigma != a.sigma) fail("not an advancement of times");
    } else {
      if (b.t != a.t || b.x != a.x || !(b.sigma >= a.sigma) || !shape_within(a.shape, a.x, b.shape, b.x))
        fail("not an enlargement of marks");
    }
  }
}
}  // namespace detail

// Randomized harness for the three monotonicity properties: the perturbed input must
// give pointwise larger heights (and, for supersets, larger workloads) at every query.
// Advanced times must keep the arrival order; a reorder can lower heights.
template <std::size_t D>
MonotonicityReport<D> monotonicity_check(const std::vector<Arrival<D>>& base, const std::vector<Arrival<D>>& pert,
                                         Perturbation rel, const std::vector<QueryPoint<D>>& queries) {
  check_sorted(base);
  check_sorted(pert);
  detail::check_relation(base, pert, rel);
  auto dag_a = build_dag(base);
  auto dag_b = build_dag(pert);
  auto sa = evaluate(dag_a, base);
  auto sb = evaluate(dag_b, pert);
  MonotonicityReport<D> r;
  for (const auto& q : queries) {
    double ha = height_at(dag_a, base, sa, q.x, q.t), hb = height_at(dag_b, pert, sb, q.x, q.t);
    if (hb < ha) return {false, q, "H", ha, hb};
    if (rel == Perturbation::superset) {
      double wa = workload_at(dag_a, base, sa, q.x, q.t), wb = workload_at(dag_b, pert, sb, q.x, q.t);
      if (wb < wa) return {false, q, "W", wa, wb};
    }
  }
  return r;
}

template <std::size_t D>
void write_schedule_csv(std::ostream& os, const std::vector<Arrival<D>>& arrivals, const Schedule& s) {
  os << "id,t,base,top,start,done\n";
  for (std::size_t j = s.first; j < arrivals.size(); ++j) {
    CsvRow row;
    row << arrivals[j].id << arrivals[j].t << s.base[j] << s.top[j] << s.start[j] << s.done[j];
    os << row.str() << '\n';
  }
}

template <std::size_t D>
void write_queries_csv(std::ostream& os, const PrecedenceDag<D>& dag, const std::vector<Arrival<D>>& arrivals,
                       const Schedule& s, const std::vector<QueryPoint<D>>& queries) {
  CsvRow head;
  for (std::size_t k = 1; k <= D; ++k) head << "x" + std::to_string(k);
  head << "t" << "H" << "W";
  os << head.str() << '\n';
  for (const auto& q : queries) {
    CsvRow row;
    for (double v : q.x) row << v;
    row << q.t << height_at(dag, arrivals, s, q.x, q.t) << workload_at(dag, arrivals, s, q.x, q.t);
    os << row.str() << '\n';
  }
}

}  // namespace phail
