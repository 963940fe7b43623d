#pragma once

// Batch driver behind the `phail` CLI. Needs libcrypto (SHA-256 of outputs).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <boost/version.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "branching.hpp"
#include "clumps.hpp"
#include "config.hpp"
#include "discretize.hpp"
#include "format.hpp"
#include "grid.hpp"
#include "precedence.hpp"
#include "rain.hpp"
#include "rain_io.hpp"
#include "stability.hpp"
#include "stats.hpp"

namespace phail::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;
using config::ExperimentConfig;
using config::Reader;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kCapacity = 3 };

struct Table {
  std::string name;  // file stem
  std::string csv;
  bool partial = false;
};

struct SeedEntry {
  std::string label;
  std::size_t cell = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
};

struct CellOutput {
  std::vector<Table> tables;
  std::map<std::string, std::vector<double>> metrics;  // per replication
  std::vector<SeedEntry> seeds;
  json summary = json::object();
  std::optional<std::string> capacity_error;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write " + p.string());
  out << data;
}

inline std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// PHAIL_WORKERS, else the hardware thread count.
inline std::size_t worker_count() {
  if (const char* v = std::getenv("PHAIL_WORKERS")) {
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) throw ConfigError("PHAIL_WORKERS must be a positive integer");
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// f(i) for i in [0, n) on up to `workers` threads. The exception of the lowest
// failing index is rethrown after all threads joined.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t w = std::min(std::max<std::size_t>(1, workers), n);
  if (w <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class F>
decltype(auto) with_dim(std::size_t d, F&& f) {
  switch (d) {
    case 1: return f(std::integral_constant<std::size_t, 1>{});
    case 2: return f(std::integral_constant<std::size_t, 2>{});
    case 3: return f(std::integral_constant<std::size_t, 3>{});
  }
  throw ConfigError("dimension must be 1, 2 or 3");
}

inline std::uint64_t cell_seed(const ExperimentConfig& c, std::size_t cell) {
  return SeedSpec{c.seed}.derive("experiment:" + c.kind, cell);
}

inline std::uint64_t rep_seed(std::uint64_t cell, std::size_t rep) { return SeedSpec{cell}.derive("rep", rep); }

inline std::string rep_name(const std::string& stem, std::size_t rep, std::size_t reps) {
  return reps > 1 ? stem + "_r" + std::to_string(rep) : stem;
}

struct RepOutput {
  std::vector<Table> tables;
  std::map<std::string, double> metrics;
  std::optional<std::string> capacity_error;
};

// Replications on the worker pool, folded back in replication order.
template <class F>
CellOutput run_reps(std::size_t reps, std::size_t cell, std::uint64_t cseed, std::size_t workers, F&& f) {
  std::vector<RepOutput> outs(reps);
  parallel_for(reps, workers, [&](std::size_t r) { outs[r] = f(r, rep_seed(cseed, r)); });
  CellOutput c;
  for (std::size_t r = 0; r < reps; ++r) {
    c.seeds.push_back({"rep", cell, r, rep_seed(cseed, r)});
    for (auto& t : outs[r].tables) {
      t.name = rep_name(t.name, r, reps);
      c.tables.push_back(std::move(t));
    }
    for (auto& [k, v] : outs[r].metrics) c.metrics[k].push_back(v);
    if (outs[r].capacity_error && !c.capacity_error)
      c.capacity_error = "replication " + std::to_string(r) + ": " + *outs[r].capacity_error;
  }
  return c;
}

template <class W>
std::string to_csv(W&& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

// ---- kind: rain / continuous / chain --------------------------------------

struct RainParams {
  config::RainSpec rain;
  std::size_t queries = 100;
  std::size_t per_cell = 1;
  std::optional<std::vector<std::vector<double>>> loynes_probes;
  std::vector<double> loynes_schedule;
};

inline RainParams parse_rain_params(const std::string& kind, const json& params, std::size_t dim) {
  Reader r(params, "params");
  RainParams p;
  p.rain = config::parse_rain(r, dim);
  if (kind == "continuous") {
    p.queries = r.count("queries", 100, 0);
    if (r.has("loynes")) {
      auto l = r.child("loynes");
      p.loynes_probes = l.points("probes", dim);
      p.loynes_schedule = l.numbers("schedule");
      l.done();
      if (p.loynes_schedule.empty() || !std::is_sorted(p.loynes_schedule.begin(), p.loynes_schedule.end()))
        throw ConfigError("params.loynes.schedule must be a nonempty sorted list");
    }
  }
  if (kind == "chain") {
    p.per_cell = r.count("queries_per_cell", 1, 0);
    if (p.rain.t0 != 0.0) throw ConfigError("params.t0 must be 0 for the chain experiment");
  }
  r.done();
  with_dim(dim, [&](auto d) {
    p.rain.to_config<decltype(d)::value>().validate();
    return 0;
  });
  return p;
}

template <std::size_t D>
std::vector<Arrival<D>> draw_rain(const config::RainSpec& spec, std::uint64_t seed) {
  SeedSpec s{seed};
  auto rain = sample_rain(spec.to_config<D>(), s);
  if (spec.couple_at > spec.lambda) rain = thin(rain, spec.lambda / spec.couple_at, s.derive("thin"));
  return rain;
}

template <std::size_t D>
RepOutput rain_rep(const std::string& kind, const RainParams& p, std::uint64_t seed) {
  RepOutput out;
  auto rain = draw_rain<D>(p.rain, seed);
  out.metrics["arrivals"] = static_cast<double>(rain.size());
  if (kind == "rain") {
    out.tables.push_back({"arrivals", to_csv([&](std::ostream& os) { write_arrivals_csv(os, rain); })});
    return out;
  }
  auto dag = build_dag(rain);
  if (kind == "continuous") {
    auto sched = evaluate(dag, rain);
    Engine eng = SeedSpec{seed}.engine("queries");
    auto cfg = p.rain.to_config<D>();
    std::vector<QueryPoint<D>> qs(p.queries);
    for (auto& q : qs) {
      for (std::size_t k = 0; k < D; ++k) q.x[k] = cfg.lo[k] + (cfg.hi[k] - cfg.lo[k]) * uniform01(eng);
      q.t = cfg.t0 + (cfg.t1 - cfg.t0) * uniform01(eng);
    }
    double sh = 0.0, sw = 0.0;
    for (auto& q : qs) {
      sh += height_at(dag, rain, sched, q.x, q.t);
      sw += workload_at(dag, rain, sched, q.x, q.t);
    }
    double n = qs.empty() ? 1.0 : static_cast<double>(qs.size());
    out.metrics["mean_H"] = sh / n;
    out.metrics["mean_W"] = sw / n;
    out.tables.push_back({"schedule", to_csv([&](std::ostream& os) { write_schedule_csv(os, rain, sched); })});
    out.tables.push_back({"queries", to_csv([&](std::ostream& os) { write_queries_csv(os, dag, rain, sched, qs); })});
    if (p.loynes_probes) {
      // Workload at (x, t1) using the arrivals of [t1 - s, t1).
      std::ostringstream os;
      os << "s,probe,W\n";
      Schedule s;
      for (double g : p.loynes_schedule) {
        fifo_schedule(dag, rain, s, first_at_or_after(rain, cfg.t1 - g));
        for (std::size_t i = 0; i < p.loynes_probes->size(); ++i) {
          Point<D> x;
          for (std::size_t k = 0; k < D; ++k) x[k] = (*p.loynes_probes)[i][k];
          CsvRow row;
          row << g << static_cast<std::uint64_t>(i) << workload_at(dag, rain, s, x, cfg.t1, TimeBound::open);
          os << row.str() << '\n';
        }
      }
      out.tables.push_back({"loynes", os.str()});
    }
    return out;
  }
  // chain
  Site<D> lo, hi;
  for (std::size_t k = 0; k < D; ++k) {
    lo[k] = static_cast<std::int64_t>(std::floor(p.rain.lo[k]));
    hi[k] = static_cast<std::int64_t>(std::floor(p.rain.hi[k]));
  }
  auto qs = chain_query_grid<D>(lo, hi, p.rain.t1, static_cast<int>(p.per_cell), SeedSpec{seed}.derive("queries"));
  auto rep = chain_check(rain, qs);
  out.metrics["violations"] = static_cast<double>(rep.violations);
  out.metrics["queries"] = static_cast<double>(qs.size());
  std::ostringstream os;
  CsvRow head;
  head << "q";
  for (std::size_t k = 1; k <= D; ++k) head << "x" + std::to_string(k);
  head << "t" << "m1" << "m2" << "m3" << "m4" << "m5";
  os << head.str() << '\n';
  for (std::size_t i = 0; i < qs.size(); ++i) {
    CsvRow row;
    row << static_cast<std::uint64_t>(i);
    for (double v : qs[i].x) row << v;
    row << qs[i].t;
    for (double v : rep.values[i]) row << v;
    os << row.str() << '\n';
  }
  out.tables.push_back({"chain", os.str()});
  return out;
}

// ---- kind: clumps ---------------------------------------------------------

struct ClumpParams {
  SiteLaw law;
  std::int64_t half = 10;
  std::size_t slots = 1;
};

inline ClumpParams parse_clump_params(const json& params) {
  Reader r(params, "params");
  ClumpParams p;
  p.law.lambda = r.number("lambda");
  if (r.has("radius")) p.law.radius = config::parse_radius(r.raw("radius"), "params.radius");
  if (r.has("sigma")) p.law.sigma = config::parse_distribution(r.raw("sigma"), "params.sigma");
  p.half = r.integer("half", 10);
  if (p.half < 1) throw ConfigError("params.half must be >= 1");
  p.slots = r.count("slots", 1);
  r.done();
  p.law.validate();
  return p;
}

template <std::size_t D>
RepOutput clump_rep(const ClumpParams& p, std::uint64_t seed) {
  RepOutput out;
  auto region = LatticeRegion<D>::centered(p.half);
  std::ostringstream os;
  write_clumps_csv_header<D>(os);
  double n = 0, sumL = 0, maxL = 0, cens = 0;
  for (std::size_t s = 1; s <= p.slots; ++s) {
    auto f = build_slot_field<D>(region, p.law, SeedSpec{seed}.derive("field"), static_cast<std::int64_t>(s));
    auto part = find_clumps(f);
    write_clumps_csv<D>(os, static_cast<std::int64_t>(s), part);
    for (auto& c : part.clumps) {
      ++n;
      sumL += static_cast<double>(c.L);
      maxL = std::max(maxL, static_cast<double>(c.L));
      cens += c.censored;
    }
  }
  out.tables.push_back({"clumps", os.str()});
  out.metrics["clumps"] = n;
  out.metrics["mean_L"] = n > 0 ? sumL / n : 0.0;
  out.metrics["max_L"] = maxL;
  out.metrics["censored"] = cens;
  return out;
}

// ---- kind: branching ------------------------------------------------------

struct BranchingParams {
  std::string type = "ball";
  std::vector<double> radius_pmf{0.5, 0.5};
  Distribution sigma = Distribution::constant(1.0);
  SiteLaw law;
  std::size_t pool = 2000;
  std::int64_t half = 30;
  bool independentize = false;
  std::size_t generations = 20;
  std::size_t cap = 10'000'000;
};

inline BranchingParams parse_branching_params(const json& params) {
  Reader r(params, "params");
  BranchingParams p;
  p.generations = r.count("generations", 20);
  p.cap = r.count("cap", 10'000'000);
  p.independentize = r.boolean("independentize", false);
  p.pool = r.count("pool", 2000);
  auto g = r.child("progeny");
  p.type = g.string("type", "ball", {"ball", "clump_pool"});
  if (p.type == "ball") {
    p.radius_pmf = g.numbers("radius_pmf", p.radius_pmf);
    double s = 0.0;
    for (double v : p.radius_pmf) {
      if (!(v >= 0)) throw ConfigError("params.progeny.radius_pmf must be nonnegative");
      s += v;
    }
    if (!(s > 0)) throw ConfigError("params.progeny.radius_pmf must have positive mass");
    if (g.has("sigma")) p.sigma = config::parse_distribution(g.raw("sigma"), "params.progeny.sigma");
  } else {
    p.law.lambda = g.number("lambda");
    if (g.has("radius")) p.law.radius = config::parse_radius(g.raw("radius"), "params.progeny.radius");
    if (g.has("sigma")) p.law.sigma = config::parse_distribution(g.raw("sigma"), "params.progeny.sigma");
    p.half = g.integer("half", 30);
    p.law.validate();
  }
  g.done();
  r.done();
  return p;
}

template <std::size_t D>
RepOutput branching_rep(const BranchingParams& p, std::uint64_t seed) {
  RepOutput out;
  SeedSpec s{seed};
  ProgenyLaw<D> law;
  if (p.type == "ball") {
    law = ProgenyLaw<D>::ball(p.radius_pmf, p.sigma);
    if (p.independentize) law = independentize<D>(draw_pool(law, p.pool, s.derive("pool"))).law();
  } else {
    auto pool = sample_clump_pool<D>(p.law, p.pool, p.half, s.derive("pool"));
    law = p.independentize ? independentize<D>(pool.pairs).law() : ProgenyLaw<D>::empirical(pool.pairs);
  }
  std::vector<GenerationStats> gens;
  bool partial = false;
  try {
    gens = run_branching(law, p.generations, s.derive("branching"), p.cap);
  } catch (const BranchingCapacityError& e) {
    gens = e.completed;
    partial = true;
    out.capacity_error = e.what();
  }
  out.tables.push_back({"generations", to_csv([&](std::ostream& os) { write_generations_csv(os, gens); }), partial});
  const auto& last = gens.back();
  out.metrics["generations"] = static_cast<double>(last.n);
  out.metrics["h_over_n"] = last.n ? last.h / static_cast<double>(last.n) : 0.0;
  return out;
}

// ---- kind: stability ------------------------------------------------------

struct StabilityParams {
  std::string task = "scan";
  std::vector<double> lambdas;
  std::vector<double> schedule;
  std::vector<std::vector<double>> probes;
  double eps = 0.01;
  std::optional<BoundOptions> bound;
  double lambda = 0.0, a = 0.0, T = 100.0, couple_at = 0.0;
  GrowthModel model = GrowthModel::continuous;
  std::size_t grid_points = 16;
  std::vector<double> snapshots;
  double burn_in = 0.0, window = 0.0;
  ShapeLaw shape{ShapeKind::cube, Distribution::constant(1.0)};
  Distribution sigma = Distribution::constant(1.0);
  double setup_window = 0.0, window_per_time = 1.0, max_expected = 2e7;
};

inline StabilityParams parse_stability_params(const json& params, std::size_t dim) {
  Reader r(params, "params");
  StabilityParams p;
  p.task = r.string("task", "scan", {"scan", "kappa", "scaling", "percolation"});
  if (r.has("shape")) p.shape = config::parse_shape(r.raw("shape"), "params.shape");
  if (r.has("sigma")) p.sigma = config::parse_distribution(r.raw("sigma"), "params.sigma");
  p.setup_window = r.number("window", 0.0);
  p.window_per_time = r.number("window_per_time", 1.0);
  p.max_expected = r.number("max_expected", 2e7);
  if (p.task == "scan") {
    p.lambdas = r.numbers("lambdas");
    if (p.lambdas.empty() || !std::is_sorted(p.lambdas.begin(), p.lambdas.end()))
      throw ConfigError("params.lambdas must be a nonempty sorted list");
    for (double l : p.lambdas)
      if (!(l >= 0)) throw ConfigError("params.lambdas must be >= 0");
    if (r.has("schedule") && r.raw("schedule").is_array()) {
      p.schedule = r.numbers("schedule");
    } else if (r.has("schedule")) {
      auto s = r.child("schedule");
      p.schedule = exponential_schedule(s.number("base"), s.number("T"));
      s.done();
    } else {
      p.schedule = exponential_schedule(8, 512);
    }
    if (p.schedule.empty() || !std::is_sorted(p.schedule.begin(), p.schedule.end()) || !(p.schedule.front() > 0))
      throw ConfigError("params.schedule must be a nonempty sorted list of spans > 0");
    p.probes = r.has("probes") ? r.points("probes", dim) : std::vector<std::vector<double>>{std::vector<double>(dim, 0.0)};
    p.eps = r.number("eps", 0.01);
    if (r.has("bound")) {
      auto b = r.child("bound");
      BoundOptions bo;
      if (b.has("box_sizes")) {
        bo.box_sizes.clear();
        for (double v : b.numbers("box_sizes")) bo.box_sizes.push_back(static_cast<std::int64_t>(v));
      }
      bo.touch_reps = b.count("touch_reps", bo.touch_reps);
      bo.lambda_max = b.number("lambda_max", bo.lambda_max);
      if (b.has("a")) bo.a = b.number("a");
      bo.T = b.number("T", bo.T);
      bo.reps = b.count("reps", bo.reps);
      b.done();
      p.bound = bo;
    }
  } else if (p.task == "kappa") {
    p.lambda = r.number("lambda");
    p.T = r.number("T", 100.0);
    p.model = r.string("model", "continuous", {"continuous", "model5"}) == "model5" ? GrowthModel::model5
                                                                                      : GrowthModel::continuous;
    p.grid_points = r.count("grid_points", 16);
    p.couple_at = r.number("couple_at", 0.0);
  } else if (p.task == "scaling") {
    p.lambda = r.number("lambda");
    p.a = r.number("a");
    p.T = r.number("T", 50.0);
    if (!(p.a > 0) || !(p.lambda > 0)) throw ConfigError("params.a and params.lambda must be > 0");
  } else {
    p.lambda = r.number("lambda");
    p.snapshots = r.numbers("snapshots");
    p.burn_in = r.number("burn_in", 0.0);
    p.window = r.number("probe_window", 20.0);
    p.couple_at = r.number("couple_at", 0.0);
    if (p.snapshots.empty() || !std::is_sorted(p.snapshots.begin(), p.snapshots.end()) ||
        p.snapshots.front() < p.burn_in)
      throw ConfigError("params.snapshots must be sorted and not before burn_in");
  }
  if (!(p.T >= 1)) throw ConfigError("params.T must be >= 1");
  r.done();
  return p;
}

template <std::size_t D>
GrowthSetup<D> growth_setup(const StabilityParams& p) {
  GrowthSetup<D> s;
  s.shape = p.shape;
  s.sigma = p.sigma;
  s.window = p.setup_window;
  s.window_per_time = p.window_per_time;
  s.max_expected = p.max_expected;
  s.validate();
  return s;
}

template <std::size_t D>
Point<D> to_point(const std::vector<double>& v) {
  Point<D> x;
  for (std::size_t k = 0; k < D; ++k) x[k] = v[k];
  return x;
}

inline json summary_json(const stats::Summary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"se", s.se}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi}};
}

template <std::size_t D>
CellOutput stability_cell(const StabilityParams& p, std::size_t reps, std::size_t cell, std::uint64_t cseed,
                          std::size_t workers) {
  auto setup = growth_setup<D>(p);
  auto ledger = [&](CellOutput& c) {
    for (std::size_t r = 0; r < reps; ++r) c.seeds.push_back({"rep", cell, r, rep_seed(cseed, r)});
  };
  if (p.task == "percolation") {
    return run_reps(reps, cell, cseed, workers, [&](std::size_t, std::uint64_t seed) {
      RepOutput out;
      auto rep = percolation_probe<D>(p.lambda, p.snapshots, p.window, seed, setup, p.burn_in, p.couple_at);
      out.tables.push_back({"percolation", to_csv([&](std::ostream& os) { write_percolation_csv(os, rep); })});
      out.metrics["largest_fraction"] = rep.snapshots.back().largest_fraction;
      out.metrics["present"] = static_cast<double>(rep.snapshots.back().present);
      return out;
    });
  }
  CellOutput c;
  ledger(c);
  if (p.task == "kappa") {
    KappaOptions ko;
    ko.grid_points = p.grid_points;
    ko.couple_at = p.couple_at;
    auto e = kappa_estimate<D>(p.lambda, p.model, p.T, reps, cseed, setup, ko);
    std::ostringstream os;
    write_kappa_csv_header(os);
    write_kappa_csv(os, e);
    c.tables.push_back({"kappa", os.str()});
    c.metrics["kappa"] = e.per_rep;
    c.summary = {{"kappa_hat", e.kappa_hat}, {"ci_lo", e.ci_lo}, {"ci_hi", e.ci_hi},
                 {"lower_bound", e.lower_bound}, {"truncated_reps", e.truncated_reps}};
    return c;
  }
  if (p.task == "scaling") {
    auto s = scaling_check<D>(p.lambda, p.a, p.T, reps, cseed, setup);
    std::ostringstream os;
    os << "lambda,a,T,reps,arrivals,compared,violations\n";
    CsvRow row;
    row << p.lambda << p.a << p.T << static_cast<std::uint64_t>(reps) << static_cast<std::uint64_t>(s.arrivals)
        << static_cast<std::uint64_t>(s.compared) << static_cast<std::uint64_t>(s.violations);
    os << row.str() << '\n';
    c.tables.push_back({"scaling", os.str()});
    c.metrics["violations"] = {static_cast<double>(s.violations)};
    c.summary = {{"violations", s.violations}, {"compared", s.compared}};
    if (s.witness_id) c.summary["witness_id"] = *s.witness_id;
    return c;
  }
  std::vector<Point<D>> xs;
  for (auto& v : p.probes) xs.push_back(to_point<D>(v));
  ScanOptions so;
  so.schedule = p.schedule;
  so.reps = reps;
  so.eps = p.eps;
  if (p.bound) so.bound = stability_bound<D>(setup, SeedSpec{cseed}.derive("bound"), *p.bound);
  auto vs = threshold_scan<D>(p.lambdas, xs, cseed, setup, so);
  std::ostringstream sweep, prof;
  write_sweep_csv_header(sweep);
  write_profile_csv_header(prof);
  json verdicts = json::array();
  for (auto& v : vs) {
    write_sweep_csv<D>(sweep, v, xs.front());
    write_profile_csv(prof, v);
    std::string tag = fmt(v.lambda);
    std::vector<double> ratio;
    for (double h : v.H_final.front()) ratio.push_back(h / v.schedule.back());
    c.metrics["H_over_T@" + tag] = ratio;
    c.metrics["W@" + tag] = v.W_final.front();
    json pl = json::array();
    for (auto& ps : v.plateau) pl.push_back({{"level", ps.level}, {"increase", ps.increase}, {"plateau", ps.plateau}});
    json item = {{"lambda", v.lambda},
                 {"verdict", verdict_name(v.verdict)},
                 {"plateau", pl},
                 {"min_ratio_ci_lo", v.min_ratio_ci_lo},
                 {"loynes_violations", v.loynes_violations},
                 {"truncated_reps", v.truncated_reps},
                 {"refuted", v.refuted}};
    verdicts.push_back(item);
  }
  c.tables.push_back({"sweep", sweep.str()});
  c.tables.push_back({"profiles", prof.str()});
  c.summary["verdicts"] = verdicts;
  if (so.bound) {
    const auto& b = *so.bound;
    c.summary["bound"] = {{"a", b.a},
                          {"kappa_a", b.kappa_a.kappa_hat},
                          {"kappa_a_ci", {b.kappa_a.ci_lo, b.kappa_a.ci_hi}},
                          {"lambda_c", {b.lambda_c.lo, b.lambda_c.hi}},
                          {"value", b.value},
                          {"lo", b.lo},
                          {"hi", b.hi}};
  }
  return c;
}

// ---- kind: grid -----------------------------------------------------------

struct GridParams {
  std::string task = "simulate";
  std::size_t width = 32, N = 32, K = 500, loynes_reps = 0, loynes_width = 101;
  double p = 0.1;
  std::vector<double> ps;
  Boundary boundary = Boundary::torus;
  std::optional<Distribution> sigma;
};

inline GridParams parse_grid_params(const json& params) {
  Reader r(params, "params");
  GridParams g;
  g.task = r.string("task", "simulate", {"simulate", "gamma", "loynes"});
  g.boundary = r.string("boundary", "torus", {"torus", "free"}) == "torus" ? Boundary::torus : Boundary::free;
  if (g.task == "gamma") {
    g.ps = r.numbers("ps");
    g.N = r.count("N", 2000, 2);
    g.width = static_cast<std::size_t>(r.integer("width", 0));
    g.loynes_reps = r.count("loynes_reps", 0, 0);
    g.K = r.count("K", 500, 2);
    g.loynes_width = r.count("loynes_width", 101, 2);
    if (g.ps.empty()) throw ConfigError("params.ps must be nonempty");
    for (double p : g.ps)
      if (!(p >= 0 && p <= 1)) throw ConfigError("params.ps entries must lie in [0, 1]");
  } else {
    g.p = r.number("p");
    if (!(g.p >= 0 && g.p <= 1)) throw ConfigError("params.p must lie in [0, 1]");
    g.width = r.count("width", 32, 2);
    if (g.task == "simulate") g.N = r.count("N", 32);
    else g.K = r.count("K", 500, 2);
    if (r.has("sigma")) g.sigma = config::parse_distribution(r.raw("sigma"), "params.sigma");
  }
  r.done();
  return g;
}

inline CellOutput grid_cell(const GridParams& g, std::size_t reps, std::size_t cell, std::uint64_t cseed,
                            std::size_t workers) {
  if (g.task == "gamma") {
    CellOutput c;
    for (std::size_t r = 0; r < reps; ++r) c.seeds.push_back({"rep(hash_combine)", cell, r, hash_combine(cseed, r)});
    auto b = p0_estimate(g.ps, g.N, reps, cseed, g.loynes_reps, g.K, g.loynes_width);
    c.tables.push_back({"gamma", to_csv([&](std::ostream& os) { write_gamma_sweep_csv(os, b); })});
    for (auto& e : b.estimates) c.metrics["gamma@" + fmt(e.p)] = e.samples;
    c.summary = {{"p0_lo", b.lo}, {"p0_hi", b.hi}, {"p0_lo_ci", b.lo_ci}, {"p0_hi_ci", b.hi_ci}};
    return c;
  }
  return run_reps(reps, cell, cseed, workers, [&](std::size_t, std::uint64_t seed) {
    RepOutput out;
    if (g.task == "simulate") {
      auto in = sample_grid(g.width, g.N, g.p, g.boundary, seed, 0, 1, g.sigma);
      auto H = simulate_growth(in);
      auto W = simulate_service(in);
      out.tables.push_back({"grid", to_csv([&](std::ostream& os) { write_grid_rows_csv(os, in, H, W); })});
      out.metrics["H_max_over_N"] = *std::max_element(H.back().begin(), H.back().end()) / static_cast<double>(g.N);
      out.metrics["W_max"] = *std::max_element(W.back().begin(), W.back().end());
    } else {
      auto l = loynes_grid(g.p, g.K, g.width, seed, g.boundary, g.sigma);
      std::ostringstream os;
      os << "n,W_origin\n";
      for (std::size_t n = 0; n < l.origin.size(); ++n) {
        CsvRow row;
        row << static_cast<std::uint64_t>(n + 1) << l.origin[n];
        os << row.str() << '\n';
      }
      out.tables.push_back({"loynes", os.str()});
      out.metrics["violations"] = static_cast<double>(l.violations);
      out.metrics["plateau_n"] = static_cast<double>(l.plateau_n);
    }
    return out;
  });
}

// ---- dispatch -------------------------------------------------------------

// Parses (and so validates) the params of one cell; returns a runner for it.
inline std::function<CellOutput(std::size_t, std::uint64_t, std::size_t)> prepare_cell(const ExperimentConfig& c,
                                                                                       const json& params) {
  const auto& k = c.kind;
  auto reps = c.replications;
  auto dim = c.dimension;
  if (k == "rain" || k == "continuous" || k == "chain") {
    auto p = parse_rain_params(k, params, dim);
    return [=](std::size_t cell, std::uint64_t cs, std::size_t w) {
      return with_dim(dim, [&](auto d) {
        return run_reps(reps, cell, cs, w, [&](std::size_t, std::uint64_t s) { return rain_rep<decltype(d)::value>(k, p, s); });
      });
    };
  }
  if (k == "clumps") {
    auto p = parse_clump_params(params);
    return [=](std::size_t cell, std::uint64_t cs, std::size_t w) {
      return with_dim(dim, [&](auto d) {
        return run_reps(reps, cell, cs, w, [&](std::size_t, std::uint64_t s) { return clump_rep<decltype(d)::value>(p, s); });
      });
    };
  }
  if (k == "branching") {
    auto p = parse_branching_params(params);
    return [=](std::size_t cell, std::uint64_t cs, std::size_t w) {
      return with_dim(dim, [&](auto d) {
        return run_reps(reps, cell, cs, w,
                        [&](std::size_t, std::uint64_t s) { return branching_rep<decltype(d)::value>(p, s); });
      });
    };
  }
  if (k == "stability") {
    auto p = parse_stability_params(params, dim);
    return [=](std::size_t cell, std::uint64_t cs, std::size_t w) {
      return with_dim(dim, [&](auto d) { return stability_cell<decltype(d)::value>(p, reps, cell, cs, w); });
    };
  }
  if (dim != 1) throw ConfigError("grid experiments are one-dimensional (dimension must be 1)");
  auto p = parse_grid_params(params);
  return [=](std::size_t cell, std::uint64_t cs, std::size_t w) { return grid_cell(p, reps, cell, cs, w); };
}

// ---- persistence ----------------------------------------------------------

inline json csv_to_json(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  json rows = json::array();
  if (!std::getline(in, line)) return rows;
  auto head = split_csv(line);
  while (std::getline(in, line)) {
    auto cells = split_csv(line);
    json row = json::object();
    for (std::size_t i = 0; i < head.size(); ++i) {
      const std::string v = i < cells.size() ? cells[i] : "";
      if (v.empty()) {
        row[head[i]] = nullptr;
        continue;
      }
      try {
        row[head[i]] = parse_double(v);
      } catch (const ConfigError&) {
        row[head[i]] = v;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline json write_tables(const fs::path& dir, const std::vector<Table>& tables, const std::string& format,
                         const fs::path& rel = {}) {
  fs::create_directories(dir);
  json outs = json::array();
  for (const auto& t : tables) {
    std::string name = t.name + (format == "json" ? ".json" : ".csv");
    std::string data = format == "json" ? csv_to_json(t.csv).dump(1) + "\n" : t.csv;
    write_file(dir / name, data);
    json e = {{"path", (rel / name).generic_string()}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}};
    if (t.partial) e["partial"] = true;
    outs.push_back(e);
  }
  return outs;
}

inline json versions_json() {
  return {{"phail", kVersion},
          {"compiler", __VERSION__},
          {"boost", BOOST_LIB_VERSION},
          {"openssl", OPENSSL_VERSION_TEXT},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline json seeds_json(const std::vector<SeedEntry>& seeds) {
  json a = json::array();
  std::set<std::uint64_t> seen;
  for (auto& s : seeds) {
    if (!seen.insert(s.seed).second)
      throw UsageError("seed ledger collision at cell " + std::to_string(s.cell) + " rep " + std::to_string(s.rep));
    a.push_back({{"label", s.label}, {"cell", s.cell}, {"rep", s.rep}, {"seed", s.seed}});
  }
  return a;
}

inline json metrics_json(const std::map<std::string, std::vector<double>>& m) {
  json o = json::object();
  for (auto& [k, v] : m) o[k] = summary_json(stats::summarize(v));
  return o;
}

inline json error_record(const std::string& kind, const std::string& message, int code) {
  return {{"status", "error"}, {"error", kind}, {"message", message}, {"exit_code", code}};
}

struct Outcome {
  int exit_code = kOk;
  json manifest;
  json error;  // null on success
};

inline void finish_manifest(json& m, const std::chrono::steady_clock::time_point& t0, const std::string& started) {
  m["started_utc"] = started;
  m["finished_utc"] = utc_now();
  m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Writes data files, manifest.json and (on failure) error.json under out_dir.
inline Outcome run_experiment(const ExperimentConfig& c, const fs::path& out_dir, std::size_t workers) {
  auto t0 = std::chrono::steady_clock::now();
  auto started = utc_now();
  Outcome o;
  auto runner = prepare_cell(c, c.params);
  fs::create_directories(out_dir);
  json m = {{"tool", "phail"}, {"command", "run"}, {"config", c.echo}, {"config_sha256", sha256_hex(c.echo.dump())},
            {"versions", versions_json()}, {"workers", workers}};
  CellOutput out;
  try {
    out = runner(0, cell_seed(c, 0), workers);
  } catch (const CapacityError& e) {
    o.exit_code = kCapacity;
    o.error = error_record("capacity", e.what(), kCapacity);
  }
  m["seeds"] = seeds_json(out.seeds);
  m["outputs"] = write_tables(out_dir, out.tables, c.format);
  m["metrics"] = metrics_json(out.metrics);
  m["summary"] = out.summary;
  if (out.capacity_error && o.exit_code == kOk) {
    o.exit_code = kCapacity;
    o.error = error_record("capacity", *out.capacity_error, kCapacity);
  }
  m["status"] = o.exit_code == kOk ? "ok" : "partial";
  finish_manifest(m, t0, started);
  write_file(out_dir / "manifest.json", m.dump(2) + "\n");
  if (!o.error.is_null()) write_file(out_dir / "error.json", o.error.dump(2) + "\n");
  o.manifest = m;
  return o;
}

struct SweepCell {
  std::size_t index = 0;
  json params;
  json values;  // swept values, in key order
};

inline std::vector<SweepCell> expand_sweep(const ExperimentConfig& c) {
  std::vector<SweepCell> cells;
  const auto& sw = *c.sweep;
  double top = 0.0;
  bool lambda_swept = false;
  for (std::size_t k = 0; k < sw.keys.size(); ++k)
    if (sw.keys[k] == "lambda") {
      lambda_swept = true;
      for (auto& v : sw.values[k])
        if (v.is_number()) top = std::max(top, v.get<double>());
    }
  for (std::size_t i = 0; i < sw.cells(); ++i) {
    SweepCell cell;
    cell.index = i;
    cell.params = c.params;
    cell.values = sw.cell(i);
    for (std::size_t k = 0; k < sw.keys.size(); ++k) config::set_path(cell.params, sw.keys[k], cell.values[k]);
    bool rain_like = c.kind == "rain" || c.kind == "continuous" || c.kind == "chain" ||
                     (c.kind == "stability" && (cell.params.value("task", "") == "kappa" ||
                                                cell.params.value("task", "") == "percolation"));
    if (sw.coupled && lambda_swept && rain_like && !cell.params.contains("couple_at")) cell.params["couple_at"] = top;
    cells.push_back(cell);
  }
  return cells;
}

// Every cell of a sweep is validated before the first one runs.
inline void validate_config(const ExperimentConfig& c) {
  if (c.sweep)
    for (auto& cell : expand_sweep(c)) {
      try {
        prepare_cell(c, cell.params);
      } catch (const ConfigError& e) {
        throw ConfigError("sweep cell " + std::to_string(cell.index) + ": " + e.what());
      }
    }
  else
    prepare_cell(c, c.params);
}

// Swept value as one CSV field; list separators become ';'.
inline std::string cell_label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  auto s = v.dump();
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

inline Outcome run_sweep(const ExperimentConfig& c, const fs::path& out_dir, std::size_t workers) {
  if (!c.sweep) throw ConfigError("sweep: config has no sweep block");
  auto t0 = std::chrono::steady_clock::now();
  auto started = utc_now();
  auto cells = expand_sweep(c);
  std::vector<std::function<CellOutput(std::size_t, std::uint64_t, std::size_t)>> runners;
  for (auto& cell : cells) {
    try {
      runners.push_back(prepare_cell(c, cell.params));
    } catch (const ConfigError& e) {
      throw ConfigError("sweep cell " + std::to_string(cell.index) + ": " + e.what());
    }
  }
  fs::create_directories(out_dir);
  json m = {{"tool", "phail"}, {"command", "sweep"}, {"config", c.echo}, {"config_sha256", sha256_hex(c.echo.dump())},
            {"versions", versions_json()}, {"workers", workers}, {"coupled", c.sweep->coupled}};
  json mcells = json::array();
  std::vector<SeedEntry> all_seeds;
  std::vector<std::map<std::string, std::vector<double>>> metrics(cells.size());
  std::vector<std::string> status(cells.size(), "ok");
  json failures = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::size_t seed_cell = c.sweep->coupled ? 0 : i;
    CellOutput out;
    try {
      out = runners[i](i, cell_seed(c, seed_cell), workers);
      if (out.capacity_error) {
        status[i] = "capacity_error";
        failures.push_back({{"cell", i}, {"error", "capacity"}, {"message", *out.capacity_error}});
      }
    } catch (const CapacityError& e) {
      status[i] = "capacity_error";
      failures.push_back({{"cell", i}, {"error", "capacity"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      status[i] = "error";
      failures.push_back({{"cell", i}, {"error", "runtime"}, {"message", e.what()}});
    }
    fs::path rel = fs::path("cells") / ("cell_" + std::to_string(i));
    json entry = {{"cell", i}, {"params", cells[i].params}, {"status", status[i]}};
    entry["outputs"] = write_tables(out_dir / rel, out.tables, c.format, rel);
    json seeds = json::array();
    for (auto& s : out.seeds) seeds.push_back({{"label", s.label}, {"rep", s.rep}, {"seed", s.seed}});
    entry["seeds"] = seeds;
    entry["metrics"] = metrics_json(out.metrics);
    entry["summary"] = out.summary;
    mcells.push_back(entry);
    metrics[i] = out.metrics;
    if (!c.sweep->coupled) all_seeds.insert(all_seeds.end(), out.seeds.begin(), out.seeds.end());
  }
  seeds_json(all_seeds);  // uniqueness across (cell, replication)

  std::set<std::string> names;
  for (auto& mm : metrics)
    for (auto& [k, v] : mm) names.insert(k);
  CsvRow head;
  head << "cell";
  for (auto& k : c.sweep->keys) head << k;
  head << "status";
  for (auto& n : names) head << n + "_n" << n + "_mean" << n + "_se" << n + "_ci_lo" << n + "_ci_hi";
  std::ostringstream agg;
  agg << head.str() << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CsvRow row;
    row << static_cast<std::uint64_t>(i);
    for (auto& v : cells[i].values) row << cell_label(v);
    row << status[i];
    for (auto& n : names) {
      auto it = metrics[i].find(n);
      if (it == metrics[i].end() || it->second.empty()) {
        row << "" << "" << "" << "" << "";
        continue;
      }
      auto s = stats::summarize(it->second);
      row << static_cast<std::uint64_t>(s.n) << s.mean << s.se << s.ci_lo << s.ci_hi;
    }
    agg << row.str() << '\n';
  }
  m["cells"] = mcells;
  m["outputs"] = write_tables(out_dir, {{"sweep", agg.str()}}, c.format);
  Outcome o;
  if (!failures.empty()) {
    o.exit_code = kCapacity;
    for (auto& f : failures)
      if (f["error"] != "capacity") o.exit_code = kUsage;
    o.error = {{"status", "error"}, {"error", "cell_failures"}, {"cells", failures}, {"exit_code", o.exit_code}};
  }
  m["status"] = failures.empty() ? "ok" : "partial";
  finish_manifest(m, t0, started);
  write_file(out_dir / "manifest.json", m.dump(2) + "\n");
  if (!o.error.is_null()) write_file(out_dir / "error.json", o.error.dump(2) + "\n");
  o.manifest = m;
  return o;
}

inline ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config::parse_experiment(j);
}

// Checksum mismatches (and missing files) among the outputs listed in a manifest.
inline std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
  auto m = json::parse(read_file(manifest_path));
  auto dir = manifest_path.parent_path();
  std::vector<std::string> bad;
  auto check = [&](const json& outs) {
    for (auto& o : outs) {
      auto p = dir / o.at("path").get<std::string>();
      if (!fs::exists(p)) {
        bad.push_back(o.at("path").get<std::string>() + ": missing");
        continue;
      }
      if (sha256_hex(read_file(p)) != o.at("sha256").get<std::string>())
        bad.push_back(o.at("path").get<std::string>() + ": checksum mismatch");
    }
  };
  if (m.contains("outputs")) check(m["outputs"]);
  if (m.contains("cells"))
    for (auto& c : m["cells"]) check(c["outputs"]);
  return bad;
}

}  // namespace phail::harness
