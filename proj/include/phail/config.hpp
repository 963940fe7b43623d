#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "distribution.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "lattice.hpp"
#include "rain.hpp"

namespace phail::config {

using json = nlohmann::json;

// Typed access to one JSON object; every key read is recorded so that done()
// can reject the ones nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing key '" + sub(key) + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(sub(key) + " must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double dflt) { return has(key) ? number(key) : mark(key, dflt); }

  std::int64_t integer(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(sub(key) + " must be an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t dflt) { return has(key) ? integer(key) : mark(key, dflt); }

  std::size_t count(const std::string& key, std::size_t dflt, std::size_t min = 1) {
    auto v = integer(key, static_cast<std::int64_t>(dflt));
    if (v < static_cast<std::int64_t>(min)) throw ConfigError(sub(key) + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t dflt) {
    if (!has(key)) return mark(key, dflt);
    const auto& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(sub(key) + " must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool dflt) {
    if (!has(key)) return mark(key, dflt);
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(sub(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& dflt, const std::vector<std::string>& allowed = {}) {
    std::string s = dflt;
    if (has(key)) {
      const auto& v = raw(key);
      if (!v.is_string()) throw ConfigError(sub(key) + " must be a string");
      s = v.get<std::string>();
    } else {
      used_.insert(key);
    }
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(sub(key) + " must be one of {" + list + "}, got '" + s + "'");
    }
    return s;
  }

  std::vector<double> numbers(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) throw ConfigError(sub(key) + " must be an array of numbers");
    std::vector<double> out;
    for (auto& e : v) {
      if (!e.is_number()) throw ConfigError(sub(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> dflt) {
    return has(key) ? numbers(key) : mark(key, std::move(dflt));
  }

  std::vector<std::vector<double>> points(const std::string& key, std::size_t dim) {
    const auto& v = raw(key);
    if (!v.is_array() || v.empty()) throw ConfigError(sub(key) + " must be a nonempty array of points");
    std::vector<std::vector<double>> out;
    for (auto& p : v) {
      if (!p.is_array() || p.size() != dim) throw ConfigError(sub(key) + ": every point needs " + std::to_string(dim) + " coordinates");
      std::vector<double> q;
      for (auto& c : p) {
        if (!c.is_number()) throw ConfigError(sub(key) + ": coordinates must be numbers");
        q.push_back(c.get<double>());
      }
      out.push_back(q);
    }
    return out;
  }

  Reader child(const std::string& key) { return Reader(raw(key), sub(key)); }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + sub(it.key()) + "'");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  template <class T>
  T mark(const std::string& key, T v) {
    used_.insert(key);
    return v;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// A number is a constant; otherwise {"type": ..., parameters}.
inline Distribution parse_distribution(const json& j, const std::string& path) {
  if (j.is_number()) {
    auto d = Distribution::constant(j.get<double>());
    d.validate();
    return d;
  }
  Reader r(j, path);
  auto type = r.string("type", "", {"constant", "uniform", "exponential", "bounded_pareto", "pareto"});
  Distribution d;
  if (type == "constant") d = Distribution::constant(r.number("value"));
  else if (type == "uniform") d = Distribution::uniform(r.number("lo"), r.number("hi"));
  else if (type == "exponential") d = Distribution::exponential(r.number("mean"));
  else if (type == "bounded_pareto") d = Distribution::bounded_pareto(r.number("alpha"), r.number("lo"), r.number("hi"));
  else d = Distribution::pareto(r.number("alpha"), r.number("lo"));
  r.done();
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return d;
}

inline RadiusLaw parse_radius(const json& j, const std::string& path) {
  RadiusLaw law;
  if (j.is_number_integer()) {
    law = RadiusLaw::constant(j.get<int>());
  } else {
    Reader r(j, path);
    auto type = r.string("type", "", {"constant", "uniform_int", "geometric", "pmf"});
    if (type == "constant") law = RadiusLaw::constant(static_cast<int>(r.integer("value")));
    else if (type == "uniform_int") law = RadiusLaw::uniform_int(static_cast<int>(r.integer("lo")), static_cast<int>(r.integer("hi")));
    else if (type == "geometric")
      law = RadiusLaw::geometric(r.number("q"), static_cast<int>(r.integer("min")), static_cast<int>(r.integer("max")));
    else law = RadiusLaw{static_cast<int>(r.integer("min", 1)), r.numbers("p")};
    r.done();
  }
  try {
    law.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return law;
}

inline ShapeLaw parse_shape(const json& j, const std::string& path) {
  Reader r(j, path);
  ShapeLaw s;
  auto kind = r.string("kind", "cube", {"cube", "ball", "box"});
  s.kind = kind == "cube" ? ShapeKind::cube : kind == "ball" ? ShapeKind::ball : ShapeKind::box;
  s.size = r.has("size") ? parse_distribution(r.raw("size"), r.sub("size")) : Distribution::constant(0.5);
  r.done();
  return s;
}

// Continuous rain block shared by the rain, continuous and chain kinds.
struct RainSpec {
  double lambda = 1.0;
  std::vector<double> lo, hi;
  std::optional<double> pad;
  double t0 = 0.0, t1 = 1.0;
  ShapeLaw shape;
  Distribution sigma = Distribution::constant(1.0);
  double max_expected = 5e7;
  double couple_at = 0.0;

  template <std::size_t D>
  RainConfig<D> to_config() const {
    RainConfig<D> c;
    c.lambda = std::max(lambda, couple_at);
    for (std::size_t k = 0; k < D; ++k) {
      c.lo[k] = lo[k];
      c.hi[k] = hi[k];
    }
    c.pad = pad;
    c.t0 = t0;
    c.t1 = t1;
    c.shape = shape;
    c.sigma = sigma;
    c.max_expected = max_expected;
    return c;
  }
};

// Reads the rain keys of `r` (the caller owns done()).
inline RainSpec parse_rain(Reader& r, std::size_t dim) {
  RainSpec s;
  s.lambda = r.number("lambda");
  if (!(s.lambda >= 0) || !std::isfinite(s.lambda)) throw ConfigError(r.sub("lambda") + " must be finite and >= 0");
  s.lo.assign(dim, 0.0);
  s.hi.assign(dim, 1.0);
  if (r.has("window")) {
    auto w = r.child("window");
    s.lo = w.numbers("lo");
    s.hi = w.numbers("hi");
    w.done();
    if (s.lo.size() != dim || s.hi.size() != dim)
      throw ConfigError(r.sub("window") + ": lo and hi need " + std::to_string(dim) + " entries");
  }
  if (r.has("pad")) s.pad = r.number("pad");
  s.t0 = r.number("t0", 0.0);
  s.t1 = r.number("t1", 1.0);
  if (r.has("shape")) s.shape = parse_shape(r.raw("shape"), r.sub("shape"));
  if (r.has("sigma")) s.sigma = parse_distribution(r.raw("sigma"), r.sub("sigma"));
  s.max_expected = r.number("max_expected", 5e7);
  s.couple_at = r.number("couple_at", 0.0);
  if (!(s.couple_at >= 0)) throw ConfigError(r.sub("couple_at") + " must be >= 0");
  if (s.couple_at > 0 && s.couple_at < s.lambda)
    throw ConfigError(r.sub("couple_at") + " must be >= lambda when coupling is on");
  return s;
}

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"rain", "continuous", "chain", "clumps", "branching", "stability", "grid"};
  return k;
}

struct SweepSpec {
  std::vector<std::string> keys;               // dotted paths inside params
  std::vector<std::vector<json>> values;       // one list per key
  bool coupled = false;

  std::size_t cells() const {
    std::size_t n = 1;
    for (auto& v : values) n *= v.size();
    return n;
  }

  // Cell index -> one value per key, last key fastest.
  std::vector<json> cell(std::size_t idx) const {
    std::vector<json> out(keys.size());
    for (std::size_t k = keys.size(); k-- > 0;) {
      out[k] = values[k][idx % values[k].size()];
      idx /= values[k].size();
    }
    return out;
  }
};

struct ExperimentConfig {
  std::string kind;
  std::size_t dimension = 1;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string format = "csv";
  json params = json::object();
  std::optional<SweepSpec> sweep;
  json echo;  // the config as read
};

inline void set_path(json& params, const std::string& dotted, const json& value) {
  json* cur = &params;
  std::size_t start = 0;
  while (true) {
    auto dot = dotted.find('.', start);
    auto part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    if (!cur->contains(part)) (*cur)[part] = json::object();
    cur = &(*cur)[part];
    if (!cur->is_object()) throw ConfigError("sweep key '" + dotted + "' crosses a non-object");
    start = dot + 1;
  }
}

// Top-level schema; the params block is checked by the kind's own parser.
inline ExperimentConfig parse_experiment(const json& j) {
  Reader r(j, "");
  ExperimentConfig c;
  c.echo = j;
  c.kind = r.string("kind", "", experiment_kinds());
  c.dimension = r.count("dimension", 1);
  if (c.dimension > 3) throw ConfigError("dimension must be 1, 2 or 3");
  c.replications = r.count("replications", 1);
  c.seed = r.unsigned_integer("seed", 0);
  c.output_dir = r.string("output_dir", "out");
  c.format = r.string("format", "csv", {"csv", "json"});
  if (r.has("params")) {
    c.params = r.raw("params");
    if (!c.params.is_object()) throw ConfigError("params must be an object");
  }
  if (r.has("sweep")) {
    auto s = r.child("sweep");
    SweepSpec sw;
    sw.coupled = s.boolean("coupled", false);
    const auto& grid = s.raw("grid");
    if (!grid.is_object() || grid.empty()) throw ConfigError("sweep.grid must be a nonempty object");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
      if (!it.value().is_array() || it.value().empty())
        throw ConfigError("sweep.grid." + it.key() + " must be a nonempty array");
      sw.keys.push_back(it.key());
      sw.values.push_back(it.value().get<std::vector<json>>());
    }
    s.done();
    c.sweep = sw;
  }
  r.done();
  return c;
}

}  // namespace phail::config
