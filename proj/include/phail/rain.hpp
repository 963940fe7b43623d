#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "distribution.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "random.hpp"

namespace phail {

template <std::size_t D>
struct Arrival {
  std::uint64_t id = 0;
  double t = 0.0;
  Point<D> x{};
  Shape<D> shape = Cube{0.0};
  double sigma = 0.0;
};

// Grain law: a shape family whose size parameter (half side, radius, or each
// box half extent independently) is drawn from `size`.
struct ShapeLaw {
  ShapeKind kind = ShapeKind::cube;
  Distribution size = Distribution::constant(0.5);

  template <std::size_t D, class Eng>
  Shape<D> sample(Eng& eng) const {
    switch (kind) {
      case ShapeKind::cube: return Cube{size.sample(eng)};
      case ShapeKind::ball: return Ball{size.sample(eng)};
      case ShapeKind::box: {
        Box<D> b;
        for (auto& e : b.half_extents) e = size.sample(eng);
        return b;
      }
    }
    return Cube{0.0};
  }

  // Half diameter at the given quantile of the size law.
  template <std::size_t D>
  double half_diameter_quantile(double q) const {
    double s = size.quantile(q);
    return kind == ShapeKind::ball ? s : s * std::sqrt(static_cast<double>(D));
  }
};

template <std::size_t D>
struct RainConfig {
  double lambda = 1.0;
  Point<D> lo{};
  Point<D> hi{};
  std::optional<double> pad;  // default: 99.99% quantile of the grain half diameter
  double t0 = 0.0;
  double t1 = 1.0;
  ShapeLaw shape;
  Distribution sigma = Distribution::constant(1.0);
  double max_expected = 5e7;

  RainConfig() { hi.fill(1.0); }

  void validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("rain: lambda must be finite and >= 0");
    for (std::size_t k = 0; k < D; ++k)
      if (!(hi[k] >= lo[k])) throw ConfigError("rain: window needs lo <= hi on every axis");
    if (pad && !(*pad >= 0)) throw ConfigError("rain: pad must be >= 0");
    if (!(t0 < t1)) throw ConfigError("rain: horizon needs t0 < t1");
    shape.size.validate();
    sigma.validate();
  }

  double effective_pad() const { return pad ? *pad : shape.template half_diameter_quantile<D>(0.9999); }

  double padded_volume() const {
    double p = effective_pad(), v = 1.0;
    for (std::size_t k = 0; k < D; ++k) v *= hi[k] - lo[k] + 2 * p;
    return v;
  }

  double expected_count() const { return lambda * padded_volume() * (t1 - t0); }

  bool heavy_tailed() const { return shape.size.heavy_tailed() || sigma.heavy_tailed(); }
};

template <std::size_t D>
bool arrival_order(const Arrival<D>& a, const Arrival<D>& b) {
  return a.t < b.t || (a.t == b.t && a.id < b.id);
}

// Marked Poisson rain on the padded window times [t0, t1], sorted by time, ids 0..n-1.
// The pad must cover the largest grain half diameter if edge truncation matters.
template <std::size_t D>
std::vector<Arrival<D>> sample_rain(const RainConfig<D>& cfg, const SeedSpec& seed) {
  cfg.validate();
  double mean = cfg.expected_count();
  if (mean > cfg.max_expected)
    throw CapacityError("rain: expected arrival count " + std::to_string(mean) + " exceeds budget " +
                        std::to_string(cfg.max_expected));
  std::vector<Arrival<D>> out;
  if (mean <= 0) return out;
  Engine count_eng = seed.engine("rain.count");
  long n = std::poisson_distribution<long>(mean)(count_eng);
  out.resize(static_cast<std::size_t>(n));
  Engine pos = seed.engine("rain.position");
  Engine marks = seed.engine("rain.marks");
  double p = cfg.effective_pad();
  for (auto& a : out) {
    a.t = cfg.t0 + (cfg.t1 - cfg.t0) * uniform01(pos);
    for (std::size_t k = 0; k < D; ++k) a.x[k] = cfg.lo[k] - p + (cfg.hi[k] - cfg.lo[k] + 2 * p) * uniform01(pos);
    a.shape = cfg.shape.template sample<D>(marks);
    a.sigma = cfg.sigma.sample(marks);
  }
  std::stable_sort(out.begin(), out.end(), [](const Arrival<D>& a, const Arrival<D>& b) { return a.t < b.t; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

// Keep arrival j iff its id-keyed uniform is < fraction. Nested in fraction for a fixed seed.
template <std::size_t D>
std::vector<Arrival<D>> thin(const std::vector<Arrival<D>>& in, double fraction, std::uint64_t seed) {
  std::vector<Arrival<D>> out;
  for (const auto& a : in)
    if (to_unit(hash_combine(seed, a.id)) < fraction) out.push_back(a);
  return out;
}

template <std::size_t D>
void check_sorted(const std::vector<Arrival<D>>& arrivals) {
  for (std::size_t j = 1; j < arrivals.size(); ++j)
    if (!arrival_order(arrivals[j - 1], arrivals[j]))
      throw UsageError("arrivals must be strictly sorted by (t, id); violated at position " + std::to_string(j));
}

}  // namespace phail
