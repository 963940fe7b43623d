#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace phail {

template <std::size_t D>
using Site = std::array<std::int64_t, D>;

template <std::size_t D>
std::int64_t linf(const Site<D>& a, const Site<D>& b) {
  std::int64_t m = 0;
  for (std::size_t k = 0; k < D; ++k) m = std::max<std::int64_t>(m, std::llabs(a[k] - b[k]));
  return m;
}

template <std::size_t D>
std::uint64_t site_hash(std::uint64_t seed, const Site<D>& z) {
  std::uint64_t h = seed;
  for (auto v : z) h = hash_combine(h, static_cast<std::uint64_t>(v));
  return h;
}

template <std::size_t D>
struct SiteHash {
  std::size_t operator()(const Site<D>& z) const { return static_cast<std::size_t>(site_hash<D>(0x51ed27, z)); }
};

// Finite box of Z^d, bounds inclusive, row-major with axis 0 fastest.
template <std::size_t D>
struct LatticeRegion {
  Site<D> lo{};
  Site<D> hi{};

  static LatticeRegion centered(std::int64_t half) {
    LatticeRegion r;
    r.lo.fill(-half);
    r.hi.fill(half);
    return r;
  }

  std::int64_t extent(std::size_t k) const { return hi[k] - lo[k] + 1; }

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t k = 0; k < D; ++k) n *= static_cast<std::size_t>(std::max<std::int64_t>(0, extent(k)));
    return n;
  }

  bool contains(const Site<D>& z) const {
    for (std::size_t k = 0; k < D; ++k)
      if (z[k] < lo[k] || z[k] > hi[k]) return false;
    return true;
  }

  bool on_boundary(const Site<D>& z) const {
    for (std::size_t k = 0; k < D; ++k)
      if (z[k] == lo[k] || z[k] == hi[k]) return true;
    return false;
  }

  std::size_t index(const Site<D>& z) const {
    std::size_t idx = 0, stride = 1;
    for (std::size_t k = 0; k < D; ++k) {
      idx += static_cast<std::size_t>(z[k] - lo[k]) * stride;
      stride *= static_cast<std::size_t>(extent(k));
    }
    return idx;
  }

  Site<D> site(std::size_t idx) const {
    Site<D> z;
    for (std::size_t k = 0; k < D; ++k) {
      auto e = static_cast<std::size_t>(extent(k));
      z[k] = lo[k] + static_cast<std::int64_t>(idx % e);
      idx /= e;
    }
    return z;
  }

  // Visit every site of the L-infinity ball B(c, r) that lies in the region.
  template <class F>
  void for_ball(const Site<D>& c, std::int64_t r, F&& f) const {
    Site<D> a, b;
    for (std::size_t k = 0; k < D; ++k) {
      a[k] = std::max(lo[k], c[k] - r);
      b[k] = std::min(hi[k], c[k] + r);
      if (a[k] > b[k]) return;
    }
    Site<D> z = a;
    while (true) {
      f(z);
      std::size_t k = 0;
      for (; k < D; ++k) {
        if (z[k] < b[k]) {
          ++z[k];
          break;
        }
        z[k] = a[k];
      }
      if (k == D) break;
    }
  }

  // True when B(c, r) sticks out of the region or reaches its boundary.
  bool ball_touches_boundary(const Site<D>& c, std::int64_t r) const {
    for (std::size_t k = 0; k < D; ++k)
      if (c[k] - r <= lo[k] || c[k] + r >= hi[k]) return true;
    return false;
  }

  template <class F>
  void for_each(F&& f) const {
    std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) f(i, site(i));
  }
};

// Integer radius law on {kmin, ..., kmin + pmf.size() - 1}.
struct RadiusLaw {
  int kmin = 1;
  std::vector<double> pmf{1.0};

  static RadiusLaw constant(int k) { return {k, {1.0}}; }
  static RadiusLaw uniform_int(int a, int b) {
    if (b < a) throw ConfigError("radius law: uniform_int needs a <= b");
    return {a, std::vector<double>(static_cast<std::size_t>(b - a + 1), 1.0 / (b - a + 1))};
  }
  // P(R = k) proportional to q^(k - kmin) on [kmin, kmax].
  static RadiusLaw geometric(double q, int kmin, int kmax) {
    if (!(q > 0 && q < 1) || kmax < kmin) throw ConfigError("radius law: geometric needs 0<q<1, kmin<=kmax");
    RadiusLaw r{kmin, {}};
    double w = 1.0;
    for (int k = kmin; k <= kmax; ++k, w *= q) r.pmf.push_back(w);
    double s = std::accumulate(r.pmf.begin(), r.pmf.end(), 0.0);
    for (auto& v : r.pmf) v /= s;
    return r;
  }

  void validate() const {
    if (kmin < 1) throw ConfigError("radius law: radii must be >= 1");
    double s = 0.0;
    for (double v : pmf) {
      if (!(v >= 0)) throw ConfigError("radius law: negative probability");
      s += v;
    }
    if (pmf.empty() || std::abs(s - 1.0) > 1e-9) throw ConfigError("radius law: probabilities must sum to 1");
  }

  int min_radius() const { return kmin; }
  int max_radius() const { return kmin + static_cast<int>(pmf.size()) - 1; }
  double prob(int k) const {
    if (k < kmin || k > max_radius()) return 0.0;
    return pmf[static_cast<std::size_t>(k - kmin)];
  }
  int quantile(double u) const {
    double c = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      c += pmf[i];
      if (u < c) return kmin + static_cast<int>(i);
    }
    return max_radius();
  }
};

}  // namespace phail
