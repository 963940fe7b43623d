#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <boost/math/distributions/poisson.hpp>

namespace phail {

// Stateless 64-bit mixer (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t hash_words(std::uint64_t h, std::initializer_list<std::uint64_t> words) {
  for (auto w : words) h = hash_combine(h, w);
  return h;
}

// Cheap engine for per-site / per-id streams; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

using Engine = std::mt19937_64;

// Uniform on [0,1) with 53 random bits.
inline double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

template <class Eng>
double uniform01(Eng& eng) {
  return to_unit(eng());
}

// Master seed plus labelled sub-streams. Same (master, label, indices) -> same stream.
struct SeedSpec {
  std::uint64_t master = 0;

  std::uint64_t derive(std::string_view label) const { return hash_combine(mix64(master), hash_label(label)); }
  std::uint64_t derive(std::string_view label, std::uint64_t i) const { return hash_combine(derive(label), i); }
  std::uint64_t derive(std::string_view label, std::uint64_t i, std::uint64_t j) const {
    return hash_combine(derive(label, i), j);
  }
  SeedSpec child(std::string_view label, std::uint64_t i = 0) const { return SeedSpec{derive(label, i)}; }
  Engine engine(std::string_view label, std::uint64_t i = 0) const { return Engine(derive(label, i)); }
};

// Poisson(mean) by inversion of a single uniform. Monotone in mean for fixed u,
// which is what the coupled-intensity constructions rely on.
inline long poisson_inverse(double mean, double u) {
  if (mean <= 0.0) return 0;
  if (mean > 500.0) {
    using Policy = boost::math::policies::policy<
        boost::math::policies::discrete_quantile<boost::math::policies::integer_round_up>>;
    boost::math::poisson_distribution<double, Policy> dist(mean);
    if (u <= 0.0) return 0;
    return static_cast<long>(boost::math::quantile(dist, u));
  }
  double p = std::exp(-mean);
  long k = 0;
  double cdf = p;
  while (u >= cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    double next = cdf + p;
    if (next == cdf) break;
    cdf = next;
  }
  return k;
}

}  // namespace phail
