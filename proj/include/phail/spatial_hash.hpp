#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "geometry.hpp"
#include "random.hpp"

namespace phail {

// Uniform grid buckets. An item is stored in every cell its bounding box touches,
// so a point lookup only has to read one bucket.
template <std::size_t D>
class SpatialHash {
 public:
  using Key = std::array<std::int64_t, D>;

  explicit SpatialHash(double cell = 1.0) : cell_(cell > 0 ? cell : 1.0) {}

  double cell_size() const { return cell_; }

  Key key(const Point<D>& x) const {
    Key k;
    for (std::size_t i = 0; i < D; ++i) k[i] = static_cast<std::int64_t>(std::floor(x[i] / cell_));
    return k;
  }

  template <class F>
  void for_cells(const Point<D>& lo, const Point<D>& hi, F&& f) const {
    Key a = key(lo), b = key(hi), c = a;
    while (true) {
      f(c);
      std::size_t i = 0;
      for (; i < D; ++i) {
        if (c[i] < b[i]) {
          ++c[i];
          break;
        }
        c[i] = a[i];
      }
      if (i == D) break;
    }
  }

  void insert(const Point<D>& lo, const Point<D>& hi, std::uint32_t item) {
    for_cells(lo, hi, [&](const Key& k) { buckets_[k].push_back(item); });
  }

  const std::vector<std::uint32_t>* bucket(const Key& k) const {
    auto it = buckets_.find(k);
    return it == buckets_.end() ? nullptr : &it->second;
  }

  const std::vector<std::uint32_t>* bucket_at(const Point<D>& x) const { return bucket(key(x)); }

 private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 0x243f6a8885a308d3ULL;
      for (auto v : k) h = hash_combine(h, static_cast<std::uint64_t>(v));
      return static_cast<std::size_t>(h);
    }
  };

  double cell_;
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> buckets_;
};

}  // namespace phail
