#pragma once

// Flood fill over explicit 2-D grids: balls are joined when their square
// footprints share at least one marked cell. Kept deliberately naive.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

namespace oracle {

struct Ball2 {
  std::int64_t x, y;
  int r;
  double sigma;
};

struct Clump2 {
  std::set<std::pair<std::int64_t, std::int64_t>> sites;
  double sigma_hat = 0.0;
};

// Region [lo, hi]^2; balls clipped to it.
inline std::vector<Clump2> flood_clumps(const std::vector<Ball2>& balls, std::int64_t lo, std::int64_t hi) {
  std::vector<std::set<std::pair<std::int64_t, std::int64_t>>> cover(balls.size());
  for (std::size_t b = 0; b < balls.size(); ++b)
    for (auto x = balls[b].x - balls[b].r; x <= balls[b].x + balls[b].r; ++x)
      for (auto y = balls[b].y - balls[b].r; y <= balls[b].y + balls[b].r; ++y)
        if (x >= lo && x <= hi && y >= lo && y <= hi) cover[b].insert({x, y});
  std::vector<int> label(balls.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < balls.size(); ++s) {
    if (label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      auto a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < balls.size(); ++b) {
        if (label[b] >= 0) continue;
        bool share = std::any_of(cover[a].begin(), cover[a].end(), [&](auto& c) { return cover[b].count(c) > 0; });
        if (share) {
          label[b] = next;
          stack.push_back(b);
        }
      }
    }
    ++next;
  }
  std::vector<Clump2> out(static_cast<std::size_t>(next));
  for (std::size_t b = 0; b < balls.size(); ++b) {
    auto& c = out[static_cast<std::size_t>(label[b])];
    c.sites.insert(cover[b].begin(), cover[b].end());
    c.sigma_hat += balls[b].sigma;
  }
  return out;
}

}  // namespace oracle
