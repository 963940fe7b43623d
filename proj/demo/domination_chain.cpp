// The five hail models at a handful of points: each column dominates the one
// before it on every sample.

#include <iostream>

#include "phail/discretize.hpp"
#include "phail/rain.hpp"

int main() {
  phail::RainConfig<2> cfg;
  cfg.lambda = 0.1;
  cfg.lo = {0.0, 0.0};
  cfg.hi = {10.0, 10.0};
  cfg.t1 = 10.0;
  auto rain = phail::sample_rain(cfg, phail::SeedSpec{7});
  auto qs = phail::chain_query_grid<2>({2, 2}, {8, 8}, 10.0, 0, 99);
  auto rep = phail::chain_check(rain, qs);
  std::cout << "x1\tx2\tt\tM1\tM2\tM3\tM4\tM5\n";
  for (std::size_t i = 0; i < qs.size(); i += 37) {
    std::cout << qs[i].x[0] << "\t" << qs[i].x[1] << "\t" << qs[i].t;
    for (double v : rep.values[i]) std::cout << "\t" << v;
    std::cout << "\n";
  }
  std::cout << qs.size() << " queries, " << rep.violations << " violations\n";
  return rep.ok() ? 0 : 1;
}
