// Hail on a line: unit cubes, unit heights. Prints the growth height H and the
// FIFO workload W along the window at a few times.

#include <cstdlib>
#include <iostream>

#include "phail/precedence.hpp"
#include "phail/rain.hpp"

int main(int argc, char** argv) {
  double lambda = argc > 1 ? std::atof(argv[1]) : 0.15;
  phail::RainConfig<1> cfg;
  cfg.lambda = lambda;
  cfg.lo = {0.0};
  cfg.hi = {40.0};
  cfg.t1 = 60.0;
  cfg.shape = {phail::ShapeKind::cube, phail::Distribution::constant(1.0)};
  auto rain = phail::sample_rain(cfg, phail::SeedSpec{2024});
  auto dag = phail::build_dag(rain);
  auto s = phail::evaluate(dag, rain);
  std::cout << "lambda " << lambda << ": " << rain.size() << " arrivals, " << dag.edge_count() << " edges\n";
  for (double t : {15.0, 30.0, 60.0}) {
    std::cout << "t=" << t << "\n  x   H      W\n";
    for (double x = 0.0; x <= 40.0; x += 5.0) {
      phail::Point<1> p{x};
      std::cout << "  " << x << "\t" << phail::height_at(dag, rain, s, p, t) << "\t"
                << phail::workload_at(dag, rain, s, p, t) << "\n";
    }
  }
}
