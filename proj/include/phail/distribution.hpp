#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"
#include "random.hpp"

namespace phail {

// Named one-dimensional law sampled by inversion, so one uniform fully determines a draw.
struct Distribution {
  enum class Kind { deterministic, uniform, exponential, bounded_pareto, pareto };

  Kind kind = Kind::deterministic;
  double a = 0.0;  // value | lo | mean | alpha | alpha
  double b = 0.0;  //       | hi |      | lo    | lo
  double c = 0.0;  //       |    |      | hi    |

  static Distribution constant(double v) { return {Kind::deterministic, v, 0.0, 0.0}; }
  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi, 0.0}; }
  static Distribution exponential(double mean) { return {Kind::exponential, mean, 0.0, 0.0}; }
  static Distribution bounded_pareto(double alpha, double lo, double hi) { return {Kind::bounded_pareto, alpha, lo, hi}; }
  // Unbounded Pareto: heavy tailed, accepted but flagged in run metadata.
  static Distribution pareto(double alpha, double lo) { return {Kind::pareto, alpha, lo, 0.0}; }

  void validate() const {
    auto bad = [](const std::string& m) { throw ConfigError("distribution: " + m); };
    auto finite = [](double v) { return std::isfinite(v); };
    switch (kind) {
      case Kind::deterministic:
        if (!finite(a) || a < 0) bad("deterministic value must be finite and >= 0");
        break;
      case Kind::uniform:
        if (!finite(a) || !finite(b) || a < 0 || b < a) bad("uniform needs 0 <= lo <= hi");
        break;
      case Kind::exponential:
        if (!finite(a) || a <= 0) bad("exponential mean must be > 0");
        break;
      case Kind::bounded_pareto:
        if (!(a > 0) || !(b > 0) || !(c > b) || !finite(c)) bad("bounded_pareto needs alpha > 0, 0 < lo < hi");
        break;
      case Kind::pareto:
        if (!(a > 0) || !(b > 0) || !finite(b)) bad("pareto needs alpha > 0, lo > 0");
        break;
    }
  }

  bool heavy_tailed() const { return kind == Kind::pareto; }

  double quantile(double u) const {
    switch (kind) {
      case Kind::deterministic:
        return a;
      case Kind::uniform:
        return a + (b - a) * u;
      case Kind::exponential:
        return -a * std::log1p(-u);
      case Kind::bounded_pareto: {
        double r = std::pow(b / c, a);
        return b * std::pow(1.0 - u * (1.0 - r), -1.0 / a);
      }
      case Kind::pareto:
        return b * std::pow(1.0 - u, -1.0 / a);
    }
    return 0.0;
  }

  double mean() const {
    switch (kind) {
      case Kind::deterministic:
        return a;
      case Kind::uniform:
        return 0.5 * (a + b);
      case Kind::exponential:
        return a;
      case Kind::bounded_pareto: {
        if (a == 1.0) return b * c / (c - b) * std::log(c / b);
        double num = std::pow(b, a) / (1.0 - std::pow(b / c, a));
        return num * a / (a - 1.0) * (std::pow(b, 1.0 - a) - std::pow(c, 1.0 - a));
      }
      case Kind::pareto:
        return a > 1.0 ? a * b / (a - 1.0) : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  template <class Eng>
  double sample(Eng& eng) const {
    return quantile(uniform01(eng));
  }

  std::string name() const {
    switch (kind) {
      case Kind::deterministic: return "deterministic";
      case Kind::uniform: return "uniform";
      case Kind::exponential: return "exponential";
      case Kind::bounded_pareto: return "bounded_pareto";
      case Kind::pareto: return "pareto";
    }
    return "?";
  }
};

}  // namespace phail
