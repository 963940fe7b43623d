#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace phail::stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double std_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Mean with a Student-t confidence interval.
inline Summary summarize(const std::vector<double>& v, double level = 0.95) {
  Summary s;
  s.n = v.size();
  s.mean = mean(v);
  s.sd = std::sqrt(variance(v));
  s.se = std_error(v);
  double q = 0.0;
  if (s.n >= 2) {
    boost::math::students_t t(static_cast<double>(s.n - 1));
    q = boost::math::quantile(t, 0.5 + level / 2.0);
  }
  s.ci_lo = s.mean - q * s.se;
  s.ci_hi = s.mean + q * s.se;
  return s;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval wilson(std::size_t k, std::size_t n, double level = 0.95) {
  if (n == 0) return {0.0, 1.0};
  boost::math::normal nd;
  double z = boost::math::quantile(nd, 0.5 + level / 2.0);
  double nn = static_cast<double>(n), ph = static_cast<double>(k) / nn;
  double den = 1.0 + z * z / nn;
  double c = (ph + z * z / (2 * nn)) / den;
  double h = z * std::sqrt(ph * (1 - ph) / nn + z * z / (4 * nn * nn)) / den;
  return {std::max(0.0, c - h), std::min(1.0, c + h)};
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean(x), my = mean(y), sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

// Asymptotic Kolmogorov survival function P(K > x).
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value (Stephens' correction).
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  TestResult r;
  if (a.empty() || b.empty()) return r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  double ne = na * nb / (na + nb), sq = std::sqrt(ne);
  r.statistic = d;
  r.p_value = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
  return r;
}

inline double chi2_sf(double stat, double df) {
  if (df <= 0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Goodness of fit; adjacent bins are merged left to right until each expects >= min_expected.
inline TestResult chi2_gof(const std::vector<double>& observed, const std::vector<double>& expected_prob,
                           double min_expected = 5.0) {
  double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> o, e;
  double co = 0.0, ce = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    co += observed[k];
    ce += expected_prob[k] * n;
    if (ce >= min_expected) {
      o.push_back(co);
      e.push_back(ce);
      co = ce = 0.0;
    }
  }
  if (!e.empty()) {
    o.back() += co;
    e.back() += ce;
  }
  TestResult r;
  for (std::size_t k = 0; k < o.size(); ++k) r.statistic += (o[k] - e[k]) * (o[k] - e[k]) / e[k];
  r.df = static_cast<double>(o.size()) - 1.0;
  r.p_value = chi2_sf(r.statistic, r.df);
  return r;
}

// Pearson independence test on a contingency table; empty rows/columns are dropped.
inline TestResult chi2_independence(const std::vector<std::vector<double>>& table) {
  std::vector<double> rows, cols;
  std::vector<std::size_t> keep_r, keep_c;
  std::size_t nc = table.empty() ? 0 : table[0].size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    double s = std::accumulate(table[i].begin(), table[i].end(), 0.0);
    if (s > 0) keep_r.push_back(i);
  }
  for (std::size_t j = 0; j < nc; ++j) {
    double s = 0.0;
    for (auto& row : table) s += row[j];
    if (s > 0) keep_c.push_back(j);
  }
  double n = 0.0;
  rows.assign(keep_r.size(), 0.0);
  cols.assign(keep_c.size(), 0.0);
  for (std::size_t a = 0; a < keep_r.size(); ++a)
    for (std::size_t b = 0; b < keep_c.size(); ++b) {
      double v = table[keep_r[a]][keep_c[b]];
      rows[a] += v;
      cols[b] += v;
      n += v;
    }
  TestResult r;
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) {
      double e = rows[a] * cols[b] / n;
      double o = table[keep_r[a]][keep_c[b]];
      r.statistic += (o - e) * (o - e) / e;
    }
  r.df = static_cast<double>((rows.size() - 1) * (cols.size() - 1));
  r.p_value = chi2_sf(r.statistic, r.df);
  return r;
}

// One-sided Mann-Whitney U, normal approximation with tie correction.
// p-value for the alternative "values in a tend to be smaller than values in b".
inline TestResult mann_whitney_less(const std::vector<double>& a, const std::vector<double>& b) {
  struct Item {
    double v;
    int g;
  };
  std::vector<Item> all;
  all.reserve(a.size() + b.size());
  for (double x : a) all.push_back({x, 0});
  for (double x : b) all.push_back({x, 1});
  std::sort(all.begin(), all.end(), [](const Item& l, const Item& r) { return l.v < r.v; });
  double ra = 0.0, tie_term = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].g == 0) ra += rank;
    i = j;
  }
  double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size()), n = n1 + n2;
  TestResult r;
  r.statistic = ra - n1 * (n1 + 1) / 2.0;
  double mu = n1 * n2 / 2.0;
  double var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
  if (var <= 0) return r;
  double z = (r.statistic - mu + 0.5) / std::sqrt(var);
  boost::math::normal nd;
  r.p_value = boost::math::cdf(nd, z);
  return r;
}

}  // namespace phail::stats
