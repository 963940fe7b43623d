#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <variant>

namespace phail {

template <std::size_t D>
using Point = std::array<double, D>;

struct Cube {
  double half_side = 0.0;
  bool operator==(const Cube&) const = default;
};

struct Ball {
  double radius = 0.0;
  bool operator==(const Ball&) const = default;
};

template <std::size_t D>
struct Box {
  std::array<double, D> half_extents{};
  bool operator==(const Box&) const = default;
};

// Closed grain centered at the origin.
template <std::size_t D>
using Shape = std::variant<Cube, Ball, Box<D>>;

enum class ShapeKind { cube, ball, box };

template <std::size_t D>
ShapeKind kind_of(const Shape<D>& s) {
  return static_cast<ShapeKind>(s.index());
}

inline const char* kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::cube: return "cube";
    case ShapeKind::ball: return "ball";
    case ShapeKind::box: return "box";
  }
  return "?";
}

template <std::size_t D>
bool is_box_like(const Shape<D>& s) {
  return !std::holds_alternative<Ball>(s);
}

// Half-widths of the axis-aligned bounding box.
template <std::size_t D>
std::array<double, D> half_widths(const Shape<D>& s) {
  std::array<double, D> h{};
  if (auto c = std::get_if<Cube>(&s)) h.fill(c->half_side);
  else if (auto b = std::get_if<Ball>(&s)) h.fill(b->radius);
  else h = std::get<Box<D>>(s).half_extents;
  return h;
}

template <std::size_t D>
double diameter(const Shape<D>& s) {
  if (auto b = std::get_if<Ball>(&s)) return 2.0 * b->radius;
  auto h = half_widths(s);
  double q = 0.0;
  for (double v : h) q += v * v;
  return 2.0 * std::sqrt(q);
}

template <std::size_t D>
bool contains(const Shape<D>& s, const Point<D>& center, const Point<D>& x) {
  if (auto b = std::get_if<Ball>(&s)) {
    double q = 0.0;
    for (std::size_t k = 0; k < D; ++k) q += (x[k] - center[k]) * (x[k] - center[k]);
    return q <= b->radius * b->radius;
  }
  auto h = half_widths(s);
  for (std::size_t k = 0; k < D; ++k)
    if (std::abs(x[k] - center[k]) > h[k]) return false;
  return true;
}

// Closed sets: tangency counts as intersection.
template <std::size_t D>
bool intersects(const Shape<D>& a, const Point<D>& xa, const Shape<D>& b, const Point<D>& xb) {
  const Ball* ba = std::get_if<Ball>(&a);
  const Ball* bb = std::get_if<Ball>(&b);
  if (ba && bb) {
    double q = 0.0;
    for (std::size_t k = 0; k < D; ++k) q += (xa[k] - xb[k]) * (xa[k] - xb[k]);
    double r = ba->radius + bb->radius;
    return q <= r * r;
  }
  if (!ba && !bb) {
    auto ha = half_widths(a), hb = half_widths(b);
    for (std::size_t k = 0; k < D; ++k)
      if (std::abs(xa[k] - xb[k]) > ha[k] + hb[k]) return false;
    return true;
  }
  // box vs ball: squared distance from ball center to the box
  const Ball* ball = ba ? ba : bb;
  const Point<D>& xc = ba ? xa : xb;
  const Point<D>& xbox = ba ? xb : xa;
  auto h = half_widths(ba ? b : a);
  double q = 0.0;
  for (std::size_t k = 0; k < D; ++k) {
    double gap = std::abs(xc[k] - xbox[k]) - h[k];
    if (gap > 0) q += gap * gap;
  }
  return q <= ball->radius * ball->radius;
}

// inner (placed at ci) is a subset of outer (placed at co).
template <std::size_t D>
bool shape_within(const Shape<D>& inner, const Point<D>& ci, const Shape<D>& outer, const Point<D>& co) {
  auto hi = half_widths(inner);
  if (!std::holds_alternative<Ball>(outer)) {
    auto ho = half_widths(outer);
    for (std::size_t k = 0; k < D; ++k)
      if (std::abs(ci[k] - co[k]) + hi[k] > ho[k]) return false;
    return true;
  }
  double r = std::get<Ball>(outer).radius;
  if (auto b = std::get_if<Ball>(&inner)) {
    double q = 0.0;
    for (std::size_t k = 0; k < D; ++k) q += (ci[k] - co[k]) * (ci[k] - co[k]);
    return std::sqrt(q) + b->radius <= r;
  }
  double q = 0.0;
  for (std::size_t k = 0; k < D; ++k) {
    double far = std::abs(ci[k] - co[k]) + hi[k];
    q += far * far;
  }
  return q <= r * r;
}

}  // namespace phail
