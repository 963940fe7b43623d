#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "rain.hpp"

namespace phail {

template <std::size_t D>
void write_arrivals_csv(std::ostream& os, const std::vector<Arrival<D>>& arrivals) {
  CsvRow head;
  head << "id" << "t";
  for (std::size_t k = 1; k <= D; ++k) head << "x" + std::to_string(k);
  head << "kind";
  for (std::size_t k = 1; k <= D; ++k) head << "param" + std::to_string(k);
  head << "sigma";
  os << head.str() << '\n';
  for (const auto& a : arrivals) {
    CsvRow row;
    row << a.id << a.t;
    for (double v : a.x) row << v;
    row << kind_name(kind_of<D>(a.shape));
    auto h = half_widths(a.shape);
    // cube and ball carry one parameter; the remaining columns repeat it
    for (double v : h) row << v;
    row << a.sigma;
    os << row.str() << '\n';
  }
}

template <std::size_t D>
std::vector<Arrival<D>> read_arrivals_csv(std::istream& is) {
  std::string line;
  std::vector<Arrival<D>> out;
  if (!std::getline(is, line)) return out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 2 * D + 4) throw ConfigError("arrival csv: wrong column count");
    Arrival<D> a;
    a.id = static_cast<std::uint64_t>(parse_int(f[0]));
    a.t = parse_double(f[1]);
    for (std::size_t k = 0; k < D; ++k) a.x[k] = parse_double(f[2 + k]);
    const std::string& kind = f[2 + D];
    std::array<double, D> p{};
    for (std::size_t k = 0; k < D; ++k) p[k] = parse_double(f[3 + D + k]);
    if (kind == "cube") a.shape = Cube{p[0]};
    else if (kind == "ball") a.shape = Ball{p[0]};
    else if (kind == "box") a.shape = Box<D>{p};
    else throw ConfigError("arrival csv: unknown kind '" + kind + "'");
    a.sigma = parse_double(f[3 + 2 * D]);
    out.push_back(a);
  }
  return out;
}

inline constexpr char kRainMagic[8] = {'P', 'H', 'R', 'A', 'I', 'N', '0', '1'};
inline constexpr std::uint32_t kRainVersion = 1;

namespace detail {
template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("arrival cache: truncated file");
  return v;
}
}  // namespace detail

// Host-endian binary cache: 16-byte header, then fixed-size records.
template <std::size_t D>
void write_arrivals_binary(std::ostream& os, const std::vector<Arrival<D>>& arrivals) {
  os.write(kRainMagic, 8);
  detail::put<std::uint32_t>(os, kRainVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(D));
  for (const auto& a : arrivals) {
    detail::put(os, a.id);
    detail::put(os, a.t);
    for (double v : a.x) detail::put(os, v);
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(kind_of<D>(a.shape)));
    for (double v : half_widths(a.shape)) detail::put(os, v);
    detail::put(os, a.sigma);
  }
}

template <std::size_t D>
std::vector<Arrival<D>> read_arrivals_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kRainMagic, 8) != 0) throw ConfigError("arrival cache: bad magic");
  if (detail::get<std::uint32_t>(is) != kRainVersion) throw ConfigError("arrival cache: unsupported version");
  if (detail::get<std::uint32_t>(is) != D) throw UsageError("arrival cache: dimension mismatch");
  std::vector<Arrival<D>> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    Arrival<D> a;
    a.id = detail::get<std::uint64_t>(is);
    a.t = detail::get<double>(is);
    for (auto& v : a.x) v = detail::get<double>(is);
    auto kind = static_cast<ShapeKind>(detail::get<std::uint64_t>(is));
    std::array<double, D> p{};
    for (auto& v : p) v = detail::get<double>(is);
    if (kind == ShapeKind::cube) a.shape = Cube{p[0]};
    else if (kind == ShapeKind::ball) a.shape = Ball{p[0]};
    else a.shape = Box<D>{p};
    a.sigma = detail::get<double>(is);
    out.push_back(a);
  }
  return out;
}

}  // namespace phail
