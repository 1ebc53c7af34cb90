#include "rwre/lattice.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace rwre {

void check_dimension(int dimension) {
  if (dimension < 1 || dimension > kMaxDimension) {
    throw std::invalid_argument("dimension must lie in [1, " + std::to_string(kMaxDimension) + "], got " +
                                std::to_string(dimension));
  }
}

std::vector<Direction> all_directions(int dimension) {
  std::vector<Direction> out;
  out.reserve(static_cast<std::size_t>(num_directions(dimension)));
  for (int k = 0; k < num_directions(dimension); ++k) {
    out.emplace_back(k);
  }
  return out;
}

Direction parse_direction(std::string_view text, int dimension) {
  auto fail = [&] {
    return std::invalid_argument("cannot parse direction '" + std::string(text) + "' (expected e.g. +e1 or -e2)");
  };
  if (text.size() < 3 || (text[0] != '+' && text[0] != '-') || text[1] != 'e') {
    throw fail();
  }
  int axis = 0;
  const auto* first = text.data() + 2;
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, axis);
  if (ec != std::errc{} || ptr != last || axis < 1 || axis > dimension) {
    throw fail();
  }
  return text[0] == '+' ? Direction::positive(axis - 1) : Direction::negative(axis - 1);
}

std::string to_string(Direction e) {
  return std::string(e.sign() > 0 ? "+e" : "-e") + std::to_string(e.axis() + 1);
}

std::int64_t l1_norm(const Site& x) {
  std::int64_t s = 0;
  for (auto c : x) s += c < 0 ? -c : c;
  return s;
}

double l1_norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double c : x) s += std::abs(c);
  return s;
}

bool Box::contains(const Site& x) const {
  if (x.size() != lo.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  }
  return true;
}

std::int64_t Box::extent(int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  return hi[a] - lo[a] + 1;
}

std::int64_t Box::volume() const {
  constexpr std::int64_t kCap = std::int64_t{1} << 62;
  if (lo.empty() || lo.size() != hi.size()) {
    throw std::invalid_argument("box corners must share a non-zero dimension");
  }
  std::int64_t v = 1;
  for (int k = 0; k < dimension(); ++k) {
    const auto len = extent(k);
    if (len <= 0) throw std::invalid_argument("box is empty along axis " + std::to_string(k + 1));
    if (v > kCap / len) throw RegionError("box volume overflows the addressable index space");
    v *= len;
  }
  return v;
}

std::int64_t Box::linear_index(const Site& x) const {
  std::int64_t idx = 0;
  for (int k = dimension() - 1; k >= 0; --k) {
    idx = idx * extent(k) + (x[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)]);
  }
  return idx;
}

Site Box::site_at(std::int64_t index) const {
  Site x(lo.size());
  site_at(index, x);
  return x;
}

void Box::site_at(std::int64_t index, Site& out) const {
  out.resize(lo.size());
  for (int k = 0; k < dimension(); ++k) {
    const auto len = extent(k);
    out[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)] + index % len;
    index /= len;
  }
}

Box Box::expanded(std::int64_t margin) const {
  Box b = *this;
  for (auto& c : b.lo) c -= margin;
  for (auto& c : b.hi) c += margin;
  return b;
}

Box Box::centered(int dimension, std::int64_t radius) {
  Box b{Site(static_cast<std::size_t>(dimension), -radius), Site(static_cast<std::size_t>(dimension), radius)};
  return b;
}

Box Box::ray(int dimension, Direction e, std::int64_t length) {
  Box b{origin(dimension), origin(dimension)};
  const auto a = static_cast<std::size_t>(e.axis());
  if (e.sign() > 0) {
    b.hi[a] = length;
  } else {
    b.lo[a] = -length;
  }
  return b;
}

}  // namespace rwre
