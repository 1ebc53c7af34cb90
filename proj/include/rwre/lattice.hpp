#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rwre {

inline constexpr int kMaxDimension = 8;

/// Thrown when a site lies outside a realized region or a box would overflow
/// the addressable index space.
class RegionError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Thrown when an exact enumeration or a sampling horizon exceeds its cap.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Site = std::vector<std::int64_t>;

/// One of the 2d nearest-neighbour unit vectors. Index 2k is +e_{k+1} and
/// index 2k+1 is -e_{k+1}, so negation flips the lowest bit.
class Direction {
 public:
  constexpr Direction() = default;
  constexpr explicit Direction(int index) : index_(index) {}

  static constexpr Direction positive(int axis) { return Direction(2 * axis); }
  static constexpr Direction negative(int axis) { return Direction(2 * axis + 1); }

  constexpr int index() const { return index_; }
  constexpr int axis() const { return index_ / 2; }
  constexpr int sign() const { return (index_ & 1) != 0 ? -1 : 1; }
  constexpr Direction operator-() const { return Direction(index_ ^ 1); }

  constexpr auto operator<=>(const Direction&) const = default;

 private:
  int index_ = 0;
};

constexpr int num_directions(int dimension) { return 2 * dimension; }

std::vector<Direction> all_directions(int dimension);

/// Parses "+e1", "-e2", ... (1-based axis).
Direction parse_direction(std::string_view text, int dimension);
std::string to_string(Direction e);

/// <v, e> for a real vector v.
inline double dot(const std::vector<double>& v, Direction e) {
  return e.sign() * v[static_cast<std::size_t>(e.axis())];
}

inline void advance(Site& x, Direction e, std::int64_t times = 1) {
  x[static_cast<std::size_t>(e.axis())] += e.sign() * times;
}

inline Site origin(int dimension) { return Site(static_cast<std::size_t>(dimension), 0); }

std::int64_t l1_norm(const Site& x);
double l1_norm(const std::vector<double>& x);

void check_dimension(int dimension);

/// Axis-aligned box with inclusive corners.
struct Box {
  Site lo;
  Site hi;

  int dimension() const { return static_cast<int>(lo.size()); }
  bool contains(const Site& x) const;
  std::int64_t extent(int axis) const;
  /// Number of sites; throws RegionError when the count exceeds 2^62.
  std::int64_t volume() const;
  std::int64_t linear_index(const Site& x) const;
  Site site_at(std::int64_t index) const;
  void site_at(std::int64_t index, Site& out) const;
  Box expanded(std::int64_t margin) const;

  /// [-radius, radius]^d
  static Box centered(int dimension, std::int64_t radius);
  /// The segment {0, e, 2e, ..., length*e}.
  static Box ray(int dimension, Direction e, std::int64_t length);

  bool operator==(const Box&) const = default;
};

}  // namespace rwre
