#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>

namespace rwre {

/// Largest lattice dimension supported by the fixed-size site type.
inline constexpr int kMaxDim = 4;

/// A point of Z^d. Coordinates beyond the active dimension are kept at zero,
/// so comparison and hashing work without knowing d.
struct Site {
  std::array<std::int64_t, kMaxDim> c{};

  constexpr std::int64_t& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  constexpr std::int64_t operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  friend constexpr auto operator<=>(const Site&, const Site&) = default;

  constexpr Site& operator+=(const Site& o) {
    for (int i = 0; i < kMaxDim; ++i) (*this)[i] += o[i];
    return *this;
  }
  constexpr Site& operator-=(const Site& o) {
    for (int i = 0; i < kMaxDim; ++i) (*this)[i] -= o[i];
    return *this;
  }
  friend constexpr Site operator+(Site a, const Site& b) { return a += b; }
  friend constexpr Site operator-(Site a, const Site& b) { return a -= b; }
};

constexpr Site origin() { return Site{}; }

/// Unit vector s*e_axis (s = +1 or -1).
constexpr Site unit(int axis, int sign = 1) {
  Site s{};
  s[axis] = sign;
  return s;
}

inline std::int64_t norm1(const Site& s) {
  std::int64_t n = 0;
  for (int i = 0; i < kMaxDim; ++i) n += std::llabs(s[i]);
  return n;
}

inline std::int64_t norm_inf(const Site& s) {
  std::int64_t n = 0;
  for (int i = 0; i < kMaxDim; ++i) n = std::max<std::int64_t>(n, std::llabs(s[i]));
  return n;
}

inline std::int64_t norm2_sq(const Site& s) {
  std::int64_t n = 0;
  for (int i = 0; i < kMaxDim; ++i) n += s[i] * s[i];
  return n;
}

inline std::int64_t dist1(const Site& a, const Site& b) { return norm1(a - b); }

std::string to_string(const Site& s, int dim);

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (int i = 0; i < kMaxDim; ++i) {
      h ^= static_cast<std::uint64_t>(s[i]) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Nearest-neighbour moves are encoded as small integers:
/// 0 = hold, 2i+1 = +e_i, 2i+2 = -e_i (i zero-based).
using MoveCode = std::uint8_t;

inline constexpr MoveCode kHold = 0;

constexpr MoveCode move_code(int axis, int sign) {
  return static_cast<MoveCode>(2 * axis + (sign > 0 ? 1 : 2));
}
constexpr int move_axis(MoveCode m) { return (m - 1) / 2; }
constexpr int move_sign(MoveCode m) { return (m % 2 == 1) ? 1 : -1; }

constexpr Site move_vector(MoveCode m) {
  if (m == kHold) return Site{};
  return unit(move_axis(m), move_sign(m));
}

/// Number of non-hold moves in dimension d.
constexpr int num_moves(int dim) { return 2 * dim; }

/// Dense indexing of the box [lo, lo+side-1]^d.
class Box {
 public:
  Box() = default;
  Box(int dim, std::int64_t lo, std::int64_t side) : dim_(dim), lo_(lo), side_(side) {
    size_ = 1;
    for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(side);
  }
  /// The centred box [-r, r]^d.
  static Box centred(int dim, std::int64_t r) { return Box(dim, -r, 2 * r + 1); }

  int dim() const { return dim_; }
  std::int64_t lo() const { return lo_; }
  std::int64_t hi() const { return lo_ + side_ - 1; }
  std::int64_t side() const { return side_; }
  std::size_t size() const { return size_; }

  bool contains(const Site& s) const {
    for (int i = 0; i < dim_; ++i)
      if (s[i] < lo_ || s[i] > hi()) return false;
    return true;
  }
  std::size_t index(const Site& s) const {
    std::size_t idx = 0;
    for (int i = dim_ - 1; i >= 0; --i) idx = idx * static_cast<std::size_t>(side_) + static_cast<std::size_t>(s[i] - lo_);
    return idx;
  }
  Site site(std::size_t idx) const {
    Site s{};
    for (int i = 0; i < dim_; ++i) {
      s[i] = lo_ + static_cast<std::int64_t>(idx % static_cast<std::size_t>(side_));
      idx /= static_cast<std::size_t>(side_);
    }
    return s;
  }
  /// Periodic reduction of an arbitrary site into the box.
  Site wrap(const Site& s) const {
    Site r{};
    for (int i = 0; i < dim_; ++i) {
      std::int64_t v = (s[i] - lo_) % side_;
      if (v < 0) v += side_;
      r[i] = v + lo_;
    }
    return r;
  }

 private:
  int dim_ = 0;
  std::int64_t lo_ = 0;
  std::int64_t side_ = 0;
  std::size_t size_ = 0;
};

}  // namespace rwre
