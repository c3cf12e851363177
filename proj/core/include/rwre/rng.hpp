#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "rwre/lattice.hpp"

namespace rwre {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ mix64(v));
}

constexpr std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(seed);
  for (auto w : words) h = hash_combine(h, w);
  return h;
}

/// FNV-1a of a tag string, used to separate hash domains ("env", "coin", ...).
constexpr std::uint64_t tag_hash(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_site(std::uint64_t seed, std::uint64_t tag, const Site& s) {
  std::uint64_t h = hash_combine(mix64(seed), tag);
  for (int i = 0; i < kMaxDim; ++i) h = hash_combine(h, static_cast<std::uint64_t>(s[i]));
  return h;
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1], safe for logarithms.
constexpr double unit_double_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Seed for task `index` of stream `stream` under `master`.
inline std::uint64_t task_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
  return hash_words(master, {tag_hash(stream), index});
}

/// Per-task sequential generator. Sampling helpers avoid std distributions so
/// streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return unit_double(engine_()); }
  double uniform_open() { return unit_double_open(engine_()); }
  bool bernoulli(double p) { return uniform() < p; }
  double exponential() { return -std::log(uniform_open()); }
  double normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rwre
