#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace bamld {

using Rng = std::mt19937_64;

/// One step of the splitmix64 output function.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Substream seed for a named component: splitmix64(master ^ fnv1a(tag)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) noexcept;

/// Substream seed for an indexed component, folding each part in turn.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> u(0, n - 1);
  return u(rng);
}

}  // namespace bamld
