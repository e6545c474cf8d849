#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace omahgnn {

// Stream names used across the library.
inline constexpr std::string_view kStreamInitW = "init-w";
inline constexpr std::string_view kStreamInitA = "init-a";
inline constexpr std::string_view kStreamInitMwn = "init-mwn";
inline constexpr std::string_view kStreamSynth = "synth";
inline constexpr std::string_view kStreamBatch = "batch";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for one named component, derived from the run seed.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return std::mt19937_64(splitmix64(seed ^ splitmix64(h)));
}

/// Uniform in [lo, hi) using the top 53 bits; identical across standard libraries.
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(std::mt19937_64& gen, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform(gen, 0.0, 1.0) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

/// Box-Muller; one draw per call.
inline double standard_normal(std::mt19937_64& gen) {
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform(gen, 0.0, 1.0);
  const double u2 = uniform(gen, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& gen) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(gen, i)]);
}

}  // namespace omahgnn
