#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace seqdml::rng {

// SplitMix64 finalizer. Used to mix seeds so that derived streams are
// decorrelated even when the inputs differ in a single bit.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

// FNV-1a over a short label; lets call sites derive role-specific streams
// from readable tags instead of magic numbers.
inline std::uint64_t tag(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
  return mix(seed, salt);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t salt1,
                            std::uint64_t salt2) {
  return mix(mix(seed, salt1), salt2);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t salt1,
                            std::uint64_t salt2, std::uint64_t salt3) {
  return mix(mix(mix(seed, salt1), salt2), salt3);
}

using Engine = std::mt19937_64;

inline Engine engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

// Uniform on [0,1) with 53-bit resolution. std::uniform_real_distribution is
// implementation-defined, which would break bit-reproducibility guarantees.
inline double uniform01(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t below(Engine& g, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = g();
  while (x >= limit) x = g();
  return x % n;
}

// Box-Muller with an internal spare. std::normal_distribution is likewise
// implementation-defined, so we draw our own.
class NormalDraw {
 public:
  double operator()(Engine& g) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01(g);  // (0, 1]
    const double u2 = uniform01(g);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  void reset() { has_spare_ = false; }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// In-place Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[below(g, i)]);
  }
}

}  // namespace seqdml::rng
