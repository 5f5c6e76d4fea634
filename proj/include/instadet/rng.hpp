#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace instadet {

// All randomness in the pipeline flows from one base seed through named
// substreams so that independent stages (dataset, split, init, dropout,
// baseline, ...) never share a stream and parallel runs agree with serial
// ones.

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_stream(std::uint64_t seed, std::string_view name) {
  return mix64(seed ^ fnv1a64(name));
}

// Per-record substream: stream seed XOR record index, run through the mixer.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::string_view name,
                                      std::uint64_t index) {
  return mix64(derive_stream(seed, name) ^ index);
}

// Deterministic RNG. mt19937_64 raw output is pinned by the standard, and the
// helpers below are built on raw output only, so sequences are identical
// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t u64() { return engine_(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

  // Unit-variance gaussian via Box-Muller (polar form avoided to keep the
  // draw count per call fixed at two).
  double gaussian() {
    double u1 = real01();
    while (u1 <= 0.0) u1 = real01();
    const double u2 = real01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // k distinct indices from [0, n), order of first occurrence in the draw.
  std::vector<std::size_t> sample_distinct(std::size_t k, std::size_t n);

 private:
  std::mt19937_64 engine_;
};

inline std::vector<std::size_t> Rng::sample_distinct(std::size_t k, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: first k positions are the sample.
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    std::swap(idx[i], idx[i + below(n - i)]);
  }
  idx.resize(std::min(k, n));
  return idx;
}

}  // namespace instadet
