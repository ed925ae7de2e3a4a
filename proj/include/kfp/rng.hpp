#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace kfp {

// Counter-based generator: every draw is a pure hash of (seed, stream, index),
// so scans can be partitioned across threads in any order and still produce
// the same numbers. Streams are derived from short labels.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t stream(std::string_view label) {
    // FNV-1a
    std::uint64_t h = 1469598103934665603ull;
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  std::uint64_t bits(std::uint64_t stream_id, std::uint64_t i) const {
    return mix(seed_ ^ rotl(stream_id, 17), i);
  }

  // uniform in [0, 1)
  double uniform(std::uint64_t stream_id, std::uint64_t i) const {
    return static_cast<double>(bits(stream_id, i) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t stream_id, std::uint64_t i, double lo,
                 double hi) const {
    return lo + (hi - lo) * uniform(stream_id, i);
  }

  // standard normal via Box-Muller on two decorrelated counters
  double normal(std::uint64_t stream_id, std::uint64_t i) const {
    const double u1 = uniform(stream_id, 2 * i);
    const double u2 = uniform(stream_id, 2 * i + 1);
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(6.283185307179586476925287 * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }
  // splitmix64 finalizer applied to seed+index
  static std::uint64_t mix(std::uint64_t s, std::uint64_t i) {
    std::uint64_t z = s + 0x9e3779b97f4a7c15ull * (i + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

// Halton low-discrepancy sequence, dimensions up to 6 (bases 2..13).
inline double halton(std::uint64_t index, int dim) {
  static constexpr int bases[6] = {2, 3, 5, 7, 11, 13};
  const int b = bases[dim];
  double f = 1.0, r = 0.0;
  std::uint64_t i = index + 1;  // skip the all-zeros point
  while (i > 0) {
    f /= b;
    r += f * static_cast<double>(i % b);
    i /= b;
  }
  return r;
}

}  // namespace kfp
