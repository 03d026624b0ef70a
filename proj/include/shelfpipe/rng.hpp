#pragma once

#include <cmath>
#include <cstdint>

namespace shelfpipe {

// SplitMix64. Chosen over the std engines because its output is fully
// specified by this code alone: the same (seed, call sequence) yields the
// same values on every platform, which the synthetic generator relies on
// for byte-identical datasets. Per-image substreams are derived as
// seed XOR image index.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, bound). Multiply-shift; negligible bias for our bounds.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Box-Muller, two uniforms per draw (no cached spare, keeps the stream
  // position independent of call history).
  double next_gaussian(double mean, double sd) {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return mean + sd * z;
  }

  // Knuth's product method; fine for the small rates used here.
  int next_poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    double limit = std::exp(-lambda);
    double prod = next_double();
    int k = 0;
    while (prod > limit) {
      prod *= next_double();
      ++k;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to derive per-image noise substreams from string ids.
inline std::uint64_t fnv1a64(const char* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace shelfpipe
