#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pdfm {

/// Deterministic random stream. Wraps std::mt19937_64 but converts to
/// doubles in-house so that every sequence is fully specified by the seed,
/// independent of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  /// Unbiased integer in [0, n); rejection sampling.
  std::uint64_t below(std::uint64_t n);

  /// Derive a child seed for an integer-identified stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  /// Derive a child seed for a string-identified stream (e.g. a region id).
  static std::uint64_t derive(std::uint64_t seed, std::string_view name);

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by the deterministic stream above.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace pdfm
