#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace stsnn {

/// Seeded random source with platform-independent distributions.
///
/// The standard <random> distributions are implementation-defined, so the
/// engine is wrapped and uniform/normal/integer draws are computed here. This
/// keeps trained weights bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Box-Muller; no cached second variate so the stream position is explicit.
  double normal(double mean, double sd);
  /// Uniform integer in [0, n), rejection sampled. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent sub-seed from a base seed and a label (splitmix64 over FNV-1a).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace stsnn
