#pragma once

#include <cstdint>
#include <string_view>

namespace clx::rng {

// Counter-based generator: every draw is a stateless hash of (seed, index),
// so consumers can draw in any order, from any thread, and still reproduce
// a run bit for bit. The finalizer is the splitmix64 mixing function.
constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform double in the open interval (0,1); never returns 0 or 1, so a
// comparison against a probability threshold is unambiguous at both ends.
constexpr double u01(std::uint64_t seed, std::uint64_t index) {
  return static_cast<double>((mix(seed, index) >> 11) + 0.5) * 0x1p-53;
}

// Unbiased-enough integer in [0, n) via the multiply-shift reduction.
// n must be nonzero.
constexpr std::uint64_t below(std::uint64_t seed, std::uint64_t index,
                              std::uint64_t n) {
  using u128 = unsigned __int128;
  return static_cast<std::uint64_t>((u128(mix(seed, index)) * u128(n)) >> 64);
}

// Derives an independent stream seed from a parent seed and a textual label.
// Not cryptographic; collisions between distinct labels are negligible for
// the handful of substreams a run creates.
constexpr std::uint64_t derive(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return mix(seed ^ h, 0x5EEDULL);
}

// Convenience wrapper for strictly sequential consumption of one stream.
class Sequence {
 public:
  explicit Sequence(std::uint64_t seed, std::uint64_t start_index = 0)
      : seed_(seed), next_(start_index) {}

  std::uint64_t bits() { return mix(seed_, next_++); }
  double uniform() { return u01(seed_, next_++); }
  std::uint64_t below(std::uint64_t n) { return rng::below(seed_, next_++, n); }
  std::uint64_t index() const { return next_; }

 private:
  std::uint64_t seed_;
  std::uint64_t next_;
};

}  // namespace clx::rng
