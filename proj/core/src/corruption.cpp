#include "clx/corruption.hpp"

#include <cmath>

#include "clx/error.hpp"
#include "clx/rng.hpp"

namespace clx {

void validate(const CorruptionSpec& spec) {
  if (!std::isfinite(spec.gamma1) || spec.gamma1 < 0.0 || spec.gamma1 > 1.0)
    throw ConfigError("gamma1 must lie in [0,1]");
  if (!std::isfinite(spec.gamma2) || spec.gamma2 < 0.0 || spec.gamma2 > 1.0)
    throw ConfigError("gamma2 must lie in [0,1]");
  if (spec.gamma1 + spec.gamma2 > 1.0)
    throw ConfigError("gamma1 + gamma2 must not exceed 1");
}

Bytes corrupt_bits(std::span<const std::uint8_t> packed,
                   const CorruptionSpec& spec) {
  validate(spec);
  Bytes out(packed.begin(), packed.end());
  if (spec.gamma1 == 0.0 && spec.gamma2 == 0.0) return out;

  const double g1 = spec.gamma1;
  const double g12 = spec.gamma1 + spec.gamma2;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t byte = 0; byte < std::ptrdiff_t(out.size()); ++byte) {
    std::uint8_t v = out[std::size_t(byte)];
    for (int k = 0; k < 8; ++k) {
      const double r = rng::u01(spec.seed, std::uint64_t(byte) * 8 + k);
      const std::uint8_t mask = std::uint8_t(0x80u >> k);
      if (r < g1)
        v ^= mask;
      else if (r < g12)
        v &= std::uint8_t(~mask);
    }
    out[std::size_t(byte)] = v;
  }
  return out;
}

void corrupt_unit_bits(std::span<std::uint8_t> bits,
                       const CorruptionSpec& spec) {
  validate(spec);
  const double g1 = spec.gamma1;
  const double g12 = spec.gamma1 + spec.gamma2;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const double r = rng::u01(spec.seed, i);
    if (r < g1)
      bits[i] ^= 1;
    else if (r < g12)
      bits[i] = 0;
  }
}

AnnotatedStream corrupt_stream(const AnnotatedStream& stream,
                               const CorruptionSpec& spec) {
  AnnotatedStream out;
  out.bytes = corrupt_bits(stream.bytes, spec);
  out.annotations = stream.annotations;
  out.meta = stream.meta;
  return out;
}

}  // namespace clx
