#pragma once

#include <cstdint>
#include <span>

#include "clx/stream.hpp"

namespace clx {

// Channel model: independently per bit, flip with probability gamma1 or
// force to 0 with probability gamma2. Length is always preserved; a lost
// bit is filled with 0, never deleted.
struct CorruptionSpec {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const CorruptionSpec&) const = default;
};

// gamma1, gamma2 ∈ [0,1] and gamma1 + gamma2 ≤ 1, else a configuration error.
void validate(const CorruptionSpec& spec);

// Applies the per-bit rule to packed bits (MSB first): with r uniform on
// (0,1) drawn at the bit's absolute index, r < γ1 flips, γ1 ≤ r < γ1+γ2
// zeroes, otherwise the bit passes through. Draws are counter-indexed, so
// any chunking of the input reproduces the sequential output exactly.
Bytes corrupt_bits(std::span<const std::uint8_t> packed,
                   const CorruptionSpec& spec);

// Same rule over unpacked 0/1 bit values, in place; used by training-time
// augmentation on classifier windows.
void corrupt_unit_bits(std::span<std::uint8_t> bits, const CorruptionSpec& spec);

// Corrupts the payload bytes only; annotations and meta pass through
// unchanged, so ground truth survives the channel.
AnnotatedStream corrupt_stream(const AnnotatedStream& stream,
                               const CorruptionSpec& spec);

}  // namespace clx
