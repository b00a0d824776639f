#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace clx {

using Bytes = std::vector<std::uint8_t>;

// Bit addressing is MSB first within each byte: bit index 0 is the most
// significant bit of byte 0, matching the transmission order of the framing
// layers, so byte offset o corresponds to bit offset 8*o.

inline int get_bit(std::span<const std::uint8_t> bytes, std::size_t bit) {
  return (bytes[bit >> 3] >> (7 - (bit & 7))) & 1;
}

inline void set_bit(std::span<std::uint8_t> bytes, std::size_t bit, int value) {
  const std::uint8_t mask = std::uint8_t(1u << (7 - (bit & 7)));
  if (value)
    bytes[bit >> 3] |= mask;
  else
    bytes[bit >> 3] &= std::uint8_t(~mask);
}

// Copies `n_bits` bits starting at byte `offset` into 0/1 doubles.
// The caller guarantees the span covers the requested range.
inline void bits_to_unit(std::span<const std::uint8_t> bytes,
                         std::size_t offset, std::size_t n_bits,
                         double* out) {
  for (std::size_t i = 0; i < n_bits; ++i)
    out[i] = static_cast<double>(get_bit(bytes, offset * 8 + i));
}

// Big-endian field accessors shared by the framing codecs.

inline std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t o) {
  return static_cast<std::uint16_t>((b[o] << 8) | b[o + 1]);
}

inline std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t o) {
  return (std::uint32_t(b[o]) << 24) | (std::uint32_t(b[o + 1]) << 16) |
         (std::uint32_t(b[o + 2]) << 8) | std::uint32_t(b[o + 3]);
}

inline void write_u16(std::span<std::uint8_t> b, std::size_t o,
                      std::uint16_t v) {
  b[o] = std::uint8_t(v >> 8);
  b[o + 1] = std::uint8_t(v & 0xFF);
}

inline void write_u32(std::span<std::uint8_t> b, std::size_t o,
                      std::uint32_t v) {
  b[o] = std::uint8_t(v >> 24);
  b[o + 1] = std::uint8_t((v >> 16) & 0xFF);
  b[o + 2] = std::uint8_t((v >> 8) & 0xFF);
  b[o + 3] = std::uint8_t(v & 0xFF);
}

inline void append_u16(Bytes& b, std::uint16_t v) {
  b.push_back(std::uint8_t(v >> 8));
  b.push_back(std::uint8_t(v & 0xFF));
}

inline void append_u32(Bytes& b, std::uint32_t v) {
  b.push_back(std::uint8_t(v >> 24));
  b.push_back(std::uint8_t((v >> 16) & 0xFF));
  b.push_back(std::uint8_t((v >> 8) & 0xFF));
  b.push_back(std::uint8_t(v & 0xFF));
}

}  // namespace clx
