#include "clx/crc.hpp"

#include <array>

namespace clx {
namespace {

constexpr std::array<std::uint8_t, 256> make_crc8_table() {
  std::array<std::uint8_t, 256> table{};
  for (int i = 0; i < 256; ++i) {
    std::uint8_t crc = std::uint8_t(i);
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & 0x80) ? std::uint8_t((crc << 1) ^ 0xD5)
                         : std::uint8_t(crc << 1);
    table[std::size_t(i)] = crc;
  }
  return table;
}

constexpr std::array<std::uint32_t, 256> make_crc32_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t crc = i;
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & 1u) ? (crc >> 1) ^ 0xEDB88320u : crc >> 1;
    table[i] = crc;
  }
  return table;
}

constexpr auto crc8_table = make_crc8_table();
constexpr auto crc32_table = make_crc32_table();

}  // namespace

std::uint8_t crc8(std::span<const std::uint8_t> data) {
  std::uint8_t crc = 0x00;
  for (std::uint8_t b : data) crc = crc8_table[std::size_t(crc ^ b)];
  return crc;
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : data) crc = (crc >> 8) ^ crc32_table[(crc ^ b) & 0xFFu];
  return crc ^ 0xFFFFFFFFu;
}

}  // namespace clx
