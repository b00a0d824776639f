#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace clx {

// CRC-8 over the base-band header: polynomial 0xD5, initial value 0x00,
// no reflection, no output XOR. An all-zero input yields 0x00.
std::uint8_t crc8(std::span<const std::uint8_t> data);

// CRC-32 over encapsulation payloads: reflected polynomial 0xEDB88320
// (0x04C11DB7 forward), initial value 0xFFFFFFFF, final XOR 0xFFFFFFFF.
// crc32("123456789") == 0xCBF43926.
std::uint32_t crc32(std::span<const std::uint8_t> data);

}  // namespace clx
