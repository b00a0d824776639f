#include <doctest.h>

#include <clx/crc.hpp>
#include <clx/rng.hpp>

#include <cstdint>
#include <vector>

using namespace clx;

namespace {

// Bit-at-a-time reference: poly 0xD5, init 0, MSB first, no reflection.
std::uint8_t crc8_ref(std::span<const std::uint8_t> data) {
  std::uint8_t crc = 0;
  for (std::uint8_t byte : data) {
    crc ^= byte;
    for (int i = 0; i < 8; ++i)
      crc = (crc & 0x80) ? std::uint8_t((crc << 1) ^ 0xD5)
                         : std::uint8_t(crc << 1);
  }
  return crc;
}

// Bit-at-a-time reference: reflected poly 0xEDB88320, init and final
// xor 0xFFFFFFFF.
std::uint32_t crc32_ref(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t byte : data) {
    crc ^= byte;
    for (int i = 0; i < 8; ++i)
      crc = (crc & 1) ? (crc >> 1) ^ 0xEDB88320u : crc >> 1;
  }
  return crc ^ 0xFFFFFFFFu;
}

}  // namespace

TEST_CASE("crc8 matches frozen vectors") {
  const std::vector<std::uint8_t> seq{1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK_EQ(crc8(seq), 0x1A);
  const std::vector<std::uint8_t> zeros(9, 0);
  CHECK_EQ(crc8(zeros), 0x00);
  CHECK_EQ(crc8({}), 0x00);
}

TEST_CASE("crc8 agrees with a bitwise reference on random input") {
  rng::Sequence seq(101);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> msg(seq.below(32));
    for (auto& b : msg) b = std::uint8_t(seq.below(256));
    CHECK_EQ(crc8(msg), crc8_ref(msg));
  }
}

TEST_CASE("crc32 matches frozen vectors") {
  const std::vector<std::uint8_t> check{'1', '2', '3', '4', '5',
                                        '6', '7', '8', '9'};
  CHECK_EQ(crc32(check), 0xCBF43926u);
  const std::vector<std::uint8_t> one_zero{0x00};
  CHECK_EQ(crc32(one_zero), 0xD202EF8Du);
}

TEST_CASE("crc32 agrees with a bitwise reference on random input") {
  rng::Sequence seq(202);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> msg(1 + seq.below(64));
    for (auto& b : msg) b = std::uint8_t(seq.below(256));
    CHECK_EQ(crc32(msg), crc32_ref(msg));
  }
}

TEST_CASE("crc32 detects any single bit flip in a short message") {
  std::vector<std::uint8_t> msg{0xDE, 0xAD, 0xBE, 0xEF};
  const std::uint32_t clean = crc32(msg);
  for (std::size_t bit = 0; bit < msg.size() * 8; ++bit) {
    msg[bit / 8] ^= std::uint8_t(0x80 >> (bit % 8));
    CHECK_NE(crc32(msg), clean);
    msg[bit / 8] ^= std::uint8_t(0x80 >> (bit % 8));
  }
}
