#include <doctest.h>

#include <clx/bits.hpp>

#include <array>
#include <cstdint>

using namespace clx;

TEST_CASE("bit access is MSB first") {
  const std::array<std::uint8_t, 2> b{0xB0, 0x01};
  CHECK_EQ(get_bit(b, 0), 1);
  CHECK_EQ(get_bit(b, 1), 0);
  CHECK_EQ(get_bit(b, 2), 1);
  CHECK_EQ(get_bit(b, 3), 1);
  CHECK_EQ(get_bit(b, 4), 0);
  CHECK_EQ(get_bit(b, 14), 0);
  CHECK_EQ(get_bit(b, 15), 1);
}

TEST_CASE("set_bit writes and clears the addressed bit") {
  std::array<std::uint8_t, 2> b{0, 0};
  set_bit(b, 0, 1);
  set_bit(b, 7, 1);
  set_bit(b, 9, 1);
  CHECK_EQ(b[0], 0x81);
  CHECK_EQ(b[1], 0x40);
  set_bit(b, 0, 0);
  CHECK_EQ(b[0], 0x01);
  set_bit(b, 9, 0);
  CHECK_EQ(b[1], 0x00);
}

TEST_CASE("bits_to_unit unpacks one msb-first value per bit") {
  const std::array<std::uint8_t, 2> b{0xA5, 0xC0};
  std::array<double, 8> unit{};
  bits_to_unit(b, 0, 8, unit.data());
  const std::array<double, 8> want{1, 0, 1, 0, 0, 1, 0, 1};
  CHECK(unit == want);

  std::array<double, 2> tail{};
  bits_to_unit(b, 1, 2, tail.data());
  CHECK_EQ(tail[0], 1.0);
  CHECK_EQ(tail[1], 1.0);
}

TEST_CASE("u16 and u32 accessors are big endian") {
  std::array<std::uint8_t, 6> b{0x12, 0x34, 0xDE, 0xAD, 0xBE, 0xEF};
  CHECK_EQ(read_u16(b, 0), 0x1234);
  CHECK_EQ(read_u32(b, 2), 0xDEADBEEF);

  write_u16(b, 0, 0xBEEF);
  CHECK_EQ(b[0], 0xBE);
  CHECK_EQ(b[1], 0xEF);
  write_u32(b, 2, 0x01020304);
  CHECK_EQ(b[2], 0x01);
  CHECK_EQ(b[5], 0x04);

  Bytes out;
  append_u16(out, 0x1234);
  append_u32(out, 0xCAFEBABE);
  const Bytes want{0x12, 0x34, 0xCA, 0xFE, 0xBA, 0xBE};
  CHECK(out == want);
}
