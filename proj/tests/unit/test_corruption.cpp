#include <doctest.h>

#include <clx/bits.hpp>
#include <clx/corruption.hpp>
#include <clx/error.hpp>
#include <clx/rng.hpp>

#include <cstdint>
#include <vector>

using namespace clx;

TEST_CASE("corruption spec validation") {
  CHECK_NOTHROW(validate(CorruptionSpec{0.5, 0.5, 0}));
  CHECK_THROWS_AS(validate(CorruptionSpec{-0.1, 0.0, 0}), ConfigError);
  CHECK_THROWS_AS(validate(CorruptionSpec{0.0, 1.1, 0}), ConfigError);
  CHECK_THROWS_AS(validate(CorruptionSpec{0.6, 0.5, 0}), ConfigError);
}

TEST_CASE("zero rates are the exact identity") {
  rng::Sequence seq(3);
  Bytes data(4096);
  for (auto& b : data) b = std::uint8_t(seq.below(256));
  CHECK(corrupt_bits(data, {0.0, 0.0, 9}) == data);

  std::vector<std::uint8_t> unit(1000);
  for (auto& b : unit) b = std::uint8_t(seq.below(2));
  auto copy = unit;
  corrupt_unit_bits(copy, {0.0, 0.0, 9});
  CHECK(copy == unit);
}

TEST_CASE("corruption is deterministic in the seed") {
  Bytes data(2048, 0x5A);
  const Bytes a = corrupt_bits(data, {0.1, 0.05, 42});
  const Bytes b = corrupt_bits(data, {0.1, 0.05, 42});
  CHECK(a == b);
  const Bytes c = corrupt_bits(data, {0.1, 0.05, 43});
  CHECK(a != c);
  CHECK_EQ(a.size(), data.size());
}

TEST_CASE("packed and unit forms apply the same per-index draws") {
  Bytes packed(512, 0xC3);
  const CorruptionSpec spec{0.2, 0.1, 77};
  const Bytes out = corrupt_bits(packed, spec);

  std::vector<std::uint8_t> unit(packed.size() * 8);
  for (std::size_t i = 0; i < unit.size(); ++i)
    unit[i] = std::uint8_t(get_bit(packed, i));
  corrupt_unit_bits(unit, spec);
  for (std::size_t i = 0; i < unit.size(); ++i)
    CHECK_EQ(int(unit[i]), get_bit(out, i));
}

TEST_CASE("empirical rates match the two-parameter channel") {
  const std::size_t n_bytes = 12500;  // 1e5 bits

  // All ones: flips and losses both clear bits, so changed ≈ γ1 + γ2.
  Bytes ones(n_bytes, 0xFF);
  Bytes out = corrupt_bits(ones, {0.1, 0.1, 5});
  std::size_t changed = 0;
  for (std::size_t i = 0; i < n_bytes * 8; ++i)
    if (get_bit(out, i) != 1) ++changed;
  CHECK_EQ(double(changed) / double(n_bytes * 8),
           doctest::Approx(0.2).epsilon(0.04));

  // All zeros: only flips show, so changed ≈ γ1.
  Bytes zeros(n_bytes, 0x00);
  out = corrupt_bits(zeros, {0.1, 0.1, 5});
  changed = 0;
  for (std::size_t i = 0; i < n_bytes * 8; ++i)
    if (get_bit(out, i) != 0) ++changed;
  CHECK_EQ(double(changed) / double(n_bytes * 8),
           doctest::Approx(0.1).epsilon(0.08));

  // Pure loss never sets a bit.
  out = corrupt_bits(zeros, {0.0, 0.5, 5});
  for (std::size_t i = 0; i < n_bytes; ++i) CHECK_EQ(out[i], 0);
}

TEST_CASE("corrupt_stream touches bytes only") {
  TrafficSpec tspec;
  tspec.n_pdus = 20;
  tspec.seed = 2;
  const AnnotatedStream clean = build_stream(tspec);
  const CorruptionSpec cspec{0.15, 0.05, 8};
  const AnnotatedStream noisy = corrupt_stream(clean, cspec);
  CHECK_EQ(noisy.bytes.size(), clean.bytes.size());
  CHECK(noisy.annotations == clean.annotations);
  CHECK(noisy.meta == clean.meta);
  CHECK(noisy.bytes == corrupt_bits(clean.bytes, cspec));
  CHECK(noisy.bytes != clean.bytes);
}
