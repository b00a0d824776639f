#include <doctest.h>

#include <clx/rng.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

using namespace clx;

TEST_CASE("mix is a pure function of seed and index") {
  CHECK_EQ(rng::mix(1, 2), rng::mix(1, 2));
  CHECK_NE(rng::mix(1, 2), rng::mix(1, 3));
  CHECK_NE(rng::mix(1, 2), rng::mix(2, 2));
  static_assert(rng::mix(0, 0) == rng::mix(0, 0));
}

TEST_CASE("u01 lies strictly inside the unit interval") {
  double sum = 0.0, lo = 1.0, hi = 0.0;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rng::u01(42, i);
    CHECK_GT(r, 0.0);
    CHECK_LT(r, 1.0);
    sum += r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK_EQ(sum / double(n), doctest::Approx(0.5).epsilon(0.02));
  CHECK_LT(lo, 0.01);
  CHECK_GT(hi, 0.99);
}

TEST_CASE("below stays in range and spreads evenly") {
  std::vector<std::size_t> buckets(8, 0);
  const std::size_t n = 80000;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t v = rng::below(7, i, 8);
    REQUIRE_LT(v, 8);
    ++buckets[v];
  }
  for (std::size_t b : buckets) {
    CHECK_GT(b, n / 8 - 600);
    CHECK_LT(b, n / 8 + 600);
  }
  CHECK_EQ(rng::below(7, 3, 1), 0);
}

TEST_CASE("derive separates labels and is stable") {
  CHECK_EQ(rng::derive(5, "alpha"), rng::derive(5, "alpha"));
  CHECK_NE(rng::derive(5, "alpha"), rng::derive(5, "beta"));
  CHECK_NE(rng::derive(5, "alpha"), rng::derive(6, "alpha"));
  static_assert(rng::derive(0, "x") != rng::derive(0, "y"));
}

TEST_CASE("Sequence replays the free functions in index order") {
  rng::Sequence seq(99);
  CHECK_EQ(seq.index(), 0);
  CHECK_EQ(seq.bits(), rng::mix(99, 0));
  CHECK_EQ(seq.uniform(), rng::u01(99, 1));
  CHECK_EQ(seq.below(10), rng::below(99, 2, 10));
  CHECK_EQ(seq.index(), 3);

  rng::Sequence offset(99, 2);
  CHECK_EQ(offset.bits(), rng::mix(99, 2));
}
