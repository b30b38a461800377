#include <set>

#include "doctest.h"
#include "sdp/experiments.hpp"
#include "sdp/parallel.hpp"
#include "sdp/rng.hpp"

using sdp::Philox4x32;

TEST_SUITE("rng") {
  // Known-answer vectors published with the Random123 reference implementation.
  TEST_CASE("philox bijection known answers") {
    CHECK(Philox4x32::bijection({0, 0, 0, 0}, {0, 0}) ==
          Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::bijection({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::bijection({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          Philox4x32::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("streams are reproducible and distinct") {
    sdp::Stream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 10; ++i) {
      const auto x = a();
      CHECK(x == b());
      CHECK(x != c());
      CHECK(x != d());
    }
  }

  TEST_CASE("uniform_open stays inside (0, 1) and has the right mean") {
    sdp::Stream rng(1, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double u = sdp::uniform_open(rng);
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
  }

  TEST_CASE("standard normal moments") {
    sdp::Stream rng(3, 1);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = sdp::standard_normal(rng);
      s1 += z;
      s2 += z * z;
    }
    CHECK(std::abs(s1 / n) < 3.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
  }

  TEST_CASE("derive_seed separates tags") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t tag = 0; tag < 1000; ++tag) seen.insert(sdp::derive_seed(5, tag));
    CHECK(seen.size() == 1000);
    CHECK(sdp::derive_seed(5, 1) == sdp::derive_seed(5, 1));
    CHECK(sdp::derive_seed(5, 1) != sdp::derive_seed(6, 1));
  }

  TEST_CASE("parallel_for output does not depend on worker count") {
    auto run = [](unsigned workers) {
      std::vector<std::uint64_t> out(257);
      sdp::parallel_for(out.size(), workers, [&](std::size_t i) {
        sdp::Stream rng(9, i);
        out[i] = rng() ^ rng();
      });
      return out;
    };
    const auto serial = run(1);
    CHECK(run(3) == serial);
    CHECK(run(8) == serial);
  }

  TEST_CASE("parallel_for rethrows") {
    CHECK_THROWS_AS(sdp::parallel_for(100, 4,
                                      [](std::size_t i) {
                                        if (i == 37) throw std::runtime_error("boom");
                                      }),
                    std::runtime_error);
  }
}
