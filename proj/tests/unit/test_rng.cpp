#include <doctest.h>

#include "gfspec/rng.hpp"

using gfspec::Philox4x32;

TEST_CASE("philox4x32-10 known answers")
{
    CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
          Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                               {0xffffffffu, 0xffffffffu}) ==
          Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                               {0xa4093822u, 0x299f31d0u}) ==
          Philox4x32::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct")
{
    gfspec::RngStream a(42, 7);
    gfspec::RngStream b(42, 7);
    gfspec::RngStream c(42, 8);
    int same = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        same += x == c.next_u64();
    }
    CHECK(same == 0);
    double mean = 0.0;
    gfspec::RngStream d(1, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = d.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        mean += u;
    }
    CHECK(mean / 100000 == doctest::Approx(0.5).epsilon(0.01));
}
