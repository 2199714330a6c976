#include "doctest.h"

#include "helpers.hpp"
#include "rae/bitstream.hpp"

using namespace rae;

TEST_CASE("multi-bit fields pack MSB first") {
    BitStream bs;
    bs.push_uint(0xA5, 8);
    REQUIRE(bs.size() == 8);
    const int expect[8] = {1, 0, 1, 0, 0, 1, 0, 1};
    for (int i = 0; i < 8; ++i) CHECK(bs[static_cast<std::size_t>(i)] == expect[i]);

    BitReader r(bs);
    CHECK(r.read_uint(8) == 0xA5);
}

TEST_CASE("reader round trips mixed fields") {
    BitStream bs;
    bs.push_uint(0x52AE, 16);
    bs.push_bit(1);
    bs.push_uint(12345, 20);
    bs.push_uint(3, 2);
    BitReader r(bs);
    CHECK(r.read_uint(16) == 0x52AE);
    CHECK(r.read_bit() == 1);
    CHECK(r.read_uint(20) == 12345);
    CHECK(r.read_uint(2) == 3);
    CHECK(r.remaining() == 0);
}

TEST_CASE("overrun reads throw with the bit offset") {
    BitStream bs;
    bs.push_uint(7, 3);
    BitReader r(bs, "unit");
    r.read_uint(3);
    CHECK_THROWS_WITH_AS(r.read_bit(), doctest::Contains("bit 3"), Error);
}

TEST_CASE("byte packing round trip") {
    const BitStream bs = testutil::random_payload(77, 5);
    const std::vector<std::uint8_t> bytes = bs.to_bytes();
    CHECK(bytes.size() == 10);
    CHECK(BitStream::from_bytes(bytes, 77) == bs);
}

TEST_CASE("bit width for value ranges") {
    CHECK(bit_width_for(0) == 0);
    CHECK(bit_width_for(1) == 0);
    CHECK(bit_width_for(2) == 1);
    CHECK(bit_width_for(16) == 4);
    CHECK(bit_width_for(17) == 5);
    CHECK(bit_width_for(64) == 6);
}
