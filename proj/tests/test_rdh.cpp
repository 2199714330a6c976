#include <cstdlib>

#include "doctest.h"

#include "helpers.hpp"
#include "rae/rdh.hpp"

using namespace rae;

TEST_CASE("round trip: payload and cover image are recovered exactly") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const Image cover = testutil::synthetic_image(48, 48, 1, seed);
        const BitStream payload = testutil::random_payload(300 + 50 * seed, seed);
        EmbedRecord info;
        const Image carrier = rdh_embed(cover, payload, {}, &info);
        CHECK(carrier.same_shape(cover));
        CHECK(info.bootstrap_bits == 58);
        CHECK(!info.passes.empty());

        const RdhExtractResult ext = rdh_extract(carrier);
        CHECK(ext.payload == payload);
        CHECK(ext.restored == cover);
    }
}

TEST_CASE("round trip on color images") {
    const Image cover = testutil::synthetic_image(32, 32, 3, 9);
    const BitStream payload = testutil::random_payload(1200, 4);
    const Image carrier = rdh_embed(cover, payload);
    const RdhExtractResult ext = rdh_extract(carrier);
    CHECK(ext.payload == payload);
    CHECK(ext.restored == cover);
}

TEST_CASE("empty payload round trips") {
    const Image cover = testutil::synthetic_image(32, 32, 1, 5);
    const Image carrier = rdh_embed(cover, BitStream{});
    const RdhExtractResult ext = rdh_extract(carrier);
    CHECK(ext.payload.size() == 0);
    CHECK(ext.restored == cover);
}

TEST_CASE("capacity of a constant image, single pass") {
    // Constant 64x64 image: one histogram bin holds all 4096 - 58 region
    // samples. One pass embeds that many bits minus 1 map bit and a 34-bit
    // record; the reported capacity further subtracts the 58-bit reserve,
    // the 32-bit length field and the 128-bit slack:
    //   (4096 - 58) - 1 - 34 - 58 - 32 - 128 = 3785.
    const Image cover(64, 64, 1, 77);
    RdhConfig cfg;
    cfg.max_passes = 1;
    CHECK(rdh_capacity(cover, cfg) == 3785);
}

TEST_CASE("capacity contract: exact capacity embeds, capacity + 1 is rejected") {
    int checked = 0;
    for (unsigned seed = 1; seed <= 30; ++seed) {
        const int size = 24 + static_cast<int>(seed % 5) * 12;
        const int channels = seed % 3 == 0 ? 3 : 1;
        const Image cover = testutil::synthetic_image(size, size, channels, seed * 31);
        const std::int64_t cap = rdh_capacity(cover);
        if (cap <= 0) continue;
        ++checked;

        const BitStream payload =
            testutil::random_payload(static_cast<std::size_t>(cap), seed);
        const Image carrier = rdh_embed(cover, payload);
        const RdhExtractResult ext = rdh_extract(carrier);
        CHECK(ext.payload == payload);
        CHECK(ext.restored == cover);

        const BitStream over =
            testutil::random_payload(static_cast<std::size_t>(cap) + 1, seed);
        try {
            rdh_embed(cover, over);
            FAIL("payload over capacity must be rejected (seed ", seed, ")");
        } catch (const Error& e) {
            CHECK(e.kind() == Errc::capacity);
        }
    }
    CHECK(checked >= 25);  // the generator must produce usable covers
}

TEST_CASE("adversarial bit patterns embed at capacity") {
    const Image cover = testutil::synthetic_image(48, 48, 1, 123);
    const std::int64_t cap = rdh_capacity(cover);
    REQUIRE(cap > 0);
    for (int kind = 0; kind < 2; ++kind) {
        BitStream payload;
        for (std::int64_t i = 0; i < cap; ++i) payload.push_bit(kind);
        const RdhExtractResult ext = rdh_extract(rdh_embed(cover, payload));
        CHECK(ext.payload == payload);
        CHECK(ext.restored == cover);
    }
}

TEST_CASE("embedding changes each sample by at most one per pass") {
    const Image cover = testutil::synthetic_image(48, 48, 1, 21);
    const BitStream payload = testutil::random_payload(500, 8);
    EmbedRecord info;
    const Image carrier = rdh_embed(cover, payload, {}, &info);
    int max_diff = 0;
    for (std::size_t i = 0; i < cover.pixels.size(); ++i)
        max_diff = std::max(max_diff,
                            std::abs(static_cast<int>(cover.pixels[i]) - carrier.pixels[i]));
    CHECK(max_diff <= static_cast<int>(info.passes.size()));
}

TEST_CASE("embedding is deterministic") {
    const Image cover = testutil::synthetic_image(40, 40, 1, 33);
    const BitStream payload = testutil::random_payload(700, 2);
    CHECK(rdh_embed(cover, payload) == rdh_embed(cover, payload));
}

TEST_CASE("extraction rejects images without a payload") {
    const Image plain = testutil::synthetic_image(32, 32, 1, 55);
    CHECK_THROWS_AS((void)rdh_extract(plain), Error);
    try {
        (void)rdh_extract(plain);
    } catch (const Error& e) {
        CHECK(e.kind() == Errc::integrity);
    }
}

TEST_CASE("extraction rejects a tampered header") {
    const Image cover = testutil::synthetic_image(32, 32, 1, 66);
    Image carrier = rdh_embed(cover, testutil::random_payload(100, 1));
    carrier.pixels.back() ^= 1;  // flips a magic bit
    CHECK_THROWS_AS((void)rdh_extract(carrier), Error);
}

TEST_CASE("images too small for the header have zero capacity") {
    const Image tiny(7, 8, 1, 0);  // 56 samples < 58-bit reserve
    CHECK(rdh_capacity(tiny) == 0);
    CHECK_THROWS_AS((void)rdh_embed(tiny, BitStream{}), Error);
}

TEST_CASE("uniform noise offers no usable capacity but fails cleanly") {
    Image noisy(48, 48, 1);
    std::mt19937 rng(99);
    for (std::uint8_t& p : noisy.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    const std::int64_t cap = rdh_capacity(noisy);
    CHECK(cap >= 0);
    const BitStream payload = testutil::random_payload(static_cast<std::size_t>(cap) + 4000, 3);
    try {
        rdh_embed(noisy, payload);
        FAIL("expected a capacity error");
    } catch (const Error& e) {
        CHECK(e.kind() == Errc::capacity);
    }
}
