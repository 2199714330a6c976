#include <cmath>

#include "doctest.h"

#include "helpers.hpp"
#include "rae/rit.hpp"

using namespace rae;

TEST_CASE("feasible mean shift clamps to the block's headroom") {
    const std::vector<std::uint8_t> block = {10, 20, 30, 40};
    CHECK(feasible_mean_shift(block, 5) == 5);       // fits
    CHECK(feasible_mean_shift(block, -15) == -10);   // min sample 10
    CHECK(feasible_mean_shift(block, 300) == 215);   // max sample 40
    CHECK(feasible_mean_shift(block, 0) == 0);
    const std::vector<std::uint8_t> full = {0, 255};
    CHECK(feasible_mean_shift(full, 7) == 0);        // no headroom at all
    CHECK(feasible_mean_shift(full, -7) == 0);
}

TEST_CASE("mean shift moves the mean exactly and keeps the sd") {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::uint8_t> block(16);
        for (auto& v : block) v = static_cast<std::uint8_t>(40 + rng() % 150);
        const int d = feasible_mean_shift(block, static_cast<int>(rng() % 61) - 30);
        double m0 = 0, m1 = 0;
        for (auto v : block) m0 += v;
        std::vector<std::uint8_t> shifted = block;
        for (auto& v : shifted) v = static_cast<std::uint8_t>(v + d);
        for (auto v : shifted) m1 += v;
        CHECK(m1 - m0 == doctest::Approx(16.0 * d));
        double s0 = 0, s1 = 0;
        for (std::size_t i = 0; i < block.size(); ++i) {
            s0 += (block[i] - m0 / 16) * (block[i] - m0 / 16);
            s1 += (shifted[i] - m1 / 16) * (shifted[i] - m1 / 16);
        }
        CHECK(std::sqrt(s0 / 16) == doctest::Approx(std::sqrt(s1 / 16)));
    }
}

TEST_CASE("classification cuts sd ranks into equal classes, ties by raster order") {
    std::vector<BlockStats> stats(4);
    stats[0].sd = 5.0;
    stats[1].sd = 1.0;
    stats[2].sd = 5.0;  // tie with block 0; block 0 has the lower index
    stats[3].sd = 0.0;
    const auto labels = classify_blocks(stats, 2);
    CHECK(labels == std::vector<std::uint8_t>{1, 0, 1, 0});

    // Class sizes depend only on (block count, class count).
    std::vector<BlockStats> ten(10);
    for (int i = 0; i < 10; ++i) ten[static_cast<std::size_t>(i)].sd = i;
    const auto l3 = classify_blocks(ten, 3);
    int counts[3] = {0, 0, 0};
    for (auto v : l3) ++counts[v];
    CHECK(counts[0] == 3);
    CHECK(counts[1] == 3);
    CHECK(counts[2] == 4);
}

TEST_CASE("quantized classification ignores sub-bucket sd differences") {
    std::vector<BlockStats> stats(4);
    stats[0].sd = 5.0;  // same bucket as blocks 1 and 3 at quantum 16
    stats[1].sd = 1.0;
    stats[2].sd = 21.0;  // bucket 1: always the top class
    stats[3].sd = 0.0;
    CHECK(classify_blocks(stats, 2, 16.0) == std::vector<std::uint8_t>{0, 0, 1, 1});
    // A small sd perturbation must not change the labels.
    stats[0].sd = 7.5;
    stats[3].sd = 2.0;
    CHECK(classify_blocks(stats, 2, 16.0) == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("pairing zips classes in raster order") {
    const std::vector<std::uint8_t> cit_o = {0, 0, 1, 1};
    const std::vector<std::uint8_t> cit_t = {1, 0, 1, 0};
    // class 0: orig [0,1] -> target [1,3]; class 1: orig [2,3] -> target [0,2]
    CHECK(pair_blocks(cit_o, cit_t, 2) == std::vector<int>{1, 3, 0, 2});

    const std::vector<std::uint8_t> bad = {0, 0, 0, 1};
    CHECK_THROWS_AS(pair_blocks(cit_o, bad, 2), Error);  // class sizes disagree
}

TEST_CASE("best rotation minimizes the squared error") {
    const std::vector<std::uint8_t> block = {1, 2, 3, 4};
    CHECK(best_rotation(block, {1, 2, 3, 4}, 2) == Rotation::r0);
    CHECK(best_rotation(block, {3, 1, 4, 2}, 2) == Rotation::r90);
    CHECK(best_rotation(block, {4, 3, 2, 1}, 2) == Rotation::r180);
    CHECK(best_rotation(block, {2, 4, 1, 3}, 2) == Rotation::r270);
    // Constant blocks tie everywhere; the smallest index wins.
    CHECK(best_rotation({5, 5, 5, 5}, {9, 9, 9, 9}, 2) == Rotation::r0);
}

TEST_CASE("aux payload serialization round trips") {
    std::mt19937 rng(11);
    AuxPayload aux;
    aux.block_size = 4;
    aux.class_count = 16;
    aux.channels = 3;
    aux.blocks = 36;
    for (int c = 0; c < 3; ++c) {
        std::vector<std::uint8_t> co(36), ct(36);
        std::vector<int> shifts(36);
        std::vector<Rotation> rots(36);
        for (int i = 0; i < 36; ++i) {
            co[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng() % 16);
            ct[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng() % 16);
            shifts[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 31) - 15;
            rots[static_cast<std::size_t>(i)] = static_cast<Rotation>(rng() % 4);
        }
        aux.cit_original.push_back(co);
        aux.cit_target.push_back(ct);
        aux.mean_shifts.push_back(shifts);
        aux.rotations.push_back(rots);
    }
    const BitStream bits = serialize_aux(aux);
    CHECK(deserialize_aux(bits) == aux);
}

TEST_CASE("constant class tables compress with run-length encoding") {
    AuxPayload aux;
    aux.block_size = 4;
    aux.class_count = 16;
    aux.channels = 1;
    aux.blocks = 64;
    aux.cit_original.emplace_back(64, std::uint8_t{7});
    aux.cit_target.emplace_back(64, std::uint8_t{7});
    aux.mean_shifts.emplace_back(64, 0);
    aux.rotations.emplace_back(64, Rotation::r0);
    const std::size_t constant_bits = serialize_aux(aux).size();

    // Alternating labels defeat RLE; the encoder must fall back to raw.
    for (int i = 0; i < 64; ++i)
        aux.cit_original[0][static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(i % 16);
    aux.cit_target[0] = aux.cit_original[0];
    const std::size_t scattered_bits = serialize_aux(aux).size();
    CHECK(constant_bits < scattered_bits);
    CHECK(deserialize_aux(serialize_aux(aux)) == aux);
}

TEST_CASE("aux deserialization rejects malformed data") {
    AuxPayload aux;
    aux.block_size = 4;
    aux.class_count = 2;
    aux.channels = 1;
    aux.blocks = 4;
    aux.cit_original.push_back({0, 0, 1, 1});
    aux.cit_target.push_back({1, 0, 1, 0});
    aux.mean_shifts.push_back({1, -2, 0, 3});
    aux.rotations.push_back({Rotation::r0, Rotation::r90, Rotation::r180, Rotation::r270});
    BitStream good = serialize_aux(aux);

    BitStream bad_tag;
    bad_tag.push_uint(0xFF, 8);
    for (std::size_t i = 8; i < good.size(); ++i) bad_tag.push_bit(good[i]);
    CHECK_THROWS_AS((void)deserialize_aux(bad_tag), Error);

    BitStream truncated;
    for (std::size_t i = 0; i + 5 < good.size(); ++i) truncated.push_bit(good[i]);
    CHECK_THROWS_AS((void)deserialize_aux(truncated), Error);

    BitStream trailing = good;
    trailing.push_bit(0);
    CHECK_THROWS_AS((void)deserialize_aux(trailing), Error);
}

TEST_CASE("transform/restore round trips bit-exactly") {
    struct Case {
        int size, channels, block, classes;
    };
    const Case cases[] = {
        {32, 1, 4, 16}, {32, 3, 4, 8}, {48, 1, 8, 16}, {32, 1, 4, 1}, {64, 1, 4, 64},
    };
    unsigned seed = 100;
    for (const Case& c : cases) {
        const Image orig = testutil::synthetic_image(c.size, c.size, c.channels, seed++);
        const Image target = testutil::synthetic_image(c.size, c.size, c.channels, seed++);
        RitConfig cfg;
        cfg.block_size = c.block;
        cfg.class_count = c.classes;
        const TransformResult tr = rit_transform(orig, target, cfg);
        CHECK(tr.camouflage.same_shape(target));
        CHECK(tr.aux_bits > 0);
        const Image restored = rit_restore(tr.camouflage);
        CHECK(restored == orig);
    }
}

TEST_CASE("parallel and serial transforms agree bit for bit") {
    const Image orig = testutil::synthetic_image(48, 48, 3, 201);
    const Image target = testutil::synthetic_image(48, 48, 3, 202);
    const TransformResult a = rit_transform(orig, target, {}, Exec::serial);
    const TransformResult b = rit_transform(orig, target, {}, Exec::parallel);
    CHECK(a.camouflage == b.camouflage);
    CHECK(rit_restore(a.camouflage, Exec::serial) == rit_restore(b.camouflage, Exec::parallel));
}

TEST_CASE("more classes do not hurt pre-embedding quality") {
    double rmse1 = 0.0, rmse16 = 0.0;
    for (unsigned seed = 0; seed < 20; ++seed) {
        const Image orig = testutil::synthetic_image(48, 48, 1, 300 + seed * 2);
        const Image target = testutil::synthetic_image(48, 48, 1, 301 + seed * 2);
        RitConfig c1, c16;
        c1.class_count = 1;
        c16.class_count = 16;
        const Image a1 = rit_transform(orig, target, c1).assembled;
        const Image a16 = rit_transform(orig, target, c16).assembled;
        rmse1 += std::sqrt(mse(a1, target));
        rmse16 += std::sqrt(mse(a16, target));
    }
    CHECK(rmse16 / 20.0 <= rmse1 / 20.0);
}

TEST_CASE("transform validates its inputs") {
    const Image a = testutil::synthetic_image(32, 32, 1, 1);
    const Image b = testutil::synthetic_image(32, 32, 3, 2);
    CHECK_THROWS_AS((void)rit_transform(a, b, {}), Error);  // channel mismatch

    const Image c = testutil::synthetic_image(30, 30, 1, 3);
    const Image d = testutil::synthetic_image(30, 30, 1, 4);
    CHECK_THROWS_AS((void)rit_transform(c, d, {}), Error);  // 30 % 4 != 0

    RitConfig bad;
    bad.class_count = 65;
    const Image e = testutil::synthetic_image(32, 32, 1, 5);
    const Image f = testutil::synthetic_image(32, 32, 1, 6);
    CHECK_THROWS_AS((void)rit_transform(e, f, bad), Error);
}

TEST_CASE("restore rejects tampered camouflage") {
    const Image orig = testutil::synthetic_image(32, 32, 1, 7);
    const Image target = testutil::synthetic_image(32, 32, 1, 8);
    Image camo = rit_transform(orig, target, {}).camouflage;
    camo.pixels.back() ^= 1;  // break the embedded header
    CHECK_THROWS_AS((void)rit_restore(camo), Error);
}
