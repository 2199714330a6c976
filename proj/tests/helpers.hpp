#pragma once

#include <random>
#include <string>
#include <vector>

#include "rae/bitstream.hpp"
#include "rae/image.hpp"

namespace testutil {

// Synthetic test images with embedder-friendly histograms: flat tiles,
// quantized gradients and simple shapes over a dominant background.
inline rae::Image synthetic_image(int width, int height, int channels, unsigned seed) {
    std::mt19937 rng(seed);
    auto pick = [&](int lo, int hi) {
        return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
    };

    rae::Image img(width, height, channels);
    for (int c = 0; c < channels; ++c) {
        const int style = pick(0, 2);
        const int bg = pick(0, 7) * 32;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) img.at(x, y, c) = static_cast<std::uint8_t>(bg);

        if (style == 0) {
            // Flat tiles of random levels.
            const int tile = pick(4, 8) * 2;
            for (int ty = 0; ty < height; ty += tile)
                for (int tx = 0; tx < width; tx += tile) {
                    const int v = pick(0, 15) * 17;
                    for (int y = ty; y < std::min(height, ty + tile); ++y)
                        for (int x = tx; x < std::min(width, tx + tile); ++x)
                            img.at(x, y, c) = static_cast<std::uint8_t>(v);
                }
        } else if (style == 1) {
            // Coarsely quantized diagonal gradient.
            const int levels = pick(3, 6);
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    const int t = (x + y) * levels / (width + height);
                    img.at(x, y, c) = static_cast<std::uint8_t>(32 + t * (192 / levels));
                }
        } else {
            // Random solid rectangles over the background.
            const int shapes = pick(3, 7);
            for (int s = 0; s < shapes; ++s) {
                const int w = pick(width / 8, width / 2);
                const int h = pick(height / 8, height / 2);
                const int x0 = pick(0, width - w), y0 = pick(0, height - h);
                const int v = pick(0, 15) * 17;
                for (int y = y0; y < y0 + h; ++y)
                    for (int x = x0; x < x0 + w; ++x)
                        img.at(x, y, c) = static_cast<std::uint8_t>(v);
            }
        }
    }
    return img;
}

inline rae::BitStream random_payload(std::size_t bits, unsigned seed) {
    std::mt19937 rng(seed);
    rae::BitStream bs;
    for (std::size_t i = 0; i < bits; ++i) bs.push_bit(static_cast<int>(rng() & 1u));
    return bs;
}

// Unique scratch path under the build tree's working directory.
inline std::string tmp_path(const std::string& name) {
    return "test_scratch_" + name;
}

}  // namespace testutil
