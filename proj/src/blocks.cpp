#include "rae/blocks.hpp"

#include <cmath>

namespace rae {
namespace {

BlockStats block_stats(const Image& img, int B, int bx, int by, int c) {
    const int x0 = bx * B;
    const int y0 = by * B;
    const int n = B * B;
    double sum = 0.0;
    std::uint8_t lo = 255, hi = 0;
    for (int y = y0; y < y0 + B; ++y) {
        for (int x = x0; x < x0 + B; ++x) {
            std::uint8_t v = img.at(x, y, c);
            sum += v;
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (int y = y0; y < y0 + B; ++y) {
        for (int x = x0; x < x0 + B; ++x) {
            double d = img.at(x, y, c) - mean;
            sq += d * d;
        }
    }
    BlockStats s;
    s.mean = mean;
    s.sd = std::sqrt(sq / n);
    s.min = lo;
    s.max = hi;
    return s;
}

}  // namespace

BlockGrid partition(const Image& img, int block_size, Exec policy) {
    if (block_size < 2)
        throw Error(Errc::usage, "partition: block size must be at least 2");
    if (img.width % block_size != 0 || img.height % block_size != 0)
        throw Error(Errc::usage,
                    "partition: image dimensions " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + " are not a multiple of block size " +
                        std::to_string(block_size));

    BlockGrid grid;
    grid.block_size = block_size;
    grid.blocks_x = img.width / block_size;
    grid.blocks_y = img.height / block_size;
    grid.channels = img.channels;
    grid.stats.assign(img.channels, std::vector<BlockStats>(grid.block_count()));

    const int total = grid.block_count() * img.channels;
    if (policy == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < total; ++t) {
            int c = t / grid.block_count();
            int b = t % grid.block_count();
            grid.stats[c][b] =
                block_stats(img, block_size, b % grid.blocks_x, b / grid.blocks_x, c);
        }
    } else {
        for (int t = 0; t < total; ++t) {
            int c = t / grid.block_count();
            int b = t % grid.block_count();
            grid.stats[c][b] =
                block_stats(img, block_size, b % grid.blocks_x, b / grid.blocks_x, c);
        }
    }
    return grid;
}

std::vector<std::uint8_t> extract_block(const Image& img, int block_size, int block_index,
                                        int channel) {
    const int bx = block_index % (img.width / block_size);
    const int by = block_index / (img.width / block_size);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(block_size) * block_size);
    std::size_t i = 0;
    for (int y = by * block_size; y < (by + 1) * block_size; ++y)
        for (int x = bx * block_size; x < (bx + 1) * block_size; ++x)
            out[i++] = img.at(x, y, channel);
    return out;
}

void insert_block(Image& img, int block_size, int block_index, int channel,
                  const std::vector<std::uint8_t>& block) {
    const int bx = block_index % (img.width / block_size);
    const int by = block_index / (img.width / block_size);
    std::size_t i = 0;
    for (int y = by * block_size; y < (by + 1) * block_size; ++y)
        for (int x = bx * block_size; x < (bx + 1) * block_size; ++x)
            img.at(x, y, channel) = block[i++];
}

std::vector<std::uint8_t> rotate_block(const std::vector<std::uint8_t>& block, int block_size,
                                       Rotation rot) {
    const int B = block_size;
    std::vector<std::uint8_t> out(block.size());
    switch (rot) {
        case Rotation::r0:
            out = block;
            break;
        case Rotation::r90:  // clockwise
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < B; ++c) out[r * B + c] = block[(B - 1 - c) * B + r];
            break;
        case Rotation::r180:
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < B; ++c) out[r * B + c] = block[(B - 1 - r) * B + (B - 1 - c)];
            break;
        case Rotation::r270:
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < B; ++c) out[r * B + c] = block[c * B + (B - 1 - r)];
            break;
    }
    return out;
}

Rotation inverse_rotation(Rotation rot) {
    switch (rot) {
        case Rotation::r90: return Rotation::r270;
        case Rotation::r270: return Rotation::r90;
        default: return rot;
    }
}

}  // namespace rae
