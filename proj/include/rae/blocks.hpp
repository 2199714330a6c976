#pragma once

#include <cstdint>
#include <vector>

#include "rae/common.hpp"
#include "rae/image.hpp"

namespace rae {

// Per-block first and second moments of one channel's samples.
struct BlockStats {
    double mean = 0.0;
    double sd = 0.0;  // population standard deviation
    std::uint8_t min = 0;
    std::uint8_t max = 0;
};

// Partition of an image into non-overlapping B x B blocks, with per-channel
// per-block statistics. Blocks are indexed in raster order (left-to-right,
// top-to-bottom); stats are stored per channel.
struct BlockGrid {
    int block_size = 0;
    int blocks_x = 0;
    int blocks_y = 0;
    int channels = 0;
    // stats[c][b] is the statistics of block b in channel c.
    std::vector<std::vector<BlockStats>> stats;

    int block_count() const { return blocks_x * blocks_y; }
};

// Computes the block grid. Throws a usage error if B < 2 or if the image
// dimensions are not exact multiples of B. Accumulation inside a block is
// row-major in double precision; results are independent of the policy.
BlockGrid partition(const Image& img, int block_size, Exec policy = Exec::serial);

// Copies one B x B block of a single channel out of / into an image.
// Blocks are addressed by raster-order index.
std::vector<std::uint8_t> extract_block(const Image& img, int block_size, int block_index,
                                        int channel);
void insert_block(Image& img, int block_size, int block_index, int channel,
                  const std::vector<std::uint8_t>& block);

// Clockwise rotations of a square block.
enum class Rotation : std::uint8_t { r0 = 0, r90 = 1, r180 = 2, r270 = 3 };

std::vector<std::uint8_t> rotate_block(const std::vector<std::uint8_t>& block, int block_size,
                                       Rotation rot);
Rotation inverse_rotation(Rotation rot);

}  // namespace rae
