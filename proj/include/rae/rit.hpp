#pragma once

#include <cstdint>
#include <vector>

#include "rae/bitstream.hpp"
#include "rae/blocks.hpp"
#include "rae/common.hpp"
#include "rae/image.hpp"
#include "rae/rdh.hpp"

namespace rae {

// Reversible image transformation: re-arranges the blocks of an original
// image so that it visually approximates a same-sized target image, in a way
// that can be undone exactly. Blocks are matched per channel by standard-
// deviation rank (split into class_count equal-size classes), then each
// original block is mean-shifted toward its partner, rotated to the best of
// four orientations, and placed at the partner's position. Everything needed
// to undo this (both class index tables, the per-block mean shifts and
// rotations) is serialized and embedded into the assembled image with the
// reversible data-hiding codec.

struct RitConfig {
    int block_size = 4;
    int class_count = 16;     // 1..64
    int mean_shift_step = 4;  // shifts snap to multiples of this (1..64);
                              // larger steps keep the assembled image's
                              // histogram concentrated for the embedding
    double sd_quantum = 16.0;  // sd bucket width for the class ranking; 0 ranks
                               // by exact sd. Coarse buckets keep the pairing
                               // stable when the target is a lightly perturbed
                               // copy of the original.
    RdhConfig rdh;
};

// Auxiliary information for one transformation.
struct AuxPayload {
    int block_size = 0;
    int class_count = 0;
    int channels = 0;
    int mean_shift_step = 1;
    int blocks = 0;  // per channel
    // Per channel: class labels of every block (raster order) in the
    // original and the target image.
    std::vector<std::vector<std::uint8_t>> cit_original;
    std::vector<std::vector<std::uint8_t>> cit_target;
    // Per channel, indexed by original block: applied mean shift / rotation.
    std::vector<std::vector<int>> mean_shifts;
    std::vector<std::vector<Rotation>> rotations;

    bool operator==(const AuxPayload&) const = default;
};

// Aux wire format: [tag:8=0x01][block size:8][class count:8][channels:8]
// [shift step:8][blocks:24], then per channel both class tables (1-bit
// raw/RLE flag each), the mean shifts (1-bit sign + 4-bit magnitude counted
// in steps, so at most 15 steps) and the rotations (2 bits).
BitStream serialize_aux(const AuxPayload& aux);
AuxPayload deserialize_aux(const BitStream& bits);

// Class labels per block: blocks are ranked by (sd, block index) ascending
// and the rank range is cut into class_count contiguous classes whose sizes
// differ by at most one. With sd_quantum > 0 the ranking compares
// floor(sd / sd_quantum) instead of sd, so near-equal blocks keep raster
// order and the labels become robust to small perturbations of the image.
std::vector<std::uint8_t> classify_blocks(const std::vector<BlockStats>& stats, int class_count,
                                          double sd_quantum = 0.0);

// Bijection original-block -> target-block: the k-th original block of a
// class (raster order) maps to the k-th target block of the same class.
// Throws Errc::integrity if any class sizes disagree.
std::vector<int> pair_blocks(const std::vector<std::uint8_t>& cit_original,
                             const std::vector<std::uint8_t>& cit_target, int class_count);

// The integer shift closest to `desired` that keeps every sample of the
// block inside [0, 255].
int feasible_mean_shift(const std::vector<std::uint8_t>& block, int desired);

// Like feasible_mean_shift but restricted to multiples of `step`; among
// equally close candidates the larger magnitude wins. Zero is always
// feasible, so a result exists for every block.
int quantized_mean_shift(const std::vector<std::uint8_t>& block, int desired, int step);

// Rotation of `block` minimising the sum of squared differences against
// `target`; ties resolve to the smaller rotation index.
Rotation best_rotation(const std::vector<std::uint8_t>& block,
                       const std::vector<std::uint8_t>& target, int block_size);

struct TransformResult {
    Image camouflage;      // carries the embedded aux payload
    Image assembled;       // camouflage before embedding (for inspection)
    AuxPayload aux;
    std::size_t aux_bits = 0;
    EmbedRecord rdh_info;
};

// Disguises `original` as `target`. Both images must have identical shape,
// divisible by the block size. Throws Errc::capacity if the aux payload does
// not fit into the assembled image.
TransformResult rit_transform(const Image& original, const Image& target, const RitConfig& cfg,
                              Exec policy = Exec::parallel);

// Exact inverse: recovers the original image from a camouflage image
// produced by rit_transform.
Image rit_restore(const Image& camouflage, Exec policy = Exec::parallel);

}  // namespace rae
