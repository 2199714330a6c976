#include "rae/rit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rae {
namespace {

constexpr int kAuxTag = 0x01;
constexpr int kBlocksBits = 24;
// Shift magnitudes are stored in units of the step and capped at 15 units so
// the field stays at 4 bits. Larger shifts only arise when a near-black block
// is paired with a near-white one; truncating them costs a little fidelity on
// such blocks but never correctness, because the recorded shift is the one
// that was applied.
constexpr int kShiftMagBits = 4;
constexpr int kShiftMagMax = (1 << kShiftMagBits) - 1;

void push_class_table(BitStream& bs, const std::vector<std::uint8_t>& labels, int class_count) {
    const int w = bit_width_for(static_cast<std::uint64_t>(class_count));
    const int L = bit_width_for(labels.size());

    // Count runs of equal labels to size the RLE alternative.
    std::size_t runs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (i == 0 || labels[i] != labels[i - 1]) ++runs;
    const std::size_t raw_bits = labels.size() * static_cast<std::size_t>(w);
    const std::size_t rle_bits = runs * static_cast<std::size_t>(w + L);

    if (rle_bits < raw_bits) {
        bs.push_bit(1);
        std::size_t i = 0;
        while (i < labels.size()) {
            std::size_t j = i;
            while (j < labels.size() && labels[j] == labels[i]) ++j;
            bs.push_uint(labels[i], w);
            bs.push_uint(j - i - 1, L);
            i = j;
        }
    } else {
        bs.push_bit(0);
        for (std::uint8_t v : labels) bs.push_uint(v, w);
    }
}

std::vector<std::uint8_t> read_class_table(BitReader& r, int blocks, int class_count) {
    const int w = bit_width_for(static_cast<std::uint64_t>(class_count));
    const int L = bit_width_for(static_cast<std::uint64_t>(blocks));
    std::vector<std::uint8_t> labels;
    labels.reserve(static_cast<std::size_t>(blocks));
    if (r.read_bit()) {
        while (static_cast<int>(labels.size()) < blocks) {
            std::uint64_t label = r.read_uint(w);
            std::uint64_t len = r.read_uint(L) + 1;
            if (label >= static_cast<std::uint64_t>(class_count) ||
                labels.size() + len > static_cast<std::size_t>(blocks))
                throw Error(Errc::integrity, "aux: malformed class-table run");
            labels.insert(labels.end(), static_cast<std::size_t>(len),
                          static_cast<std::uint8_t>(label));
        }
    } else {
        for (int i = 0; i < blocks; ++i) {
            std::uint64_t label = r.read_uint(w);
            if (label >= static_cast<std::uint64_t>(class_count))
                throw Error(Errc::integrity, "aux: class label out of range");
            labels.push_back(static_cast<std::uint8_t>(label));
        }
    }
    return labels;
}

}  // namespace

BitStream serialize_aux(const AuxPayload& aux) {
    const int step = aux.mean_shift_step;
    if (step < 1 || step > 64)
        throw Error(Errc::usage, "aux: mean shift step must be in 1..64");

    BitStream bs;
    bs.push_uint(kAuxTag, 8);
    bs.push_uint(static_cast<std::uint64_t>(aux.block_size), 8);
    bs.push_uint(static_cast<std::uint64_t>(aux.class_count), 8);
    bs.push_uint(static_cast<std::uint64_t>(aux.channels), 8);
    bs.push_uint(static_cast<std::uint64_t>(step), 8);
    bs.push_uint(static_cast<std::uint64_t>(aux.blocks), kBlocksBits);
    for (int c = 0; c < aux.channels; ++c) {
        push_class_table(bs, aux.cit_original[c], aux.class_count);
        push_class_table(bs, aux.cit_target[c], aux.class_count);
        // Fixed-width shift and rotation fields: the aux size then depends
        // only on the geometry, not on the target content, which keeps the
        // payload stable across attack strengths.
        for (int d : aux.mean_shifts[c]) {
            if (d % step != 0)
                throw Error(Errc::usage, "aux: mean shift is not a multiple of the step");
            const int mag = (d < 0 ? -d : d) / step;
            if (mag > kShiftMagMax)
                throw Error(Errc::usage, "aux: mean shift magnitude exceeds the field cap");
            bs.push_bit(d < 0 ? 1 : 0);
            bs.push_uint(static_cast<std::uint64_t>(mag), kShiftMagBits);
        }
        for (Rotation rot : aux.rotations[c])
            bs.push_uint(static_cast<std::uint64_t>(rot), 2);
    }
    return bs;
}

AuxPayload deserialize_aux(const BitStream& bits) {
    BitReader r(bits, "aux payload");
    if (r.read_uint(8) != kAuxTag)
        throw Error(Errc::integrity, "aux: unknown format tag");
    AuxPayload aux;
    aux.block_size = static_cast<int>(r.read_uint(8));
    aux.class_count = static_cast<int>(r.read_uint(8));
    aux.channels = static_cast<int>(r.read_uint(8));
    aux.mean_shift_step = static_cast<int>(r.read_uint(8));
    aux.blocks = static_cast<int>(r.read_uint(kBlocksBits));
    if (aux.block_size < 2 || aux.class_count < 1 || aux.class_count > 64 ||
        aux.channels < 1 || aux.channels > 4 || aux.mean_shift_step < 1 ||
        aux.mean_shift_step > 64 || aux.blocks < 1)
        throw Error(Errc::integrity, "aux: header fields out of range");
    const int step = aux.mean_shift_step;
    for (int c = 0; c < aux.channels; ++c) {
        aux.cit_original.push_back(read_class_table(r, aux.blocks, aux.class_count));
        aux.cit_target.push_back(read_class_table(r, aux.blocks, aux.class_count));
        std::vector<int> shifts;
        shifts.reserve(static_cast<std::size_t>(aux.blocks));
        for (int i = 0; i < aux.blocks; ++i) {
            int sign = r.read_bit();
            int mag = static_cast<int>(r.read_uint(kShiftMagBits)) * step;
            if (mag > 255)
                throw Error(Errc::integrity, "aux: mean shift magnitude out of range");
            if (sign && mag == 0)
                throw Error(Errc::integrity, "aux: non-canonical negative zero shift");
            shifts.push_back(sign ? -mag : mag);
        }
        aux.mean_shifts.push_back(std::move(shifts));
        std::vector<Rotation> rots;
        rots.reserve(static_cast<std::size_t>(aux.blocks));
        for (int i = 0; i < aux.blocks; ++i)
            rots.push_back(static_cast<Rotation>(r.read_uint(2)));
        aux.rotations.push_back(std::move(rots));
    }
    if (r.remaining() != 0)
        throw Error(Errc::integrity, "aux: trailing bits after payload");
    return aux;
}

std::vector<std::uint8_t> classify_blocks(const std::vector<BlockStats>& stats, int class_count,
                                          double sd_quantum) {
    const std::size_t n = stats.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (sd_quantum > 0.0) {
        // Coarse ranking: blocks whose sd falls in the same bucket keep raster
        // order. A lightly perturbed copy of an image then classifies almost
        // identically, so pairing an image with such a copy stays near the
        // identity instead of shuffling visually equivalent blocks.
        auto bucket = [&](int i) {
            return static_cast<long long>(stats[static_cast<std::size_t>(i)].sd / sd_quantum);
        };
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return bucket(a) < bucket(b); });
    } else {
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return stats[a].sd < stats[b].sd;  // equal sd keeps raster order
        });
    }
    std::vector<std::uint8_t> labels(n);
    for (int k = 0; k < class_count; ++k) {
        std::size_t lo = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(class_count);
        std::size_t hi =
            n * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(class_count);
        for (std::size_t r = lo; r < hi; ++r)
            labels[static_cast<std::size_t>(order[r])] = static_cast<std::uint8_t>(k);
    }
    return labels;
}

std::vector<int> pair_blocks(const std::vector<std::uint8_t>& cit_original,
                             const std::vector<std::uint8_t>& cit_target, int class_count) {
    if (cit_original.size() != cit_target.size())
        throw Error(Errc::integrity, "pair_blocks: table sizes differ");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(class_count));
    for (std::size_t j = 0; j < cit_target.size(); ++j) {
        if (cit_target[j] >= class_count)
            throw Error(Errc::integrity, "pair_blocks: class label out of range");
        by_class[cit_target[j]].push_back(static_cast<int>(j));
    }
    std::vector<std::size_t> next(static_cast<std::size_t>(class_count), 0);
    std::vector<int> sigma(cit_original.size());
    for (std::size_t i = 0; i < cit_original.size(); ++i) {
        std::uint8_t k = cit_original[i];
        if (k >= class_count)
            throw Error(Errc::integrity, "pair_blocks: class label out of range");
        if (next[k] >= by_class[k].size())
            throw Error(Errc::integrity, "pair_blocks: class sizes disagree between tables");
        sigma[i] = by_class[k][next[k]++];
    }
    for (int k = 0; k < class_count; ++k)
        if (next[static_cast<std::size_t>(k)] != by_class[static_cast<std::size_t>(k)].size())
            throw Error(Errc::integrity, "pair_blocks: class sizes disagree between tables");
    return sigma;
}

int feasible_mean_shift(const std::vector<std::uint8_t>& block, int desired) {
    std::uint8_t lo = 255, hi = 0;
    for (std::uint8_t v : block) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return std::clamp(desired, -static_cast<int>(lo), 255 - static_cast<int>(hi));
}

int quantized_mean_shift(const std::vector<std::uint8_t>& block, int desired, int step) {
    if (step < 1) throw Error(Errc::usage, "rit: mean shift step must be positive");
    if (step == 1) return feasible_mean_shift(block, desired);
    std::uint8_t lo = 255, hi = 0;
    for (std::uint8_t v : block) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const int dmin = -static_cast<int>(lo), dmax = 255 - static_cast<int>(hi);
    int best = 0;
    for (int k = dmin / step - 1; k <= dmax / step + 1; ++k) {
        const int d = k * step;
        if (d < dmin || d > dmax) continue;
        const int cur = std::abs(d - desired), b = std::abs(best - desired);
        // Ties round away from zero: a target mean sitting exactly between
        // two steps is better served by moving than by staying put.
        if (cur < b || (cur == b && std::abs(d) > std::abs(best))) best = d;
    }
    return best;
}

Rotation best_rotation(const std::vector<std::uint8_t>& block,
                       const std::vector<std::uint8_t>& target, int block_size) {
    Rotation best = Rotation::r0;
    unsigned long long best_sse = ~0ull;
    for (int r = 0; r < 4; ++r) {
        std::vector<std::uint8_t> rotated = rotate_block(block, block_size, static_cast<Rotation>(r));
        unsigned long long sse = 0;
        for (std::size_t i = 0; i < rotated.size(); ++i) {
            long long d = static_cast<long long>(rotated[i]) - target[i];
            sse += static_cast<unsigned long long>(d * d);
        }
        if (sse < best_sse) {
            best_sse = sse;
            best = static_cast<Rotation>(r);
        }
    }
    return best;
}

TransformResult rit_transform(const Image& original, const Image& target, const RitConfig& cfg,
                              Exec policy) {
    if (!original.same_shape(target))
        throw Error(Errc::usage, "rit: original and target shapes differ");
    if (cfg.class_count < 1 || cfg.class_count > 64)
        throw Error(Errc::usage, "rit: class count must be in 1..64");
    if (cfg.mean_shift_step < 1 || cfg.mean_shift_step > 64)
        throw Error(Errc::usage, "rit: mean shift step must be in 1..64");

    const BlockGrid grid_o = partition(original, cfg.block_size, policy);
    const BlockGrid grid_t = partition(target, cfg.block_size, policy);
    const int N = grid_o.block_count();
    if (N >= (1 << kBlocksBits))
        throw Error(Errc::usage, "rit: too many blocks for the aux header");

    AuxPayload aux;
    aux.block_size = cfg.block_size;
    aux.class_count = cfg.class_count;
    aux.channels = original.channels;
    aux.mean_shift_step = cfg.mean_shift_step;
    aux.blocks = N;
    aux.cit_original.resize(static_cast<std::size_t>(original.channels));
    aux.cit_target.resize(static_cast<std::size_t>(original.channels));
    aux.mean_shifts.assign(static_cast<std::size_t>(original.channels), std::vector<int>(N));
    aux.rotations.assign(static_cast<std::size_t>(original.channels),
                         std::vector<Rotation>(static_cast<std::size_t>(N)));

    Image assembled(original.width, original.height, original.channels);
    for (int c = 0; c < original.channels; ++c) {
        aux.cit_original[c] = classify_blocks(grid_o.stats[c], cfg.class_count, cfg.sd_quantum);
        aux.cit_target[c] = classify_blocks(grid_t.stats[c], cfg.class_count, cfg.sd_quantum);
        const std::vector<int> sigma =
            pair_blocks(aux.cit_original[c], aux.cit_target[c], cfg.class_count);

        // Each iteration writes a distinct target block, so the parallel
        // path is race-free and bit-identical to the serial one.
        auto emit = [&](int i) {
            const int j = sigma[static_cast<std::size_t>(i)];
            std::vector<std::uint8_t> block = extract_block(original, cfg.block_size, i, c);
            const int desired =
                static_cast<int>(std::llround(grid_t.stats[c][static_cast<std::size_t>(j)].mean) -
                                 std::llround(grid_o.stats[c][static_cast<std::size_t>(i)].mean));
            // Clamp into the 4-bit aux field. Zero is always feasible and the
            // feasible range is an interval, so the clamped shift stays valid.
            const int cap = kShiftMagMax * cfg.mean_shift_step;
            const int d = std::clamp(
                quantized_mean_shift(block, desired, cfg.mean_shift_step), -cap, cap);
            for (std::uint8_t& v : block) v = static_cast<std::uint8_t>(v + d);
            const std::vector<std::uint8_t> tgt = extract_block(target, cfg.block_size, j, c);
            const Rotation rot = best_rotation(block, tgt, cfg.block_size);
            insert_block(assembled, cfg.block_size, j, c,
                         rotate_block(block, cfg.block_size, rot));
            aux.mean_shifts[c][static_cast<std::size_t>(i)] = d;
            aux.rotations[c][static_cast<std::size_t>(i)] = rot;
        };
        if (policy == Exec::parallel) {
#pragma omp parallel for schedule(static)
            for (int i = 0; i < N; ++i) emit(i);
        } else {
            for (int i = 0; i < N; ++i) emit(i);
        }
    }

    TransformResult out;
    out.aux = std::move(aux);
    BitStream bits = serialize_aux(out.aux);
    out.aux_bits = bits.size();
    out.camouflage = rdh_embed(assembled, bits, cfg.rdh, &out.rdh_info);
    out.assembled = std::move(assembled);
    return out;
}

Image rit_restore(const Image& camouflage, Exec policy) {
    RdhExtractResult ext = rdh_extract(camouflage);
    const AuxPayload aux = deserialize_aux(ext.payload);
    const Image& assembled = ext.restored;

    if (aux.channels != assembled.channels)
        throw Error(Errc::integrity, "rit: aux channel count does not match image");
    if (assembled.width % aux.block_size != 0 || assembled.height % aux.block_size != 0)
        throw Error(Errc::integrity, "rit: aux block size does not divide image");
    const int N = (assembled.width / aux.block_size) * (assembled.height / aux.block_size);
    if (N != aux.blocks)
        throw Error(Errc::integrity, "rit: aux block count does not match image");

    Image original(assembled.width, assembled.height, assembled.channels);
    for (int c = 0; c < assembled.channels; ++c) {
        const std::vector<int> sigma =
            pair_blocks(aux.cit_original[c], aux.cit_target[c], aux.class_count);
        std::vector<int> fail(static_cast<std::size_t>(N), 0);
        auto undo = [&](int i) {
            const int j = sigma[static_cast<std::size_t>(i)];
            std::vector<std::uint8_t> block = extract_block(assembled, aux.block_size, j, c);
            block = rotate_block(block, aux.block_size,
                                 inverse_rotation(aux.rotations[c][static_cast<std::size_t>(i)]));
            const int d = aux.mean_shifts[c][static_cast<std::size_t>(i)];
            for (std::uint8_t& v : block) {
                int restored = static_cast<int>(v) - d;
                if (restored < 0 || restored > 255) {
                    fail[static_cast<std::size_t>(i)] = 1;
                    return;
                }
                v = static_cast<std::uint8_t>(restored);
            }
            insert_block(original, aux.block_size, i, c, block);
        };
        if (policy == Exec::parallel) {
#pragma omp parallel for schedule(static)
            for (int i = 0; i < N; ++i) undo(i);
        } else {
            for (int i = 0; i < N; ++i) undo(i);
        }
        for (int i = 0; i < N; ++i)
            if (fail[static_cast<std::size_t>(i)])
                throw Error(Errc::integrity,
                            "rit: mean shift of block " + std::to_string(i) +
                                " drives samples out of range (corrupt aux data)");
    }
    return original;
}

}  // namespace rae
