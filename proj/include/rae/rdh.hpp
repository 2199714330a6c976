#pragma once

#include <cstdint>
#include <vector>

#include "rae/bitstream.hpp"
#include "rae/common.hpp"
#include "rae/image.hpp"

namespace rae {

// Reversible data hiding by multi-pass histogram shifting.
//
// Wire format. The last 58 samples of the image are the reserved header
// region; their LSBs hold [magic:16][pass count:8][record of the last
// pass:34], with header bit i stored in the LSB of sample n-1-i. All other
// samples form the embedding region. Each pass picks one channel, a peak
// bin P and a zero bin Z of that channel's current histogram, shifts the
// values strictly between P and Z by one toward Z, and embeds bits into the
// P-valued samples in ascending sample order (bit b maps P to P, or to the
// neighbour of P toward Z).
//
// The bit slice carried by pass p is
//   [record of pass p-1 : 34, absent for p = 1]
//   [location map: 1 bit "present"; if set, 20-bit entry count then 24-bit
//    per-channel sample ordinals of the samples that already held value Z]
//   [next chunk of the logical stream]
// so extraction walks passes last-to-first, each pass's slice revealing the
// record needed to undo the pass before it. A pass record is
// [channel:2][peak:8][zero:8][bits embedded:16].
//
// The logical stream is
//   [58 bits: original LSBs of the reserved samples, ascending]
//   [payload bit length: 32-bit big-endian]
//   [payload]
// which makes extraction restore the cover image exactly.
//
// Z is chosen to minimise (bin count, |Z - P|, Z); a non-empty Z is only
// legal at distance >= 2 from P so that mapped samples can never be mistaken
// for embedded ones. Samples listed in the location map are left in place by
// the shift and skipped by the inverse shift.

struct RdhConfig {
    // Pass budget per channel; the total budget is max_passes * channels.
    int max_passes = 96;
    // Bits held back from the reported capacity to absorb the difference
    // between the capacity simulation and an actual embedding run.
    int capacity_slack = 128;
};

struct PassRecord {
    int channel = 0;
    int peak = 0;
    int zero = 0;
    std::uint32_t bits_embedded = 0;
};

// What an embedding run did: one record per pass plus the size of the
// reserved header region whose LSBs are bootstrapped through the stream.
struct EmbedRecord {
    std::vector<PassRecord> passes;
    int bootstrap_bits = 0;
};

// Estimated embeddable payload size in bits (never negative). The estimate
// simulates the pass loop on the image's histograms, assuming embedded bits
// split evenly between the peak and its neighbour, and subtracts the header,
// length field and a safety slack. rdh_embed accepts any payload up to this
// size and rejects anything larger.
std::int64_t rdh_capacity(const Image& img, const RdhConfig& cfg = {});

// Embeds the payload, returning the carrier image. Throws Errc::capacity if
// the payload exceeds rdh_capacity(cover, cfg).
Image rdh_embed(const Image& cover, const BitStream& payload, const RdhConfig& cfg = {},
                EmbedRecord* info = nullptr);

struct RdhExtractResult {
    BitStream payload;
    Image restored;  // bit-exact cover image
};

// Inverse of rdh_embed. Throws Errc::integrity if the image carries no
// payload or the embedded structures are inconsistent.
RdhExtractResult rdh_extract(const Image& carrier);

}  // namespace rae
