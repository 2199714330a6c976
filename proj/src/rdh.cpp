#include "rae/rdh.hpp"

#include <algorithm>
#include <array>
#include <cstddef>

namespace rae {
namespace {

constexpr int kMagicBits = 16;
constexpr int kPassCountBits = 8;
constexpr int kRecordBits = 2 + 8 + 8 + 16;
constexpr int kReserveBits = kMagicBits + kPassCountBits + kRecordBits;  // 58
constexpr int kLengthBits = 32;
constexpr std::uint32_t kMagic = 0x52AE;
constexpr std::uint32_t kMaxBitsPerPass = 0xFFFF;
constexpr int kMapCountBits = 20;
constexpr int kMapEntryBits = 24;

using Histogram = std::array<std::int64_t, 256>;

// Number of embedding-region samples belonging to `channel`.
std::int64_t region_channel_count(std::int64_t region_total, int channels, int channel) {
    if (region_total <= channel) return 0;
    return (region_total - channel + channels - 1) / channels;
}

Histogram region_histogram(const Image& img, std::int64_t region_total, int channel) {
    Histogram h{};
    for (std::int64_t i = channel; i < region_total; i += img.channels) ++h[img.pixels[i]];
    return h;
}

int choose_peak(const Histogram& h) {
    int best = 0;
    for (int v = 1; v < 256; ++v)
        if (h[v] > h[best]) best = v;
    return best;
}

// Zero-bin choice: prefer the emptiest bin, then the closest, then the
// smallest value. Non-empty bins are legal only at distance >= 2 from the
// peak, so extraction can tell embedded samples from mapped ones.
bool choose_zero(const Histogram& h, int peak, int* zero) {
    bool found = false;
    std::int64_t best_count = 0;
    int best_dist = 0, best = 0;
    for (int v = 0; v < 256; ++v) {
        if (v == peak) continue;
        int dist = v > peak ? v - peak : peak - v;
        if (h[v] != 0 && dist < 2) continue;
        if (!found || h[v] < best_count || (h[v] == best_count && dist < best_dist) ||
            (h[v] == best_count && dist == best_dist && v < best)) {
            found = true;
            best_count = h[v];
            best_dist = dist;
            best = v;
        }
    }
    *zero = best;
    return found;
}

std::int64_t map_cost_bits(std::int64_t zero_count) {
    return zero_count > 0 ? 1 + kMapCountBits + kMapEntryBits * zero_count : 1;
}

void push_record(BitStream& bs, const PassRecord& r) {
    bs.push_uint(static_cast<std::uint64_t>(r.channel), 2);
    bs.push_uint(static_cast<std::uint64_t>(r.peak), 8);
    bs.push_uint(static_cast<std::uint64_t>(r.zero), 8);
    bs.push_uint(r.bits_embedded, 16);
}

PassRecord read_record(BitReader& r) {
    PassRecord rec;
    rec.channel = static_cast<int>(r.read_uint(2));
    rec.peak = static_cast<int>(r.read_uint(8));
    rec.zero = static_cast<int>(r.read_uint(8));
    rec.bits_embedded = static_cast<std::uint32_t>(r.read_uint(16));
    return rec;
}

struct PassChoice {
    int channel = -1;
    int peak = 0;
    int zero = 0;
    std::int64_t avail = 0;      // embeddable bits (peak count, capped)
    std::int64_t map_bits = 0;   // location-map cost
    std::int64_t zero_count = 0;
};

// Picks the channel whose current histogram nets the most bits this pass.
bool choose_pass(const std::vector<Histogram>& hists, PassChoice* out) {
    PassChoice best;
    std::int64_t best_score = 0;
    for (int c = 0; c < static_cast<int>(hists.size()); ++c) {
        const Histogram& h = hists[c];
        int peak = choose_peak(h);
        if (h[peak] == 0) continue;
        int zero;
        if (!choose_zero(h, peak, &zero)) continue;
        PassChoice cand;
        cand.channel = c;
        cand.peak = peak;
        cand.zero = zero;
        cand.zero_count = h[zero];
        cand.avail = std::min<std::int64_t>(h[peak], kMaxBitsPerPass);
        cand.map_bits = map_cost_bits(h[zero]);
        std::int64_t score = cand.avail - cand.map_bits;
        if (best.channel < 0 || score > best_score) {
            best = cand;
            best_score = score;
        }
    }
    if (best.channel < 0) return false;
    *out = best;
    return true;
}

// Applies the histogram shift for one pass: values strictly between peak and
// zero move one step toward zero. Peak- and zero-valued samples stay put.
void shift_region(Image& img, std::int64_t region_total, int channel, int peak, int zero) {
    if (zero > peak) {
        for (std::int64_t i = channel; i < region_total; i += img.channels) {
            std::uint8_t v = img.pixels[i];
            if (v > peak && v < zero) img.pixels[i] = static_cast<std::uint8_t>(v + 1);
        }
    } else {
        for (std::int64_t i = channel; i < region_total; i += img.channels) {
            std::uint8_t v = img.pixels[i];
            if (v < peak && v > zero) img.pixels[i] = static_cast<std::uint8_t>(v - 1);
        }
    }
}

}  // namespace

std::int64_t rdh_capacity(const Image& img, const RdhConfig& cfg) {
    const std::int64_t n = static_cast<std::int64_t>(img.sample_count());
    const std::int64_t region_total = n - kReserveBits;
    if (region_total <= 0) return 0;
    if (img.channels < 1 || img.channels > 4)
        throw Error(Errc::usage, "rdh: channel count must be 1..4");
    for (int c = 0; c < img.channels; ++c)
        if (region_channel_count(region_total, img.channels, c) >= (1 << kMapEntryBits))
            throw Error(Errc::usage, "rdh: image too large for 24-bit location-map entries");

    std::vector<Histogram> hists;
    for (int c = 0; c < img.channels; ++c)
        hists.push_back(region_histogram(img, region_total, c));

    const int budget = std::min(cfg.max_passes * img.channels, 255);
    std::int64_t total = 0;
    for (int pass = 0; pass < budget; ++pass) {
        PassChoice ch;
        if (!choose_pass(hists, &ch)) break;
        // Always charge a pass record; the real run gets the last one free
        // (it lives in the reserved header), which only adds margin.
        std::int64_t net = ch.avail - ch.map_bits - kRecordBits;
        if (net <= 0) break;
        total += net;

        Histogram& h = hists[ch.channel];
        const int dir = ch.zero > ch.peak ? 1 : -1;
        // Shift: bins strictly between peak and zero slide one toward zero.
        if (dir == 1) {
            for (int v = ch.zero - 1; v > ch.peak; --v) {
                h[v + 1] += h[v];
                h[v] = 0;
            }
        } else {
            for (int v = ch.zero + 1; v < ch.peak; ++v) {
                h[v - 1] += h[v];
                h[v] = 0;
            }
        }
        // Embed: assume an even bit split between peak and its neighbour.
        h[ch.peak] -= ch.avail;
        h[ch.peak] += (ch.avail + 1) / 2;
        h[ch.peak + dir] += ch.avail / 2;
    }

    const std::int64_t overhead = kReserveBits + kLengthBits + cfg.capacity_slack;
    return std::max<std::int64_t>(0, total - overhead);
}

Image rdh_embed(const Image& cover, const BitStream& payload, const RdhConfig& cfg,
                EmbedRecord* info) {
    const std::int64_t n = static_cast<std::int64_t>(cover.sample_count());
    const std::int64_t region_total = n - kReserveBits;
    const std::int64_t capacity = rdh_capacity(cover, cfg);
    if (static_cast<std::int64_t>(payload.size()) > capacity)
        throw Error(Errc::capacity, "rdh: payload of " + std::to_string(payload.size()) +
                                        " bits exceeds capacity of " + std::to_string(capacity) +
                                        " bits");

    Image img = cover;

    // Logical stream: reserved-region LSBs, payload length, payload.
    BitStream stream;
    for (std::int64_t i = n - kReserveBits; i < n; ++i) stream.push_bit(img.pixels[i] & 1);
    stream.push_uint(static_cast<std::uint64_t>(payload.size()), kLengthBits);
    stream.append(payload);

    std::vector<Histogram> hists;
    for (int c = 0; c < img.channels; ++c)
        hists.push_back(region_histogram(img, region_total, c));

    const int budget = std::min(cfg.max_passes * img.channels, 255);
    std::vector<PassRecord> passes;
    std::size_t qpos = 0;

    while (qpos < stream.size()) {
        if (static_cast<int>(passes.size()) >= budget)
            throw Error(Errc::capacity,
                        "rdh: pass budget exhausted with " +
                            std::to_string(stream.size() - qpos) + " bits left to embed");
        PassChoice ch;
        if (!choose_pass(hists, &ch))
            throw Error(Errc::capacity, "rdh: no usable histogram bin left while " +
                                            std::to_string(stream.size() - qpos) +
                                            " bits remain");

        // Slice prefix: previous pass's record (from pass 2 on) plus the
        // location map of samples already holding the zero value.
        BitStream prefix;
        if (!passes.empty()) push_record(prefix, passes.back());
        if (ch.zero_count > 0) {
            prefix.push_bit(1);
            prefix.push_uint(static_cast<std::uint64_t>(ch.zero_count), kMapCountBits);
            for (std::int64_t i = ch.channel, ord = 0; i < region_total; i += img.channels, ++ord)
                if (img.pixels[i] == ch.zero)
                    prefix.push_uint(static_cast<std::uint64_t>(ord), kMapEntryBits);
        } else {
            prefix.push_bit(0);
        }
        if (ch.avail <= static_cast<std::int64_t>(prefix.size()))
            throw Error(Errc::capacity, "rdh: pass overhead exceeds peak-bin capacity");

        const std::int64_t to_embed =
            std::min(ch.avail, static_cast<std::int64_t>(prefix.size() + (stream.size() - qpos)));

        shift_region(img, region_total, ch.channel, ch.peak, ch.zero);

        const int dir = ch.zero > ch.peak ? 1 : -1;
        std::int64_t k = 0;
        for (std::int64_t i = ch.channel; i < region_total && k < to_embed; i += img.channels) {
            if (img.pixels[i] != ch.peak) continue;
            int bit = k < static_cast<std::int64_t>(prefix.size())
                          ? prefix[static_cast<std::size_t>(k)]
                          : stream[qpos + static_cast<std::size_t>(
                                              k - static_cast<std::int64_t>(prefix.size()))];
            if (bit) img.pixels[i] = static_cast<std::uint8_t>(ch.peak + dir);
            ++k;
        }
        if (k != to_embed)
            throw Error(Errc::capacity, "rdh: histogram bookkeeping mismatch during embed");

        qpos += static_cast<std::size_t>(to_embed) - prefix.size();
        passes.push_back({ch.channel, ch.peak, ch.zero, static_cast<std::uint32_t>(to_embed)});
        hists[ch.channel] = region_histogram(img, region_total, ch.channel);
    }

    if (passes.empty())
        throw Error(Errc::capacity, "rdh: image too small to carry the stream header");

    // Header: magic, pass count, record of the final pass, in the LSBs of
    // the reserved samples (header bit i goes to sample n-1-i).
    BitStream header;
    header.push_uint(kMagic, kMagicBits);
    header.push_uint(passes.size(), kPassCountBits);
    push_record(header, passes.back());
    for (std::size_t i = 0; i < static_cast<std::size_t>(kReserveBits); ++i) {
        std::uint8_t& s = img.pixels[static_cast<std::size_t>(n) - 1 - i];
        s = static_cast<std::uint8_t>((s & ~1u) | header[i]);
    }

    if (info) {
        info->passes = passes;
        info->bootstrap_bits = kReserveBits;
    }
    return img;
}

RdhExtractResult rdh_extract(const Image& carrier) {
    const std::int64_t n = static_cast<std::int64_t>(carrier.sample_count());
    const std::int64_t region_total = n - kReserveBits;
    if (region_total <= 0)
        throw Error(Errc::integrity, "rdh: image too small to hold a header");

    BitStream header_bits;
    for (std::size_t i = 0; i < static_cast<std::size_t>(kReserveBits); ++i)
        header_bits.push_bit(carrier.pixels[static_cast<std::size_t>(n) - 1 - i] & 1);
    BitReader header(header_bits, "rdh header");
    if (header.read_uint(kMagicBits) != kMagic)
        throw Error(Errc::integrity, "rdh: no embedded payload (magic mismatch)");
    const int pass_count = static_cast<int>(header.read_uint(kPassCountBits));
    if (pass_count < 1)
        throw Error(Errc::integrity, "rdh: header declares zero passes");
    PassRecord rec = read_record(header);

    Image img = carrier;
    std::vector<BitStream> chunks(static_cast<std::size_t>(pass_count));

    for (int p = pass_count; p >= 1; --p) {
        if (rec.channel >= img.channels || rec.peak == rec.zero || rec.bits_embedded == 0)
            throw Error(Errc::integrity, "rdh: malformed record for pass " + std::to_string(p));
        const int P = rec.peak, Z = rec.zero, c = rec.channel;
        const int dir = Z > P ? 1 : -1;

        // Un-embed: collect bits from {P, P+dir}-valued samples in order,
        // restoring them to P.
        BitStream slice;
        for (std::int64_t i = c;
             i < region_total && slice.size() < rec.bits_embedded; i += img.channels) {
            std::uint8_t v = img.pixels[i];
            if (v == P) {
                slice.push_bit(0);
            } else if (static_cast<int>(v) == P + dir) {
                slice.push_bit(1);
                img.pixels[i] = static_cast<std::uint8_t>(P);
            }
        }
        if (slice.size() < rec.bits_embedded)
            throw Error(Errc::integrity, "rdh: pass " + std::to_string(p) + " expected " +
                                             std::to_string(rec.bits_embedded) +
                                             " embedded bits, found " +
                                             std::to_string(slice.size()));

        BitReader sr(slice, "rdh pass " + std::to_string(p));
        PassRecord prev{};
        if (p >= 2) prev = read_record(sr);
        std::vector<std::uint32_t> map;
        if (sr.read_bit()) {
            std::uint64_t m = sr.read_uint(kMapCountBits);
            map.reserve(static_cast<std::size_t>(m));
            const std::int64_t ch_count = region_channel_count(region_total, img.channels, c);
            std::uint64_t prev_ord = 0;
            for (std::uint64_t k = 0; k < m; ++k) {
                std::uint64_t ord = sr.read_uint(kMapEntryBits);
                if (ord >= static_cast<std::uint64_t>(ch_count) ||
                    (k > 0 && ord <= prev_ord))
                    throw Error(Errc::integrity,
                                "rdh: corrupt location map in pass " + std::to_string(p));
                prev_ord = ord;
                map.push_back(static_cast<std::uint32_t>(ord));
            }
        }

        // Data chunk carried by this pass (stream bits only).
        BitStream chunk;
        while (sr.remaining() > 0) chunk.push_bit(sr.read_bit());
        chunks[static_cast<std::size_t>(p - 1)] = std::move(chunk);

        // Un-shift: move values back toward the peak, skipping mapped
        // samples that legitimately held the zero value.
        std::size_t mi = 0;
        std::int64_t ord = 0;
        for (std::int64_t i = c; i < region_total; i += img.channels, ++ord) {
            int v = img.pixels[i];
            bool mapped = mi < map.size() && static_cast<std::int64_t>(map[mi]) == ord;
            if (mapped) {
                ++mi;
                if (v != Z)
                    throw Error(Errc::integrity,
                                "rdh: mapped sample does not hold the zero value (pass " +
                                    std::to_string(p) + ")");
                continue;
            }
            if (dir == 1) {
                if (v >= P + 2 && v <= Z) img.pixels[i] = static_cast<std::uint8_t>(v - 1);
            } else {
                if (v <= P - 2 && v >= Z) img.pixels[i] = static_cast<std::uint8_t>(v + 1);
            }
        }
        if (mi != map.size())
            throw Error(Errc::integrity, "rdh: location map does not match image (pass " +
                                             std::to_string(p) + ")");
        rec = prev;
    }

    BitStream stream;
    for (const BitStream& c : chunks) stream.append(c);
    BitReader sr(stream, "rdh stream");
    for (std::int64_t i = 0; i < kReserveBits; ++i) {
        std::uint8_t& s = img.pixels[static_cast<std::size_t>(n - kReserveBits + i)];
        s = static_cast<std::uint8_t>((s & ~1u) | static_cast<std::uint8_t>(sr.read_bit()));
    }
    const std::uint64_t len = sr.read_uint(kLengthBits);
    if (len != sr.remaining())
        throw Error(Errc::integrity, "rdh: stream declares " + std::to_string(len) +
                                         " payload bits but carries " +
                                         std::to_string(sr.remaining()));
    RdhExtractResult out;
    for (std::uint64_t i = 0; i < len; ++i) out.payload.push_bit(sr.read_bit());
    out.restored = std::move(img);
    return out;
}

}  // namespace rae
