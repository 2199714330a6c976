#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rae/common.hpp"

namespace rae {

// Append-only sequence of bits. Multi-bit fields are packed MSB-first.
class BitStream {
public:
    void push_bit(int bit) { bits_.push_back(static_cast<std::uint8_t>(bit & 1)); }

    void push_uint(std::uint64_t value, int width) {
        for (int i = width - 1; i >= 0; --i) push_bit(static_cast<int>((value >> i) & 1));
    }

    void append(const BitStream& other) {
        bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
    }

    std::size_t size() const { return bits_.size(); }
    bool empty() const { return bits_.empty(); }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }

    bool operator==(const BitStream& o) const { return bits_ == o.bits_; }

    // Byte packing for on-disk payloads: MSB-first, zero-padded to a byte
    // boundary. The bit count must be carried separately.
    std::vector<std::uint8_t> to_bytes() const;
    static BitStream from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t bit_count);

private:
    std::vector<std::uint8_t> bits_;
};

// Sequential reader over a BitStream; out-of-range reads throw an integrity
// error naming the offending bit offset.
class BitReader {
public:
    explicit BitReader(const BitStream& bs, std::string origin = "bitstream")
        : bs_(bs), origin_(std::move(origin)) {}

    int read_bit() {
        if (pos_ >= bs_.size())
            throw Error(Errc::integrity,
                        origin_ + ": truncated at bit " + std::to_string(pos_));
        return bs_[pos_++];
    }

    std::uint64_t read_uint(int width) {
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v = (v << 1) | static_cast<std::uint64_t>(read_bit());
        return v;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bs_.size() - pos_; }

private:
    const BitStream& bs_;
    std::string origin_;
    std::size_t pos_ = 0;
};

// Number of bits needed to represent values 0 .. n-1 (0 when n <= 1).
int bit_width_for(std::uint64_t n);

}  // namespace rae
