#include "rae/bitstream.hpp"

namespace rae {

std::vector<std::uint8_t> BitStream::to_bytes() const {
    std::vector<std::uint8_t> out((bits_.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    return out;
}

BitStream BitStream::from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t bit_count) {
    if (bit_count > bytes.size() * 8)
        throw Error(Errc::integrity, "bitstream: bit count exceeds byte buffer");
    BitStream bs;
    bs.bits_.reserve(bit_count);
    for (std::size_t i = 0; i < bit_count; ++i)
        bs.push_bit((bytes[i / 8] >> (7 - i % 8)) & 1);
    return bs;
}

int bit_width_for(std::uint64_t n) {
    if (n <= 1) return 0;
    int w = 0;
    std::uint64_t v = n - 1;
    while (v) {
        ++w;
        v >>= 1;
    }
    return w;
}

}  // namespace rae
