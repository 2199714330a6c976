#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rae/common.hpp"

namespace rae {

// 8-bit image, row-major, channel-interleaved. channels is 1 (grayscale,
// stored as PGM) or 3 (RGB, stored as PPM). maxval is always 255.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t sample_count() const { return pixels.size(); }

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool operator==(const Image& o) const {
        return same_shape(o) && pixels == o.pixels;
    }
};

// Plain-text netpbm I/O (P2 for grayscale, P3 for RGB), maxval 255 only.
// load_image accepts any legal whitespace/comment layout and reports parse
// errors with a byte offset; save_image always emits one canonical layout so
// that load -> save is byte-identical for canonical files.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

// In-memory versions of the above (exposed for tests and the eval harness).
Image parse_netpbm(const std::string& text, const std::string& origin = "<memory>");
std::string format_netpbm(const Image& img);

// Peak signal-to-noise ratio over all samples, in dB. Identical images give
// +infinity. The sum of squared errors is integer-exact, so the result does
// not depend on summation order or execution policy.
double psnr(const Image& a, const Image& b, Exec policy = Exec::serial);

// Mean squared error over all samples (integer-exact accumulation).
double mse(const Image& a, const Image& b, Exec policy = Exec::serial);

}  // namespace rae
