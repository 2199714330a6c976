#include "rae/image.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rae {
namespace {

[[noreturn]] void parse_fail(const std::string& origin, std::size_t offset,
                             const std::string& what) {
    throw Error(Errc::io, origin + ": byte " + std::to_string(offset) + ": " + what);
}

// Cursor over the raw file text that skips whitespace and '#' comments and
// tracks the byte offset for error reporting.
class TextCursor {
public:
    TextCursor(const std::string& text, std::size_t start, const std::string& origin)
        : text_(text), pos_(start), origin_(origin) {}

    void skip_separators() {
        while (pos_ < text_.size()) {
            char ch = text_[pos_];
            if (ch == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' ||
                       ch == '\v' || ch == '\f') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    // Reads a non-negative decimal integer of at most `max` value.
    int next_int(const char* what, long max) {
        skip_separators();
        if (pos_ >= text_.size())
            parse_fail(origin_, pos_, std::string("unexpected end of file, expected ") + what);
        if (text_[pos_] < '0' || text_[pos_] > '9')
            parse_fail(origin_, pos_, std::string("expected ") + what);
        long value = 0;
        std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
            value = value * 10 + (text_[pos_] - '0');
            if (value > max)
                parse_fail(origin_, start, std::string(what) + " out of range");
            ++pos_;
        }
        return static_cast<int>(value);
    }

    bool at_end() {
        skip_separators();
        return pos_ >= text_.size();
    }

    std::size_t pos() const { return pos_; }

private:
    const std::string& text_;
    std::size_t pos_;
    const std::string& origin_;
};

}  // namespace

Image parse_netpbm(const std::string& text, const std::string& origin) {
    if (text.size() < 2 || text[0] != 'P' || (text[1] != '2' && text[1] != '3'))
        parse_fail(origin, 0, "not a plain PGM/PPM file (expected P2 or P3 magic)");

    Image img;
    img.channels = text[1] == '2' ? 1 : 3;

    TextCursor cur(text, 2, origin);
    img.width = cur.next_int("width", 1 << 20);
    img.height = cur.next_int("height", 1 << 20);
    if (img.width <= 0 || img.height <= 0)
        parse_fail(origin, cur.pos(), "image dimensions must be positive");
    int maxval = cur.next_int("maxval", 1 << 20);
    if (maxval != 255)
        parse_fail(origin, cur.pos(), "unsupported maxval " + std::to_string(maxval) +
                                          " (only 255 is supported)");

    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (cur.at_end())
            parse_fail(origin, cur.pos(),
                       "truncated sample list: expected " + std::to_string(img.pixels.size()) +
                           " samples, got " + std::to_string(i));
        img.pixels[i] = static_cast<std::uint8_t>(cur.next_int("sample", 255));
    }
    if (!cur.at_end())
        parse_fail(origin, cur.pos(), "trailing data after last sample");
    return img;
}

std::string format_netpbm(const Image& img) {
    std::string out;
    out.reserve(img.pixels.size() * 4 + 32);
    out += img.channels == 1 ? "P2\n" : "P3\n";
    out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    const int per_row = img.width * img.channels;
    std::size_t i = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int k = 0; k < per_row; ++k) {
            if (k) out += ' ';
            out += std::to_string(img.pixels[i++]);
        }
        out += '\n';
    }
    return out;
}

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(Errc::io, path + ": read failure");
    return parse_netpbm(ss.str(), path);
}

void save_image(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw Error(Errc::usage, path + ": only 1- or 3-channel images can be saved");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, path + ": cannot open for writing");
    out << format_netpbm(img);
    out.flush();
    if (!out) throw Error(Errc::io, path + ": write failure");
}

double mse(const Image& a, const Image& b, Exec policy) {
    if (!a.same_shape(b))
        throw Error(Errc::usage, "mse: image shapes differ");
    const std::size_t n = a.sample_count();
    if (n == 0) throw Error(Errc::usage, "mse: empty image");
    unsigned long long sse = 0;
    if (policy == Exec::parallel) {
#pragma omp parallel for reduction(+ : sse) schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            long long d = static_cast<long long>(a.pixels[i]) - b.pixels[i];
            sse += static_cast<unsigned long long>(d * d);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            long long d = static_cast<long long>(a.pixels[i]) - b.pixels[i];
            sse += static_cast<unsigned long long>(d * d);
        }
    }
    return static_cast<double>(sse) / static_cast<double>(n);
}

double psnr(const Image& a, const Image& b, Exec policy) {
    double m = mse(a, b, policy);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

}  // namespace rae
