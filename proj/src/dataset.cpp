#include "rae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

namespace fs = std::filesystem;

namespace rae {
namespace {

struct Pt {
    double x, y;
};
using Polyline = std::vector<Pt>;

// Stick-figure digit glyphs in a unit box (x right, y down). Several pairs
// (3/8, 5/6, 1/7) deliberately share strokes so that jittered renders keep
// the classification problem from becoming trivially separable.
const std::vector<std::vector<Polyline>>& digit_glyphs() {
    static const std::vector<std::vector<Polyline>> glyphs = {
        // 0
        {{{0.50, 0.08}, {0.82, 0.25}, {0.82, 0.75}, {0.50, 0.92}, {0.18, 0.75}, {0.18, 0.25},
          {0.50, 0.08}}},
        // 1
        {{{0.35, 0.25}, {0.55, 0.08}, {0.55, 0.92}}, {{0.35, 0.92}, {0.75, 0.92}}},
        // 2
        {{{0.20, 0.25}, {0.50, 0.08}, {0.80, 0.25}, {0.80, 0.42}, {0.20, 0.92}, {0.82, 0.92}}},
        // 3
        {{{0.22, 0.12}, {0.78, 0.12}, {0.50, 0.48}, {0.82, 0.72}, {0.55, 0.92}, {0.20, 0.82}}},
        // 4
        {{{0.65, 0.92}, {0.65, 0.08}, {0.18, 0.62}, {0.85, 0.62}}},
        // 5
        {{{0.78, 0.10}, {0.25, 0.10}, {0.22, 0.50}, {0.60, 0.45}, {0.80, 0.65}, {0.60, 0.90},
          {0.20, 0.85}}},
        // 6
        {{{0.70, 0.10}, {0.35, 0.35}, {0.22, 0.65}, {0.40, 0.90}, {0.70, 0.85}, {0.75, 0.60},
          {0.50, 0.50}, {0.22, 0.65}}},
        // 7
        {{{0.20, 0.12}, {0.82, 0.12}, {0.45, 0.92}}},
        // 8
        {{{0.50, 0.10}, {0.75, 0.28}, {0.50, 0.47}, {0.25, 0.28}, {0.50, 0.10}},
         {{0.50, 0.47}, {0.80, 0.68}, {0.50, 0.90}, {0.20, 0.68}, {0.50, 0.47}}},
        // 9
        {{{0.75, 0.35}, {0.55, 0.12}, {0.28, 0.20}, {0.25, 0.45}, {0.50, 0.55}, {0.75, 0.35},
          {0.68, 0.65}, {0.35, 0.90}}},
    };
    return glyphs;
}

double segment_distance(double px, double py, const Pt& a, const Pt& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

Image render_digit(int digit, int size, std::mt19937& rng) {
    auto uni = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng()) / (static_cast<double>(rng.max()) + 1.0));
    };
    const double scale = uni(0.62, 1.05);
    const double angle = uni(-0.34, 0.34);
    const double shear = uni(-0.35, 0.35);
    const double tx = uni(-3.5, 3.5), ty = uni(-3.5, 3.5);
    // Thick strokes keep the discriminative features low-frequency, and the
    // flat stroke interiors are as cheap for the block transform to relocate
    // as the flat background.
    const double thickness = uni(2.6, 4.4);
    // Low contrast on purpose: small pixel perturbations should be able to
    // reach the class boundaries, as they do for photographic classifiers.
    // Multiples of 16 keep stroke and half-tone pixels on the same coarse
    // value lattice as the background texture.
    const int fg = 16 * static_cast<int>(uni(4.0, 8.0));

    const double ca = std::cos(angle), sa = std::sin(angle);
    const double margin = 3.0;
    const double span = size - 2.0 * margin;

    // Glyph coordinates -> pixel coordinates, with per-vertex jitter so that
    // intra-class variation overlaps the stroke-sharing classes.
    std::vector<Polyline> strokes;
    for (const Polyline& poly : digit_glyphs()[static_cast<std::size_t>(digit)]) {
        Polyline p;
        for (const Pt& q : poly) {
            double gx = q.x - 0.5 + uni(-0.05, 0.05), gy = q.y - 0.5 + uni(-0.05, 0.05);
            double rx = scale * (ca * gx - sa * gy + shear * gy);
            double ry = scale * (sa * gx + ca * gy);
            p.push_back({(rx + 0.5) * span + margin + tx, (ry + 0.5) * span + margin + ty});
        }
        strokes.push_back(std::move(p));
    }

    // Smooth background texture (bilinearly upsampled value noise). Flat
    // backgrounds would make the block-matching in the transform degenerate;
    // a slowly varying field keeps same-class blocks visually interchangeable,
    // as they are in photographs.
    const double base = 24.0;
    const double amp = uni(3.0, 7.0);
    const int grid_step = 16;
    const int gw = size / grid_step + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gw);
    for (double& g : grid) g = base + uni(-amp, amp);
    auto texture = [&](int x, int y) {
        const double fx = static_cast<double>(x) / grid_step, fy = static_cast<double>(y) / grid_step;
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const double ax = fx - x0, ay = fy - y0;
        const double top = grid[static_cast<std::size_t>(y0) * gw + x0] * (1.0 - ax) +
                           grid[static_cast<std::size_t>(y0) * gw + x0 + 1] * ax;
        const double bot = grid[static_cast<std::size_t>(y0 + 1) * gw + x0] * (1.0 - ax) +
                           grid[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1] * ax;
        // Snapped to a coarse lattice: the image stays smooth but its
        // histogram keeps plenty of empty bins for the embedding step.
        return std::round((top * (1.0 - ay) + bot * ay) / 8.0) * 8.0;
    };

    // Stroke coverage is rasterized per 4x4 cell (2x2 supersampled within the
    // cell) and thresholded, so the glyph is built from flat axis-aligned
    // cells. The class evidence then lives entirely in local means at the cell
    // scale, which is also the granularity at which the block transform can
    // relocate content without error.
    const int cell = 4;
    const int cells = size / cell;
    const double half = thickness / 2.0;
    std::vector<double> level(static_cast<std::size_t>(cells) * cells, 0.0);
    for (int cy = 0; cy < cells; ++cy) {
        for (int cx = 0; cx < cells; ++cx) {
            int hits = 0;
            for (int s = 0; s < 64; ++s) {
                const double px = cx * cell + 0.25 + 0.5 * (s % 8);
                const double py = cy * cell + 0.25 + 0.5 * (s / 8);
                bool inside = false;
                for (const Polyline& poly : strokes) {
                    for (std::size_t i = 0; i + 1 < poly.size() && !inside; ++i)
                        inside = segment_distance(px, py, poly[i], poly[i + 1]) <= half;
                    if (inside) break;
                }
                if (inside) ++hits;
            }
            const double cov = hits / 64.0;
            double v = 0.0;
            if (cov >= 0.55) v = fg;
            else if (cov >= 0.22) v = fg * 0.5;
            level[static_cast<std::size_t>(cy) * cells + cx] = v;
        }
    }

    Image img(size, size, 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double v =
                texture(x, y) + level[static_cast<std::size_t>(y / cell) * cells + x / cell];
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return img;
}

}  // namespace

Dataset make_synthetic_digits(int per_class, unsigned seed, int size) {
    if (per_class < 1) throw Error(Errc::usage, "dataset: per-class count must be positive");
    if (size < 16 || size % 4 != 0)
        throw Error(Errc::usage, "dataset: size must be a multiple of 4, at least 16");
    Dataset data;
    data.height = size;
    data.width = size;
    data.channels = 1;
    data.classes = 10;
    std::mt19937 rng(seed);
    char name[64];
    for (int d = 0; d < 10; ++d) {
        for (int i = 0; i < per_class; ++i) {
            data.images.push_back(render_digit(d, size, rng));
            data.labels.push_back(d);
            std::snprintf(name, sizeof(name), "%d/img_%04d.pgm", d, i);
            data.ids.emplace_back(name);
        }
    }
    return data;
}

Dataset load_dataset(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw Error(Errc::io, dir + ": not a directory");

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    if (ec) throw Error(Errc::io, dir + ": " + ec.message());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw Error(Errc::usage, dir + ": dataset has no class subdirectories");

    Dataset data;
    data.classes = static_cast<int>(class_dirs.size());
    for (int label = 0; label < data.classes; ++label) {
        const fs::path cdir = fs::path(dir) / class_dirs[static_cast<std::size_t>(label)];
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(cdir, ec))
            if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
        if (ec) throw Error(Errc::io, cdir.string() + ": " + ec.message());
        std::sort(files.begin(), files.end());
        for (const std::string& f : files) {
            Image img = load_image((cdir / f).string());
            if (data.images.empty()) {
                data.height = img.height;
                data.width = img.width;
                data.channels = img.channels;
            } else if (img.width != data.width || img.height != data.height ||
                       img.channels != data.channels) {
                throw Error(Errc::usage,
                            (cdir / f).string() + ": image shape differs from the rest of the dataset");
            }
            data.images.push_back(std::move(img));
            data.labels.push_back(label);
            data.ids.push_back(class_dirs[static_cast<std::size_t>(label)] + "/" + f);
        }
    }
    if (data.images.empty()) throw Error(Errc::usage, dir + ": dataset contains no images");
    return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const fs::path path = fs::path(dir) / data.ids[i];
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw Error(Errc::io, path.parent_path().string() + ": " + ec.message());
        save_image(data.images[i], path.string());
    }
}

}  // namespace rae
