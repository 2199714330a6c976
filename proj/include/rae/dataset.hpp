#pragma once

#include <string>
#include <vector>

#include "rae/common.hpp"
#include "rae/image.hpp"

namespace rae {

// Labelled image collection. On disk: one subdirectory per class containing
// plain PGM/PPM files; class indices follow the lexicographic order of the
// subdirectory names.
struct Dataset {
    int height = 0, width = 0, channels = 0;
    int classes = 0;
    std::vector<Image> images;
    std::vector<int> labels;
    std::vector<std::string> ids;  // "<classdir>/<filename>"

    std::size_t size() const { return images.size(); }
};

Dataset load_dataset(const std::string& dir);

// Writes images as <dir>/<class index>/img_NNNN.pgm.
void save_dataset(const Dataset& data, const std::string& dir);

// Synthetic glyph dataset: ten stroke-drawn digit classes on a black
// background with randomized geometry (shift, scale, rotation, shear, stroke
// width, foreground level). Pixels take at most three distinct values per
// image, which keeps histograms concentrated for the embedding stage.
Dataset make_synthetic_digits(int per_class, unsigned seed, int size = 32);

}  // namespace rae
