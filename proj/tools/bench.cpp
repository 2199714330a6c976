// Timing harness comparing the serial reference kernels against the
// OpenMP-parallel paths, verifying on the way that both produce identical
// results. Run manually: build/tools/bench [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rae/blocks.hpp"
#include "rae/dataset.hpp"
#include "rae/image.hpp"
#include "rae/net.hpp"
#include "rae/rit.hpp"

using namespace rae;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Image noise_image(int w, int h, int ch, unsigned seed) {
    std::mt19937 rng(seed);
    Image img(w, h, ch);
    // Few distinct values keep the histogram embedder-friendly.
    for (std::uint8_t& p : img.pixels) p = static_cast<std::uint8_t>((rng() % 8) * 32);
    return img;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_ms();
        f();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
    if (argc > 1) omp_set_num_threads(std::atoi(argv[1]));
    std::printf("openmp max threads: %d\n", omp_get_max_threads());
#else
    (void)argc;
    (void)argv;
    std::printf("built without openmp; both paths run serially\n");
#endif

    const Image big = noise_image(1024, 1024, 1, 7);
    const Image big2 = noise_image(1024, 1024, 1, 8);

    {
        BlockGrid gs, gp;
        const double ts = time_best_of(3, [&] { gs = partition(big, 4, Exec::serial); });
        const double tp = time_best_of(3, [&] { gp = partition(big, 4, Exec::parallel); });
        bool same = true;
        for (std::size_t b = 0; b < gs.stats[0].size() && same; ++b)
            same = gs.stats[0][b].mean == gp.stats[0][b].mean &&
                   gs.stats[0][b].sd == gp.stats[0][b].sd;
        report("block statistics", ts, tp, same);
    }
    {
        double ms = 0.0, mp = 0.0;
        const double ts = time_best_of(3, [&] { ms = mse(big, big2, Exec::serial); });
        const double tp = time_best_of(3, [&] { mp = mse(big, big2, Exec::parallel); });
        report("mse / psnr", ts, tp, ms == mp);
    }
    {
        const Image a = noise_image(256, 256, 1, 9);
        const Image b = noise_image(256, 256, 1, 10);
        TransformResult rs, rp;
        const double ts = time_best_of(3, [&] { rs = rit_transform(a, b, {}, Exec::serial); });
        const double tp = time_best_of(3, [&] { rp = rit_transform(a, b, {}, Exec::parallel); });
        report("rit transform", ts, tp, rs.camouflage == rp.camouflage);
    }
    {
        const Model m = Model::make_default(1, 32, 32, 10, 1);
        const Dataset data = make_synthetic_digits(20, 3);
        double as = 0.0, ap = 0.0;
        const double ts = time_best_of(3, [&] { as = dataset_accuracy(m, data, Exec::serial); });
        const double tp = time_best_of(3, [&] { ap = dataset_accuracy(m, data, Exec::parallel); });
        report("batch inference", ts, tp, as == ap);
    }
    {
        const Model m = Model::make_default(1, 32, 32, 10, 1);
        const Dataset data = make_synthetic_digits(1, 4);
        const std::vector<double> x = image_to_input(data.images[0]);
        std::vector<double> gs, gp;
        const double ts = time_best_of(5, [&] {
            ForwardCache cache;
            net_forward(m, x, &cache, Exec::serial);
            gs = net_backward(m, cache, LossCrossEntropy{0}, nullptr, Exec::serial);
        });
        const double tp = time_best_of(5, [&] {
            ForwardCache cache;
            net_forward(m, x, &cache, Exec::parallel);
            gp = net_backward(m, cache, LossCrossEntropy{0}, nullptr, Exec::parallel);
        });
        report("forward + backward", ts, tp, gs == gp);
    }
    return 0;
}
