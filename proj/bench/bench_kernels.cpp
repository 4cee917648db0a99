// Serial vs OpenMP kernels at the layer sizes the reference networks use.
//
//   bench_kernels [repeats]

#include "iakd/kernels.hpp"
#include "iakd/rng.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace {

template <typename F>
double time_ms(int repeats, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

std::vector<double> random_vec(std::size_t n, iakd::Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = iakd::uniform01(rng) - 0.5;
    return v;
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 50;
    iakd::Rng rng(1);
    std::printf("threads=%d\n", omp_get_max_threads());
    std::printf("%-12s %6s %6s %6s %12s %12s %8s %s\n", "kernel", "m", "k", "n", "serial_ms", "omp_ms", "speedup", "equal");

    for (std::size_t width : {32u, 64u, 128u}) {
        const std::size_t b = 128;
        auto x = random_vec(b * width, rng);
        auto w = random_vec(width * width, rng);
        auto g = random_vec(b * width, rng);
        std::vector<double> c1(b * width), c2(b * width), w1(width * width), w2(width * width);

        const double s_nn = time_ms(repeats, [&] { iakd::kernels::serial::gemm_nn(x, w, c1, b, width, width); });
        const double p_nn = time_ms(repeats, [&] { iakd::kernels::gemm_nn(x, w, c2, b, width, width); });
        std::printf("%-12s %6zu %6zu %6zu %12.4f %12.4f %8.2f %s\n", "gemm_nn", b, width, width, s_nn, p_nn, s_nn / p_nn,
                    c1 == c2 ? "yes" : "NO");

        std::fill(w1.begin(), w1.end(), 0.0);
        std::fill(w2.begin(), w2.end(), 0.0);
        const double s_tn = time_ms(repeats, [&] { iakd::kernels::serial::gemm_tn_acc(x, g, w1, width, b, width); });
        const double p_tn = time_ms(repeats, [&] { iakd::kernels::gemm_tn_acc(x, g, w2, width, b, width); });
        std::printf("%-12s %6zu %6zu %6zu %12.4f %12.4f %8.2f %s\n", "gemm_tn_acc", width, b, width, s_tn, p_tn,
                    s_tn / p_tn, w1 == w2 ? "yes" : "NO");

        std::fill(c1.begin(), c1.end(), 0.0);
        std::fill(c2.begin(), c2.end(), 0.0);
        const double s_nt = time_ms(repeats, [&] { iakd::kernels::serial::gemm_nt_acc(g, w, c1, b, width, width); });
        const double p_nt = time_ms(repeats, [&] { iakd::kernels::gemm_nt_acc(g, w, c2, b, width, width); });
        std::printf("%-12s %6zu %6zu %6zu %12.4f %12.4f %8.2f %s\n", "gemm_nt_acc", b, width, width, s_nt, p_nt,
                    s_nt / p_nt, c1 == c2 ? "yes" : "NO");
    }
    return 0;
}
