// Serial reference vs OpenMP kernels, plus one end-to-end streaming encoder
// chunk. Sizes span the shapes the engine actually runs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "fastturn/enc/encoder.hpp"
#include "fastturn/nn/kernels.hpp"
#include "fastturn/nn/rng.hpp"

namespace k = fastturn::nn::kernels;
using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

static void bench_matmul(int m, int kk, int n, int reps, int threads) {
    std::vector<double> a(static_cast<size_t>(m) * kk), b(static_cast<size_t>(kk) * n),
        c1(static_cast<size_t>(m) * n), c2(c1);
    fastturn::nn::Rng rng(42);
    for (double& x : a) x = rng.uniform(-1, 1);
    for (double& x : b) x = rng.uniform(-1, 1);

    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) k::matmul_serial(c1.data(), a.data(), b.data(), m, kk, n);
    const double serial = ms_since(t0);

    k::set_num_threads(threads);
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) k::matmul_omp(c2.data(), a.data(), b.data(), m, kk, n);
    const double omp = ms_since(t0);
    k::set_num_threads(1);

    const bool identical = std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(double)) == 0;
    const double flops = 2.0 * m * kk * n * reps;
    std::printf("matmul %4dx%4dx%4d  serial %8.2f ms (%6.2f GF/s)  omp(%d) %8.2f ms (%6.2f GF/s)  bit-identical=%s\n",
                m, kk, n, serial, flops / serial / 1e6, threads, omp, flops / omp / 1e6,
                identical ? "yes" : "NO");
}

int main(int argc, char** argv) {
    int threads = 4;
    if (argc > 1) threads = std::atoi(argv[1]);
    std::printf("threads for OpenMP runs: %d\n", threads);

    bench_matmul(64, 64, 64, 2000, threads);
    bench_matmul(256, 256, 256, 40, threads);
    bench_matmul(512, 512, 512, 8, threads);
    bench_matmul(16, 64, 128, 5000, threads);

    // one streaming chunk of the default encoder
    fastturn::enc::EncoderConfig cfg;
    fastturn::nn::ParameterSet ps;
    fastturn::enc::init_encoder_params(ps, cfg, fastturn::nn::Rng(7));
    fastturn::enc::StreamingEncoder enc(ps, cfg);
    std::vector<double> chunk(static_cast<size_t>(cfg.chunk_frames) * cfg.feature_dim, 0.1);
    auto t0 = Clock::now();
    const int reps = 200;
    for (int r = 0; r < reps; ++r) enc.encode_chunk(chunk.data(), cfg.chunk_frames, false);
    std::printf("streaming encoder chunk (%d frames): %.3f ms/chunk\n", cfg.chunk_frames,
                ms_since(t0) / reps);
    return 0;
}
