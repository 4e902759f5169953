#include "fastturn/nn/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fastturn::nn::kernels {

namespace {
int g_threads = 1;
}

void set_num_threads(int n) { g_threads = n < 1 ? 1 : n; }
int num_threads() { return g_threads; }

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sigmoid_val(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double swish_val(double x) { return x / (1.0 + std::exp(-x)); }

// i-k-j order: streams B rows, vectorizes the inner j loop.
static inline void matmul_row(double* __restrict__ c, const double* __restrict__ a,
                              const double* __restrict__ B, int k, int n) {
    std::fill(c, c + n, 0.0);
    for (int p = 0; p < k; ++p) {
        const double ap = a[p];
        const double* __restrict__ brow = B + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) c[j] += ap * brow[j];
    }
}

void matmul_serial(double* C, const double* A, const double* B, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        matmul_row(C + static_cast<std::size_t>(i) * n, A + static_cast<std::size_t>(i) * k, B, k, n);
}

void matmul_omp(double* C, const double* A, const double* B, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_threads)
#endif
    for (int i = 0; i < m; ++i)
        matmul_row(C + static_cast<std::size_t>(i) * n, A + static_cast<std::size_t>(i) * k, B, k, n);
}

void matmul(double* C, const double* A, const double* B, int m, int k, int n) {
    if (g_threads > 1 && m > 1)
        matmul_omp(C, A, B, m, k, n);
    else
        matmul_serial(C, A, B, m, k, n);
}

// gA[i,p] += dot(G[i,:], B[p,:]) — rows of gA are independent.
static inline void grad_a_row(double* __restrict__ ga, const double* __restrict__ g,
                              const double* __restrict__ B, int k, int n) {
    for (int p = 0; p < k; ++p) ga[p] += dot(g, B + static_cast<std::size_t>(p) * n, n);
}

void matmul_grad_a_serial(double* gA, const double* G, const double* B, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        grad_a_row(gA + static_cast<std::size_t>(i) * k, G + static_cast<std::size_t>(i) * n, B, k, n);
}

void matmul_grad_a_omp(double* gA, const double* G, const double* B, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_threads)
#endif
    for (int i = 0; i < m; ++i)
        grad_a_row(gA + static_cast<std::size_t>(i) * k, G + static_cast<std::size_t>(i) * n, B, k, n);
}

void matmul_grad_a(double* gA, const double* G, const double* B, int m, int k, int n) {
    if (g_threads > 1 && m > 1)
        matmul_grad_a_omp(gA, G, B, m, k, n);
    else
        matmul_grad_a_serial(gA, G, B, m, k, n);
}

// gB[p,:] += sum_i A[i,p] * G[i,:] — rows of gB are independent; the i-sum
// runs in ascending order in both variants.
static inline void grad_b_row(double* __restrict__ gb, const double* __restrict__ A,
                              const double* __restrict__ G, int p, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double ap = A[static_cast<std::size_t>(i) * k + p];
        const double* __restrict__ grow = G + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) gb[j] += ap * grow[j];
    }
}

void matmul_grad_b_serial(double* gB, const double* A, const double* G, int m, int k, int n) {
    for (int p = 0; p < k; ++p)
        grad_b_row(gB + static_cast<std::size_t>(p) * n, A, G, p, m, k, n);
}

void matmul_grad_b_omp(double* gB, const double* A, const double* G, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_threads)
#endif
    for (int p = 0; p < k; ++p)
        grad_b_row(gB + static_cast<std::size_t>(p) * n, A, G, p, m, k, n);
}

void matmul_grad_b(double* gB, const double* A, const double* G, int m, int k, int n) {
    if (g_threads > 1 && k > 1)
        matmul_grad_b_omp(gB, A, G, m, k, n);
    else
        matmul_grad_b_serial(gB, A, G, m, k, n);
}

void softmax_row(double* y, const double* x, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) y[i] *= inv;
}

void log_softmax_row(double* y, const double* x, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += std::exp(x[i] - mx);
    const double lse = mx + std::log(sum);
    for (int i = 0; i < n; ++i) y[i] = x[i] - lse;
}

void layernorm_row(double* y, const double* x, const double* gamma, const double* beta, int n,
                   double eps, double* out_mean, double* out_inv_std) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < n; ++i) y[i] = gamma[i] * ((x[i] - mean) * inv) + beta[i];
    if (out_mean) *out_mean = mean;
    if (out_inv_std) *out_inv_std = inv;
}

void softmax_rows(double* y, const double* x, int rows, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && rows > 1)
#endif
    for (int r = 0; r < rows; ++r)
        softmax_row(y + static_cast<std::size_t>(r) * n, x + static_cast<std::size_t>(r) * n, n);
}

void log_softmax_rows(double* y, const double* x, int rows, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && rows > 1)
#endif
    for (int r = 0; r < rows; ++r)
        log_softmax_row(y + static_cast<std::size_t>(r) * n, x + static_cast<std::size_t>(r) * n, n);
}

} // namespace fastturn::nn::kernels
