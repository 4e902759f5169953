#pragma once

// Dense kernels behind every forward/backward pass. Each hot kernel exists in
// a serial reference form and an OpenMP form that parallelizes only over
// independent output elements, so the two are bit-identical and the parallel
// path can be enabled without touching any determinism guarantee. Tests assert
// the bit-identity; tools/bench_kernels compares their throughput.

namespace fastturn::nn::kernels {

// Global worker count for the OpenMP paths. 1 (default) routes every call to
// the serial reference.
void set_num_threads(int n);
int num_threads();

// C[m,n] = A[m,k] * B[k,n]
void matmul_serial(double* C, const double* A, const double* B, int m, int k, int n);
void matmul_omp(double* C, const double* A, const double* B, int m, int k, int n);
void matmul(double* C, const double* A, const double* B, int m, int k, int n);

// gA[m,k] += G[m,n] * B[k,n]^T   (grad wrt left operand)
void matmul_grad_a_serial(double* gA, const double* G, const double* B, int m, int k, int n);
void matmul_grad_a_omp(double* gA, const double* G, const double* B, int m, int k, int n);
void matmul_grad_a(double* gA, const double* G, const double* B, int m, int k, int n);

// gB[k,n] += A[m,k]^T * G[m,n]   (grad wrt right operand)
void matmul_grad_b_serial(double* gB, const double* A, const double* G, int m, int k, int n);
void matmul_grad_b_omp(double* gB, const double* A, const double* G, int m, int k, int n);
void matmul_grad_b(double* gB, const double* A, const double* G, int m, int k, int n);

// Row-wise primitives; y and x may alias.
void softmax_row(double* y, const double* x, int n);
void log_softmax_row(double* y, const double* x, int n);
void layernorm_row(double* y, const double* x, const double* gamma, const double* beta, int n,
                   double eps, double* out_mean, double* out_inv_std);

// Whole-matrix row-wise wrappers (parallel over rows when enabled).
void softmax_rows(double* y, const double* x, int rows, int n);
void log_softmax_rows(double* y, const double* x, int rows, int n);

double dot(const double* a, const double* b, int n);

// Shared scalar nonlinearities; the tape ops and the streaming encoder use
// these exact expressions so both paths agree bitwise.
double sigmoid_val(double x);
double swish_val(double x);

} // namespace fastturn::nn::kernels
