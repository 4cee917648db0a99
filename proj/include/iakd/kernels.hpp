#pragma once

// Dense kernels behind the autodiff layer ops.
//
// Every kernel in `iakd::kernels` has a twin in `iakd::kernels::serial` with the
// same per-element accumulation order. The parallel versions only split work
// across independent output rows (or columns), so their results are
// bit-identical to the serial ones for any thread count.

#include <cstddef>
#include <span>

namespace iakd::kernels {

// c[m x n] = a[m x k] * b[k x n]   (overwrites c)
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

// c[m x n] += a[k x m]^T * b[k x n]
void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// Per-column mean and biased variance of x[rows x cols].
void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var,
                    std::size_t rows, std::size_t cols);

// out[j] += sum_i x[i, j]
void column_sums_acc(std::span<const double> x, std::span<double> out, std::size_t rows, std::size_t cols);

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var,
                    std::size_t rows, std::size_t cols);
void column_sums_acc(std::span<const double> x, std::span<double> out, std::size_t rows, std::size_t cols);

} // namespace serial

// Work (multiply-adds) below which the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

} // namespace iakd::kernels
