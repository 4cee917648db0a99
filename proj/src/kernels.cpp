#include "iakd/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace iakd::kernels {

namespace {

// Row i of c = a[i,:] * b. Shared by both paths so the accumulation order matches.
inline void gemm_nn_row(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
    std::fill(c, c + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double aip = a[p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += aip * brow[j];
    }
}

// Four rows at once: each b row is loaded once per four outputs. Every c[i,j]
// still sums over p in order, so the result equals four gemm_nn_row calls.
inline void gemm_nn_rows4(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
    double* c0 = c;
    double* c1 = c + n;
    double* c2 = c + 2 * n;
    double* c3 = c + 3 * n;
    std::fill(c, c + 4 * n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double a0 = a[p], a1 = a[k + p], a2 = a[2 * k + p], a3 = a[3 * k + p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double bj = brow[j];
            c0[j] += a0 * bj;
            c1[j] += a1 * bj;
            c2[j] += a2 * bj;
            c3[j] += a3 * bj;
        }
    }
}

// Row i of c += (column i of a)^T * b, with a stored k x m.
inline void gemm_tn_row(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                        std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double api = a[p * m + i];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += api * brow[j];
    }
}

inline void gemm_tn_rows4(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                         std::size_t k, std::size_t n) {
    double* c0 = c;
    double* c1 = c + n;
    double* c2 = c + 2 * n;
    double* c3 = c + 3 * n;
    for (std::size_t p = 0; p < k; ++p) {
        const double* acol = a + p * m + i;
        const double a0 = acol[0], a1 = acol[1], a2 = acol[2], a3 = acol[3];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double bj = brow[j];
            c0[j] += a0 * bj;
            c1[j] += a1 * bj;
            c2[j] += a2 * bj;
            c3[j] += a3 * bj;
        }
    }
}

// b_t is b[n x k] transposed to k x n, so the inner loop runs over contiguous memory.
inline void gemm_nt_row(const double* a, const double* b_t, double* c, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double ap = a[p];
        const double* brow = b_t + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += ap * brow[j];
    }
}

inline void gemm_nt_rows4(const double* a, const double* b_t, double* c, std::size_t k, std::size_t n) {
    double* c0 = c;
    double* c1 = c + n;
    double* c2 = c + 2 * n;
    double* c3 = c + 3 * n;
    for (std::size_t p = 0; p < k; ++p) {
        const double a0 = a[p], a1 = a[k + p], a2 = a[2 * k + p], a3 = a[3 * k + p];
        const double* brow = b_t + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double bj = brow[j];
            c0[j] += a0 * bj;
            c1[j] += a1 * bj;
            c2[j] += a2 * bj;
            c3[j] += a3 * bj;
        }
    }
}

inline std::vector<double> transpose(std::span<const double> b, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = b[i * cols + j];
    return t;
}

inline void column_moment(const double* x, double* mean, double* var, std::size_t j, std::size_t rows,
                          std::size_t cols) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += x[i * cols + j];
    const double mu = s / static_cast<double>(rows);
    double v = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double d = x[i * cols + j] - mu;
        v += d * d;
    }
    mean[j] = mu;
    var[j] = v / static_cast<double>(rows);
}

inline void column_sum(const double* x, double* out, std::size_t j, std::size_t rows, std::size_t cols) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += x[i * cols + j];
    out[j] += s;
}

inline bool go_parallel(std::size_t work) { return work >= kParallelThreshold && omp_get_max_threads() > 1; }

} // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
    const auto blocks = static_cast<std::ptrdiff_t>(m / 4);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
    for (std::ptrdiff_t r = 0; r < blocks; ++r) {
        const std::size_t i = static_cast<std::size_t>(r) * 4;
        gemm_nn_rows4(a.data() + i * k, b.data(), c.data() + i * n, k, n);
    }
    for (std::size_t i = m / 4 * 4; i < m; ++i) gemm_nn_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
}

void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n) {
    const auto blocks = static_cast<std::ptrdiff_t>(m / 4);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
    for (std::ptrdiff_t r = 0; r < blocks; ++r) {
        const std::size_t i = static_cast<std::size_t>(r) * 4;
        gemm_tn_rows4(a.data(), b.data(), c.data() + i * n, i, m, k, n);
    }
    for (std::size_t i = m / 4 * 4; i < m; ++i) gemm_tn_row(a.data(), b.data(), c.data() + i * n, i, m, k, n);
}

void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n) {
    const auto b_t = transpose(b, n, k);
    const auto blocks = static_cast<std::ptrdiff_t>(m / 4);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
    for (std::ptrdiff_t r = 0; r < blocks; ++r) {
        const std::size_t i = static_cast<std::size_t>(r) * 4;
        gemm_nt_rows4(a.data() + i * k, b_t.data(), c.data() + i * n, k, n);
    }
    for (std::size_t i = m / 4 * 4; i < m; ++i) gemm_nt_row(a.data() + i * k, b_t.data(), c.data() + i * n, k, n);
}

void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var,
                    std::size_t rows, std::size_t cols) {
    const auto ncols = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (go_parallel(rows * cols * 4))
    for (std::ptrdiff_t j = 0; j < ncols; ++j) {
        column_moment(x.data(), mean.data(), var.data(), static_cast<std::size_t>(j), rows, cols);
    }
}

void column_sums_acc(std::span<const double> x, std::span<double> out, std::size_t rows, std::size_t cols) {
    const auto ncols = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (go_parallel(rows * cols * 4))
    for (std::ptrdiff_t j = 0; j < ncols; ++j) {
        column_sum(x.data(), out.data(), static_cast<std::size_t>(j), rows, cols);
    }
}

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) gemm_nn_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
}

void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) gemm_tn_row(a.data(), b.data(), c.data() + i * n, i, m, k, n);
}

void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n) {
    const auto b_t = transpose(b, n, k);
    for (std::size_t i = 0; i < m; ++i) gemm_nt_row(a.data() + i * k, b_t.data(), c.data() + i * n, k, n);
}

void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var,
                    std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) column_moment(x.data(), mean.data(), var.data(), j, rows, cols);
}

void column_sums_acc(std::span<const double> x, std::span<double> out, std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) column_sum(x.data(), out.data(), j, rows, cols);
}

} // namespace serial

} // namespace iakd::kernels
