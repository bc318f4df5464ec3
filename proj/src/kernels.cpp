#include "icpd/kernels.hpp"

#include <atomic>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace icpd::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::Parallel
#else
    Backend::Serial
#endif
};

// Per-element and per-row bodies shared by both backends so the two
// variants perform identical floating-point operations in identical order.

inline void matmul_row(std::size_t k, std::size_t n,
                       const double* arow, const double* b, double* crow) {
  for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = arow[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
  }
}

inline void softmax_row(std::size_t cols, const double* x, double* y) {
  double m = x[0];
  for (std::size_t j = 1; j < cols; ++j) m = x[j] > m ? x[j] : m;
  double s = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - m);
    s += y[j];
  }
  const double inv = 1.0 / s;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline void softmax_grad_row(std::size_t cols, const double* y,
                             const double* dy, double* dx) {
  double dot = 0.0;
  for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
  for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
}

inline double block_sum(const double* x, std::size_t i0, std::size_t i1) {
  double s = 0.0;
  for (std::size_t i = i0; i < i1; ++i) s += x[i];
  return s;
}

inline void nt_row(std::size_t k, std::size_t n,
                   const double* dcrow, const double* b, double* darow) {
  for (std::size_t r = 0; r < k; ++r) {
    const double* brow = b + r * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += dcrow[j] * brow[j];
    darow[r] += s;
  }
}

inline void tn_row(std::size_t m, std::size_t k, std::size_t n, std::size_t r,
                   const double* a, const double* dc, double* dbrow) {
  for (std::size_t i = 0; i < m; ++i) {
    const double air = a[i * k + r];
    const double* dcrow = dc + i * n;
    for (std::size_t j = 0; j < n; ++j) dbrow[j] += air * dcrow[j];
  }
}

inline void col_sum_col(std::size_t rows, std::size_t cols, std::size_t j,
                        const double* dy, double* dbias) {
  double s = 0.0;
  for (std::size_t i = 0; i < rows; ++i) s += dy[i * cols + j];
  dbias[j] += s;
}

}  // namespace

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

// ---------------------------------------------------------------- serial

namespace serial {

void add(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void relu(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void tanh_op(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}
void exp_op(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}
void log_op(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}
void square(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * x[i];
}

void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(k, n, a + i * k, b, c + i * n);
}

void bias_add(std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* y) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) y[i * cols + j] = x[i * cols + j] + bias[j];
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) softmax_row(cols, x + i * cols, y + i * cols);
}

double sum(std::size_t n, const double* x) {
  if (n <= kSumBlock) return block_sum(x, 0, n);
  const std::size_t nblocks = (n + kSumBlock - 1) / kSumBlock;
  double total = 0.0;
  for (std::size_t bi = 0; bi < nblocks; ++bi) {
    const std::size_t i0 = bi * kSumBlock;
    const std::size_t i1 = i0 + kSumBlock < n ? i0 + kSumBlock : n;
    total += block_sum(x, i0, i1);
  }
  return total;
}

void acc(std::size_t n, double* dst, const double* src) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}
void acc_scaled(std::size_t n, double* dst, const double* src, double s) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += s * src[i];
}
void acc_mul(std::size_t n, double* dst, const double* a, const double* b) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}
void acc_scalar(std::size_t n, double* dst, double s) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += s;
}
void acc_relu_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += x[i] > 0.0 ? dy[i] : 0.0;
}
void acc_tanh_grad(std::size_t n, double* dst, const double* y, const double* dy) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += (1.0 - y[i] * y[i]) * dy[i];
}
void acc_log_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += dy[i] / x[i];
}
void acc_square_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += 2.0 * x[i] * dy[i];
}

void matmul_acc_nt(std::size_t m, std::size_t k, std::size_t n,
                   const double* dc, const double* b, double* da) {
  for (std::size_t i = 0; i < m; ++i) nt_row(k, n, dc + i * n, b, da + i * k);
}

void matmul_acc_tn(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* dc, double* db) {
  for (std::size_t r = 0; r < k; ++r) tn_row(m, k, n, r, a, dc, db + r * n);
}

void col_sum_acc(std::size_t rows, std::size_t cols, const double* dy, double* dbias) {
  for (std::size_t j = 0; j < cols; ++j) col_sum_col(rows, cols, j, dy, dbias);
}

void softmax_grad_rows(std::size_t rows, std::size_t cols,
                       const double* y, const double* dy, double* dx) {
  for (std::size_t i = 0; i < rows; ++i)
    softmax_grad_row(cols, y + i * cols, dy + i * cols, dx + i * cols);
}

}  // namespace serial

// -------------------------------------------------------------- parallel

namespace parallel {

#ifdef _OPENMP
#define ICPD_OMP_FOR _Pragma("omp parallel for schedule(static)")
#else
#define ICPD_OMP_FOR
#endif

void add(std::size_t n, const double* a, const double* b, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = a[i] + b[i];
}
void sub(std::size_t n, const double* a, const double* b, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = a[i] - b[i];
}
void mul(std::size_t n, const double* a, const double* b, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = a[i] * b[i];
}
void relu(std::size_t n, const double* x, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void tanh_op(std::size_t n, const double* x, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = std::tanh(x[i]);
}
void exp_op(std::size_t n, const double* x, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = std::exp(x[i]);
}
void log_op(std::size_t n, const double* x, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = std::log(x[i]);
}
void square(std::size_t n, const double* x, double* out) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[i] = x[i] * x[i];
}

void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* c) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
    matmul_row(k, n, a + i * k, b, c + i * n);
}

void bias_add(std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* y) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    for (std::size_t j = 0; j < cols; ++j) y[i * cols + j] = x[i * cols + j] + bias[j];
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    softmax_row(cols, x + i * cols, y + i * cols);
}

double sum(std::size_t n, const double* x) {
  if (n <= kSumBlock) return block_sum(x, 0, n);
  const std::size_t nblocks = (n + kSumBlock - 1) / kSumBlock;
  std::vector<double> partial(nblocks);
  ICPD_OMP_FOR
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(nblocks); ++bi) {
    const std::size_t i0 = static_cast<std::size_t>(bi) * kSumBlock;
    const std::size_t i1 = i0 + kSumBlock < n ? i0 + kSumBlock : n;
    partial[bi] = block_sum(x, i0, i1);
  }
  double total = 0.0;
  for (std::size_t bi = 0; bi < nblocks; ++bi) total += partial[bi];
  return total;
}

void acc(std::size_t n, double* dst, const double* src) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += src[i];
}
void acc_scaled(std::size_t n, double* dst, const double* src, double s) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += s * src[i];
}
void acc_mul(std::size_t n, double* dst, const double* a, const double* b) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += a[i] * b[i];
}
void acc_scalar(std::size_t n, double* dst, double s) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += s;
}
void acc_relu_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += x[i] > 0.0 ? dy[i] : 0.0;
}
void acc_tanh_grad(std::size_t n, double* dst, const double* y, const double* dy) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += (1.0 - y[i] * y[i]) * dy[i];
}
void acc_log_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += dy[i] / x[i];
}
void acc_square_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dst[i] += 2.0 * x[i] * dy[i];
}

void matmul_acc_nt(std::size_t m, std::size_t k, std::size_t n,
                   const double* dc, const double* b, double* da) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
    nt_row(k, n, dc + i * n, b, da + i * k);
}

void matmul_acc_tn(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* dc, double* db) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(k); ++r)
    tn_row(m, k, n, static_cast<std::size_t>(r), a, dc, db + r * n);
}

void col_sum_acc(std::size_t rows, std::size_t cols, const double* dy, double* dbias) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cols); ++j)
    col_sum_col(rows, cols, static_cast<std::size_t>(j), dy, dbias);
}

void softmax_grad_rows(std::size_t rows, std::size_t cols,
                       const double* y, const double* dy, double* dx) {
  ICPD_OMP_FOR
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    softmax_grad_row(cols, y + i * cols, dy + i * cols, dx + i * cols);
}

#undef ICPD_OMP_FOR

}  // namespace parallel

// -------------------------------------------------------------- dispatch

namespace {
inline bool go_parallel(std::size_t work) {
  return backend() == Backend::Parallel && work >= kParallelGrain;
}
}  // namespace

#define ICPD_DISPATCH(work, call)            \
  do {                                       \
    if (go_parallel(work)) {                 \
      parallel::call;                        \
    } else {                                 \
      serial::call;                          \
    }                                        \
  } while (0)

void add(std::size_t n, const double* a, const double* b, double* out) {
  ICPD_DISPATCH(n, add(n, a, b, out));
}
void sub(std::size_t n, const double* a, const double* b, double* out) {
  ICPD_DISPATCH(n, sub(n, a, b, out));
}
void mul(std::size_t n, const double* a, const double* b, double* out) {
  ICPD_DISPATCH(n, mul(n, a, b, out));
}
void relu(std::size_t n, const double* x, double* out) {
  ICPD_DISPATCH(n, relu(n, x, out));
}
void tanh_op(std::size_t n, const double* x, double* out) {
  ICPD_DISPATCH(n, tanh_op(n, x, out));
}
void exp_op(std::size_t n, const double* x, double* out) {
  ICPD_DISPATCH(n, exp_op(n, x, out));
}
void log_op(std::size_t n, const double* x, double* out) {
  ICPD_DISPATCH(n, log_op(n, x, out));
}
void square(std::size_t n, const double* x, double* out) {
  ICPD_DISPATCH(n, square(n, x, out));
}
void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* c) {
  ICPD_DISPATCH(m * k * n, matmul(m, k, n, a, b, c));
}
void bias_add(std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* y) {
  ICPD_DISPATCH(rows * cols, bias_add(rows, cols, x, bias, y));
}
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y) {
  ICPD_DISPATCH(rows * cols, softmax_rows(rows, cols, x, y));
}
double sum(std::size_t n, const double* x) {
  if (go_parallel(n)) return parallel::sum(n, x);
  return serial::sum(n, x);
}
void acc(std::size_t n, double* dst, const double* src) {
  ICPD_DISPATCH(n, acc(n, dst, src));
}
void acc_scaled(std::size_t n, double* dst, const double* src, double s) {
  ICPD_DISPATCH(n, acc_scaled(n, dst, src, s));
}
void acc_mul(std::size_t n, double* dst, const double* a, const double* b) {
  ICPD_DISPATCH(n, acc_mul(n, dst, a, b));
}
void acc_scalar(std::size_t n, double* dst, double s) {
  ICPD_DISPATCH(n, acc_scalar(n, dst, s));
}
void acc_relu_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  ICPD_DISPATCH(n, acc_relu_grad(n, dst, x, dy));
}
void acc_tanh_grad(std::size_t n, double* dst, const double* y, const double* dy) {
  ICPD_DISPATCH(n, acc_tanh_grad(n, dst, y, dy));
}
void acc_log_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  ICPD_DISPATCH(n, acc_log_grad(n, dst, x, dy));
}
void acc_square_grad(std::size_t n, double* dst, const double* x, const double* dy) {
  ICPD_DISPATCH(n, acc_square_grad(n, dst, x, dy));
}
void matmul_acc_nt(std::size_t m, std::size_t k, std::size_t n,
                   const double* dc, const double* b, double* da) {
  ICPD_DISPATCH(m * k * n, matmul_acc_nt(m, k, n, dc, b, da));
}
void matmul_acc_tn(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* dc, double* db) {
  ICPD_DISPATCH(m * k * n, matmul_acc_tn(m, k, n, a, dc, db));
}
void col_sum_acc(std::size_t rows, std::size_t cols, const double* dy, double* dbias) {
  ICPD_DISPATCH(rows * cols, col_sum_acc(rows, cols, dy, dbias));
}
void softmax_grad_rows(std::size_t rows, std::size_t cols,
                       const double* y, const double* dy, double* dx) {
  ICPD_DISPATCH(rows * cols, softmax_grad_rows(rows, cols, y, dy, dx));
}

#undef ICPD_DISPATCH

}  // namespace icpd::kernels
