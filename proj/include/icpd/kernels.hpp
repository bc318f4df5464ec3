// Dense numeric kernels in two variants: a serial reference and an
// OpenMP-parallel version. Both produce bit-identical results for any
// thread count: parallelism is only over independent output elements,
// and every reduction uses a fixed block decomposition independent of
// the number of threads.
#pragma once

#include <cstddef>

namespace icpd::kernels {

enum class Backend { Serial, Parallel };

// Process-wide backend used by the dispatching entry points below.
// Defaults to Parallel when compiled with OpenMP.
void set_backend(Backend b);
Backend backend();

// Work sizes below this many scalar operations always run serially;
// spawning a thread team costs more than the loop at toy sizes.
inline constexpr std::size_t kParallelGrain = 32768;

// Fixed block length for scalar reductions. Both backends sum each block
// left to right and then combine block partials in index order.
inline constexpr std::size_t kSumBlock = 1024;

namespace serial {

void add(std::size_t n, const double* a, const double* b, double* out);
void sub(std::size_t n, const double* a, const double* b, double* out);
void mul(std::size_t n, const double* a, const double* b, double* out);
void relu(std::size_t n, const double* x, double* out);
void tanh_op(std::size_t n, const double* x, double* out);
void exp_op(std::size_t n, const double* x, double* out);
void log_op(std::size_t n, const double* x, double* out);
void square(std::size_t n, const double* x, double* out);

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* c);
// y[rows x cols] = x + broadcast bias[cols]
void bias_add(std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* y);
// row-wise softmax with max subtraction
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y);
// fixed-block reduction, see kSumBlock
double sum(std::size_t n, const double* x);

// gradient accumulators (dst += ...)
void acc(std::size_t n, double* dst, const double* src);
void acc_scaled(std::size_t n, double* dst, const double* src, double s);
void acc_mul(std::size_t n, double* dst, const double* a, const double* b);
void acc_scalar(std::size_t n, double* dst, double s);
void acc_relu_grad(std::size_t n, double* dst, const double* x, const double* dy);
void acc_tanh_grad(std::size_t n, double* dst, const double* y, const double* dy);
void acc_log_grad(std::size_t n, double* dst, const double* x, const double* dy);
void acc_square_grad(std::size_t n, double* dst, const double* x, const double* dy);
// da[m x k] += dc[m x n] * b^T, with b[k x n]
void matmul_acc_nt(std::size_t m, std::size_t k, std::size_t n,
                   const double* dc, const double* b, double* da);
// db[k x n] += a^T * dc, with a[m x k], dc[m x n]
void matmul_acc_tn(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* dc, double* db);
// dbias[cols] += column sums of dy[rows x cols]
void col_sum_acc(std::size_t rows, std::size_t cols, const double* dy, double* dbias);
// dx[row] += y .* (dy - <dy, y>) per row, y = softmax output
void softmax_grad_rows(std::size_t rows, std::size_t cols,
                       const double* y, const double* dy, double* dx);

}  // namespace serial

namespace parallel {

void add(std::size_t n, const double* a, const double* b, double* out);
void sub(std::size_t n, const double* a, const double* b, double* out);
void mul(std::size_t n, const double* a, const double* b, double* out);
void relu(std::size_t n, const double* x, double* out);
void tanh_op(std::size_t n, const double* x, double* out);
void exp_op(std::size_t n, const double* x, double* out);
void log_op(std::size_t n, const double* x, double* out);
void square(std::size_t n, const double* x, double* out);

void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* c);
void bias_add(std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* y);
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y);
double sum(std::size_t n, const double* x);

void acc(std::size_t n, double* dst, const double* src);
void acc_scaled(std::size_t n, double* dst, const double* src, double s);
void acc_mul(std::size_t n, double* dst, const double* a, const double* b);
void acc_scalar(std::size_t n, double* dst, double s);
void acc_relu_grad(std::size_t n, double* dst, const double* x, const double* dy);
void acc_tanh_grad(std::size_t n, double* dst, const double* y, const double* dy);
void acc_log_grad(std::size_t n, double* dst, const double* x, const double* dy);
void acc_square_grad(std::size_t n, double* dst, const double* x, const double* dy);
void matmul_acc_nt(std::size_t m, std::size_t k, std::size_t n,
                   const double* dc, const double* b, double* da);
void matmul_acc_tn(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* dc, double* db);
void col_sum_acc(std::size_t rows, std::size_t cols, const double* dy, double* dbias);
void softmax_grad_rows(std::size_t rows, std::size_t cols,
                       const double* y, const double* dy, double* dx);

}  // namespace parallel

// Dispatching entry points: pick the active backend, falling back to the
// serial loop when the work is below kParallelGrain.
void add(std::size_t n, const double* a, const double* b, double* out);
void sub(std::size_t n, const double* a, const double* b, double* out);
void mul(std::size_t n, const double* a, const double* b, double* out);
void relu(std::size_t n, const double* x, double* out);
void tanh_op(std::size_t n, const double* x, double* out);
void exp_op(std::size_t n, const double* x, double* out);
void log_op(std::size_t n, const double* x, double* out);
void square(std::size_t n, const double* x, double* out);
void matmul(std::size_t m, std::size_t k, std::size_t n,
            const double* a, const double* b, double* c);
void bias_add(std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* y);
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y);
double sum(std::size_t n, const double* x);
void acc(std::size_t n, double* dst, const double* src);
void acc_scaled(std::size_t n, double* dst, const double* src, double s);
void acc_mul(std::size_t n, double* dst, const double* a, const double* b);
void acc_scalar(std::size_t n, double* dst, double s);
void acc_relu_grad(std::size_t n, double* dst, const double* x, const double* dy);
void acc_tanh_grad(std::size_t n, double* dst, const double* y, const double* dy);
void acc_log_grad(std::size_t n, double* dst, const double* x, const double* dy);
void acc_square_grad(std::size_t n, double* dst, const double* x, const double* dy);
void matmul_acc_nt(std::size_t m, std::size_t k, std::size_t n,
                   const double* dc, const double* b, double* da);
void matmul_acc_tn(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* dc, double* db);
void col_sum_acc(std::size_t rows, std::size_t cols, const double* dy, double* dbias);
void softmax_grad_rows(std::size_t rows, std::size_t cols,
                       const double* y, const double* dy, double* dx);

}  // namespace icpd::kernels
