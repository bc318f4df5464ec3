// Times the serial reference kernels against the OpenMP variants and checks
// that both produce bit-identical results.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "icpd/kernels.hpp"
#include "icpd/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using icpd::Rng;
namespace k = icpd::kernels;

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * rng.uniform01() - 1.0;
  return v;
}

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Row {
  std::string name;
  double serial_s;
  double parallel_s;
  bool identical;
};

void print_row(const Row& r) {
  std::printf("%-24s %10.4f ms %10.4f ms   x%5.2f   %s\n", r.name.c_str(), r.serial_s * 1e3,
              r.parallel_s * 1e3, r.serial_s / r.parallel_s,
              r.identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  Rng rng(7);
  const int reps = 5;

#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel variants run serially\n\n");
#endif
  std::printf("%-24s %13s %13s %8s\n", "kernel", "serial", "parallel", "speedup");

  bool all_identical = true;
  auto record = [&](Row r) {
    print_row(r);
    all_identical = all_identical && r.identical;
  };

  {
    const std::size_t m = 384, kk = 384, n = 384;
    auto a = random_vec(rng, m * kk);
    auto b = random_vec(rng, kk * n);
    std::vector<double> cs(m * n), cp(m * n);
    Row r{"matmul 384^3",
          time_best_of(reps, [&] { k::serial::matmul(m, kk, n, a.data(), b.data(), cs.data()); }),
          time_best_of(reps, [&] { k::parallel::matmul(m, kk, n, a.data(), b.data(), cp.data()); }),
          false};
    r.identical = bitwise_equal(cs, cp);
    record(r);
  }
  {
    const std::size_t m = 384, kk = 384, n = 384;
    auto dc = random_vec(rng, m * n);
    auto b = random_vec(rng, kk * n);
    std::vector<double> das(m * kk, 0.0), dap(m * kk, 0.0);
    Row r{"matmul_acc_nt 384^3",
          time_best_of(reps,
                       [&] {
                         std::fill(das.begin(), das.end(), 0.0);
                         k::serial::matmul_acc_nt(m, kk, n, dc.data(), b.data(), das.data());
                       }),
          time_best_of(reps,
                       [&] {
                         std::fill(dap.begin(), dap.end(), 0.0);
                         k::parallel::matmul_acc_nt(m, kk, n, dc.data(), b.data(), dap.data());
                       }),
          false};
    r.identical = bitwise_equal(das, dap);
    record(r);
  }
  {
    const std::size_t n = 1 << 22;
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<double> outs(n), outp(n);
    Row r{"add 4M",
          time_best_of(reps, [&] { k::serial::add(n, a.data(), b.data(), outs.data()); }),
          time_best_of(reps, [&] { k::parallel::add(n, a.data(), b.data(), outp.data()); }),
          false};
    r.identical = bitwise_equal(outs, outp);
    record(r);
  }
  {
    const std::size_t n = 1 << 21;
    auto x = random_vec(rng, n);
    std::vector<double> outs(n), outp(n);
    Row r{"tanh 2M",
          time_best_of(reps, [&] { k::serial::tanh_op(n, x.data(), outs.data()); }),
          time_best_of(reps, [&] { k::parallel::tanh_op(n, x.data(), outp.data()); }),
          false};
    r.identical = bitwise_equal(outs, outp);
    record(r);
  }
  {
    const std::size_t rows = 8192, cols = 256;
    auto x = random_vec(rng, rows * cols);
    std::vector<double> ys(rows * cols), yp(rows * cols);
    Row r{"softmax 8192x256",
          time_best_of(reps, [&] { k::serial::softmax_rows(rows, cols, x.data(), ys.data()); }),
          time_best_of(reps, [&] { k::parallel::softmax_rows(rows, cols, x.data(), yp.data()); }),
          false};
    r.identical = bitwise_equal(ys, yp);
    record(r);
  }
  {
    const std::size_t n = 1 << 23;
    auto x = random_vec(rng, n);
    double ss = 0.0, sp = 0.0;
    Row r{"sum 8M",
          time_best_of(reps, [&] { ss = k::serial::sum(n, x.data()); }),
          time_best_of(reps, [&] { sp = k::parallel::sum(n, x.data()); }), false};
    r.identical = std::memcmp(&ss, &sp, sizeof ss) == 0;
    record(r);
  }

  std::printf("\n%s\n", all_identical ? "all kernels bit-identical across backends"
                                      : "BACKEND MISMATCH DETECTED");
  return all_identical ? 0 : 1;
}
