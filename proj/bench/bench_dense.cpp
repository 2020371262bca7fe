// Serial vs OpenMP dense convolution: wall time per size and thread count,
// with a bit-exactness check between the two kernels.
//
// Usage: bench_dense [max_log2_len=22] [reps=3]
// Output: CSV len,threads,serial_ns,parallel_ns,speedup,equal

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "sparseconv/dense_conv.hpp"
#include "sparseconv/numeric.hpp"

using namespace sparseconv;

namespace {

template <class F>
u64 best_ns(int reps, F&& f) {
  u64 best = ~static_cast<u64>(0);
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto dt = std::chrono::steady_clock::now() - t0;
    best = std::min<u64>(best, std::chrono::duration_cast<std::chrono::nanoseconds>(dt).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int max_log = argc > 1 ? std::atoi(argv[1]) : 22;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 3;
  const int max_threads = omp_get_max_threads();
  Rng rng(12345);
  std::printf("len,threads,serial_ns,parallel_ns,speedup,equal\n");
  for (int lg = 10; lg <= max_log; lg += 2) {
    const std::size_t len = std::size_t{1} << lg;
    DenseVec a(len), b(len);
    for (auto& x : a) x = rand_range(rng, 0, (u64{1} << 20) - 1);
    for (auto& x : b) x = rand_range(rng, 0, (u64{1} << 20) - 1);
    DenseVec ref, par;
    const u64 serial_ns = best_ns(reps, [&] { ref = dense_conv_serial(a, b); });
    for (int t = 1; t <= max_threads; t *= 2) {
      omp_set_num_threads(t);
      const u64 parallel_ns = best_ns(reps, [&] { par = dense_conv(a, b); });
      std::printf("%zu,%d,%llu,%llu,%.3f,%d\n", len, t, static_cast<unsigned long long>(serial_ns),
                  static_cast<unsigned long long>(parallel_ns), double(serial_ns) / double(parallel_ns),
                  par == ref ? 1 : 0);
      if (par != ref) return 1;
    }
  }
  return 0;
}
