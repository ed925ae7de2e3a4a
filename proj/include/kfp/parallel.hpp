#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kfp {

// Thread budget handed down from the CLI. threads == 0 means "runtime default".
struct Parallelism {
  int threads = 0;

  int resolve() const {
#ifdef _OPENMP
    return threads > 0 ? threads : omp_get_max_threads();
#else
    return 1;
#endif
  }
};

// Parallel loop over [0, n). Each index must be independent of the others;
// results written by index are reproducible regardless of thread count.
template <class Fn>
void parallel_for(std::int64_t n, const Fn& fn, Parallelism par = {}) {
#ifdef _OPENMP
  const int nt = par.resolve();
  if (nt > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#else
  (void)par;
#endif
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

template <class Fn>
void serial_for(std::int64_t n, const Fn& fn) {
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

// Fixed-topology pairwise sum. The reduction tree depends only on the length,
// so the result is bitwise identical no matter how the values were produced.
inline double pairwise_sum(const double* x, std::int64_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::int64_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(x.data(), static_cast<std::int64_t>(x.size()));
}

// Deterministic parallel reduction: terms are grouped into fixed-size blocks,
// each block is summed sequentially in index order (possibly on different
// threads), and the block sums are combined with the pairwise tree above.
// The value is independent of the thread count.
template <class Term>
double blocked_sum(std::int64_t n, const Term& term, Parallelism par = {},
                   std::int64_t block = 4096) {
  if (n <= 0) return 0.0;
  const std::int64_t nblocks = (n + block - 1) / block;
  std::vector<double> partial(static_cast<std::size_t>(nblocks));
  parallel_for(
      nblocks,
      [&](std::int64_t b) {
        const std::int64_t lo = b * block;
        const std::int64_t hi = std::min(n, lo + block);
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<std::size_t>(b)] = s;
      },
      par);
  return pairwise_sum(partial);
}

template <class Term>
double blocked_sum_serial(std::int64_t n, const Term& term,
                          std::int64_t block = 4096) {
  return blocked_sum(n, term, Parallelism{1}, block);
}

}  // namespace kfp
