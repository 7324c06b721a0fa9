#include "danet/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace danet::kernels {
namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 14;

inline void row_nn(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t p) {
  double* ci = c + i * p;
  std::fill(ci, ci + p, 0.0);
  const double* ai = a + i * k;
  for (std::size_t t = 0; t < k; ++t) {
    const double av = ai[t];
    const double* bt = b + t * p;
    for (std::size_t j = 0; j < p; ++j) ci[j] += av * bt[j];
  }
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t p) {
  const double* ai = a + i * k;
  double* ci = c + i * p;
  for (std::size_t j = 0; j < p; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
    ci[j] = acc;
  }
}

// Output row `t` of a^T * b: sum over the n input rows.
inline void row_tn(const double* a, const double* b, double* c, std::size_t t, std::size_t n,
                   std::size_t k, std::size_t p) {
  double* ct = c + t * p;
  std::fill(ct, ct + p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double av = a[r * k + t];
    if (av == 0.0) continue;
    const double* br = b + r * p;
    for (std::size_t j = 0; j < p; ++j) ct[j] += av * br[j];
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p) {
  const long rows = static_cast<long>(n);
  [[maybe_unused]] const bool wide = n * k * p >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (long i = 0; i < rows; ++i) row_nn(a.data(), b.data(), c.data(), i, k, p);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p) {
  const long rows = static_cast<long>(n);
  [[maybe_unused]] const bool wide = n * k * p >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (long i = 0; i < rows; ++i) row_nt(a.data(), b.data(), c.data(), i, k, p);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p) {
  const long rows = static_cast<long>(k);
  [[maybe_unused]] const bool wide = n * k * p >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (long t = 0; t < rows; ++t) row_tn(a.data(), b.data(), c.data(), t, n, k, p);
}

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < n; ++i) row_nn(a.data(), b.data(), c.data(), i, k, p);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < n; ++i) row_nt(a.data(), b.data(), c.data(), i, k, p);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p) {
  for (std::size_t t = 0; t < k; ++t) row_tn(a.data(), b.data(), c.data(), t, n, k, p);
}

}  // namespace serial
}  // namespace danet::kernels
