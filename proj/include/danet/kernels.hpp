#pragma once

#include <cstddef>
#include <span>

// Dense product kernels on row-major buffers. The parallel versions split the
// output rows across OpenMP threads and call the same per-row routine as the
// serial reference, so both produce bit-identical results.
namespace danet::kernels {

// c[n x p] = a[n x k] * b[k x p]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p);
// c[n x p] = a[n x k] * b[p x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p);
// c[k x p] = a[n x k]^T * b[n x p]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p);

int max_threads();

namespace serial {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t n, std::size_t k, std::size_t p);
}  // namespace serial

}  // namespace danet::kernels
