#include <doctest.h>

#include "danet/kernels.hpp"
#include "danet/numerics.hpp"
#include "support/gradcheck.hpp"

using namespace danet;
using danet::testing::random_matrix;

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(77);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {64, 33, 17}, {700, 40, 30}, {2048, 16, 64}};
  for (const auto& s : shapes) {
    const std::size_t n = s[0], k = s[1], p = s[2];
    CAPTURE(n);
    const Matrix a = random_matrix(rng, n, k);
    const Matrix b = random_matrix(rng, k, p);
    const Matrix bt = random_matrix(rng, p, k);
    const Matrix c2 = random_matrix(rng, n, p);

    Matrix par(n, p), ser(n, p);
    kernels::gemm_nn(a.values(), b.values(), par.values(), n, k, p);
    kernels::serial::gemm_nn(a.values(), b.values(), ser.values(), n, k, p);
    CHECK(par == ser);

    kernels::gemm_nt(a.values(), bt.values(), par.values(), n, k, p);
    kernels::serial::gemm_nt(a.values(), bt.values(), ser.values(), n, k, p);
    CHECK(par == ser);

    Matrix tpar(k, p), tser(k, p);
    kernels::gemm_tn(a.values(), c2.values(), tpar.values(), n, k, p);
    kernels::serial::gemm_tn(a.values(), c2.values(), tser.values(), n, k, p);
    CHECK(tpar == tser);
  }
}

TEST_CASE("kernels overwrite rather than accumulate") {
  const Matrix a = Matrix::from_rows({{1, 2}});
  const Matrix b = Matrix::from_rows({{3}, {4}});
  Matrix c(1, 1, 100.0);
  kernels::gemm_nn(a.values(), b.values(), c.values(), 1, 2, 1);
  CHECK(c(0, 0) == 11.0);
  Matrix t(2, 1, 100.0);
  kernels::serial::gemm_tn(a.values(), Matrix(1, 1, 2.0).values(), t.values(), 1, 2, 1);
  CHECK(t == Matrix::from_rows({{2}, {4}}));
}

TEST_CASE("at least one worker thread") { CHECK(kernels::max_threads() >= 1); }
