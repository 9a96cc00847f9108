// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "conmpc/simd/kernels.hpp"
#include "testutil.hpp"

using namespace conmpc;

namespace {

void check_backend_pair(const simd::Ops& a, const simd::Ops& b, std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  Vec x = testutil::random_vec(rng, n, -3.0, 3.0);
  Vec y = testutil::random_vec(rng, n, -3.0, 3.0);
  Vec w = testutil::random_vec(rng, n, 0.1, 2.0);

  CHECK(a.dot(x.data(), y.data(), n) == doctest::Approx(b.dot(x.data(), y.data(), n)).epsilon(1e-13));
  CHECK(a.wdot(x.data(), y.data(), w.data(), n) ==
        doctest::Approx(b.wdot(x.data(), y.data(), w.data(), n)).epsilon(1e-13));
  CHECK(a.norm_inf(x.data(), n) == b.norm_inf(x.data(), n));

  Vec ya = y, yb = y;
  a.axpy(0.37, x.data(), ya.data(), n);
  b.axpy(0.37, x.data(), yb.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-14));

  Vec xa = x, xb = x;
  a.scal(-1.75, xa.data(), n);
  b.scal(-1.75, xb.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(xa[i] == xb[i]);

  Vec ra = x, rb = x, sa = y, sb = y;
  const double c = std::cos(0.7), s = std::sin(0.7);
  a.rot(ra.data(), sa.data(), c, s, n);
  b.rot(rb.data(), sb.data(), c, s, n);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-14));
    CHECK(sa[i] == doctest::Approx(sb[i]).epsilon(1e-14));
  }
}

}  // namespace

TEST_CASE("scalar kernels match hand-computed values") {
  const simd::Ops& k = simd::scalar_ops();
  const double x[5] = {1, 2, 3, 4, 5};
  const double y[5] = {5, 4, 3, 2, 1};
  const double w[5] = {1, 0, 1, 0, 1};
  CHECK(k.dot(x, y, 5) == doctest::Approx(35.0));
  CHECK(k.wdot(x, y, w, 5) == doctest::Approx(5.0 + 9.0 + 5.0));
  CHECK(k.norm_inf(y, 5) == 5.0);
  CHECK(k.norm_inf(x, 0) == 0.0);

  double acc[3] = {1, 1, 1};
  const double inc[3] = {1, 2, 3};
  k.axpy(2.0, inc, acc, 3);
  CHECK(acc[0] == 3.0);
  CHECK(acc[1] == 5.0);
  CHECK(acc[2] == 7.0);
}

TEST_CASE("rotation kernel preserves two-norm") {
  const simd::Ops& k = simd::active_ops();
  std::mt19937_64 rng(11);
  Vec a = testutil::random_vec(rng, 37);
  Vec b = testutil::random_vec(rng, 37);
  const double n0 = k.dot(a.data(), a.data(), 37) + k.dot(b.data(), b.data(), 37);
  k.rot(a.data(), b.data(), std::cos(1.234), std::sin(1.234), 37);
  const double n1 = k.dot(a.data(), a.data(), 37) + k.dot(b.data(), b.data(), 37);
  CHECK(n1 == doctest::Approx(n0).epsilon(1e-13));
}

TEST_CASE("simd backend matches scalar reference on assorted lengths") {
  const simd::Ops* avx = simd::avx2_ops();
  if (avx == nullptr) {
    MESSAGE("avx2 unavailable on this host; scalar-only configuration");
    return;
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 64u, 701u}) {
    check_backend_pair(simd::scalar_ops(), *avx, n, 1000u + static_cast<unsigned>(n));
  }
}

TEST_CASE("active backend is deterministic call to call") {
  const simd::Ops& k = simd::active_ops();
  std::mt19937_64 rng(42);
  Vec x = testutil::random_vec(rng, 333);
  Vec y = testutil::random_vec(rng, 333);
  const double d1 = k.dot(x.data(), y.data(), x.size());
  const double d2 = k.dot(x.data(), y.data(), x.size());
  CHECK(d1 == d2);
}
