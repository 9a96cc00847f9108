// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

// AVX2+FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a runtime CPU feature check (see kernels.cpp).

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "conmpc/simd/kernels.hpp"

namespace conmpc::simd {
namespace {

double reduce4(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  // matches the scalar lane reduction ((a0+a1) + (a2+a3))
  const __m128d sum = _mm_add_pd(lo, hi);  // (a0+a2, a1+a3)
  return _mm_cvtsd_f64(sum) + _mm_cvtsd_f64(_mm_unpackhi_pd(sum, sum));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return reduce4(acc) + tail;
}

double wdot_avx2(const double* x, const double* y, const double* w, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xy = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(xy, _mm256_loadu_pd(w + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i] * w[i];
  return reduce4(acc) + tail;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

void rot_avx2(double* a, double* b, double c, double s, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    _mm256_storeu_pd(a + i, _mm256_fmadd_pd(vc, va, _mm256_mul_pd(vs, vb)));
    _mm256_storeu_pd(b + i, _mm256_fmsub_pd(vc, vb, _mm256_mul_pd(vs, va)));
  }
  for (; i < n; ++i) {
    const double ai = a[i];
    const double bi = b[i];
    a[i] = c * ai + s * bi;
    b[i] = -s * ai + c * bi;
  }
}

double norm_inf_avx2(const double* x, std::size_t n) {
  const __m256d signmask = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_andnot_pd(signmask, _mm256_loadu_pd(x + i)));
  }
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d m2 = _mm_max_pd(lo, hi);
  double m = std::max(_mm_cvtsd_f64(m2), _mm_cvtsd_f64(_mm_unpackhi_pd(m2, m2)));
  for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

}  // namespace

const Ops* avx2_ops_impl() {
  static const Ops ops{"avx2", dot_avx2,  wdot_avx2,
                       axpy_avx2, scal_avx2, rot_avx2, norm_inf_avx2};
  return &ops;
}

}  // namespace conmpc::simd
