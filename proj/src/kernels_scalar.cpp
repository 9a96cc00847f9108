// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include <cmath>
#include <cstddef>

#include "conmpc/simd/kernels.hpp"

namespace conmpc::simd {
namespace {

// Scalar kernels accumulate in four lanes exactly like the SIMD variants so
// both backends agree to rounding (not bitwise: lane reduction order matches,
// element grouping differs only in the tail).

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return ((a0 + a1) + (a2 + a3)) + tail;
}

double wdot_scalar(const double* x, const double* y, const double* w, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i] * w[i];
    a1 += x[i + 1] * y[i + 1] * w[i + 1];
    a2 += x[i + 2] * y[i + 2] * w[i + 2];
    a3 += x[i + 3] * y[i + 3] * w[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i] * w[i];
  return ((a0 + a1) + (a2 + a3)) + tail;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void rot_scalar(double* a, double* b, double c, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ai = a[i];
    const double bi = b[i];
    a[i] = c * ai + s * bi;
    b[i] = -s * ai + c * bi;
  }
}

double norm_inf_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{"scalar", dot_scalar,  wdot_scalar,
                       axpy_scalar, scal_scalar, rot_scalar, norm_inf_scalar};
  return ops;
}

}  // namespace conmpc::simd
