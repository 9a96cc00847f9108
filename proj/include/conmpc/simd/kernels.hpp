// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <cstddef>
#include <string>

namespace conmpc::simd {

/// Vector kernels used by the dense linear algebra and the QP solver.
/// Each entry point has a scalar reference implementation and, on x86-64,
/// an AVX2+FMA variant with identical fixed-order accumulation so that a
/// given backend is bitwise deterministic run to run.
struct Ops {
  const char* name;
  /// sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// sum_i x[i] * y[i] * w[i]
  double (*wdot)(const double* x, const double* y, const double* w, std::size_t n);
  /// y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// x *= a
  void (*scal)(double a, double* x, std::size_t n);
  /// plane rotation: (a, b) <- (c*a + s*b, -s*a + c*b)
  void (*rot)(double* a, double* b, double c, double s, std::size_t n);
  /// max_i |x[i]|, 0 for empty input
  double (*norm_inf)(const double* x, std::size_t n);
};

/// Scalar reference kernels; always available.
const Ops& scalar_ops();

/// AVX2+FMA kernels; null when the binary or the CPU lacks support.
const Ops* avx2_ops();

/// Backend selected at startup: AVX2 when the CPU supports it, else scalar.
/// Environment variable CONMPC_SIMD=scalar|avx2 overrides the choice.
const Ops& active_ops();

/// Name of the backend active_ops() returns ("scalar" or "avx2").
std::string active_backend();

}  // namespace conmpc::simd
