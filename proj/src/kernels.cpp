// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include <cstdlib>
#include <string>

#include "conmpc/simd/kernels.hpp"

namespace conmpc::simd {

#if defined(CONMPC_HAVE_AVX2)
const Ops* avx2_ops_impl();  // defined in kernels_avx2.cpp
#endif

const Ops* avx2_ops() {
#if defined(CONMPC_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return avx2_ops_impl();
  }
#endif
  return nullptr;
}

namespace {

const Ops& select_ops() {
  const char* forced = std::getenv("CONMPC_SIMD");
  if (forced != nullptr) {
    const std::string want(forced);
    if (want == "scalar") return scalar_ops();
    if (want == "avx2" && avx2_ops() != nullptr) return *avx2_ops();
  }
  const Ops* best = avx2_ops();
  return best != nullptr ? *best : scalar_ops();
}

}  // namespace

const Ops& active_ops() {
  static const Ops& ops = select_ops();
  return ops;
}

std::string active_backend() { return active_ops().name; }

}  // namespace conmpc::simd
