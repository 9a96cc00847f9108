// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <functional>
#include <vector>

#include "conmpc/nlp_model.hpp"
#include "conmpc/qp.hpp"

namespace conmpc {

enum class SqpStatus {
  KktOptimal,
  MaxIter,
  LineSearchFailure,  // no descent along the QP step, or Armijo exhausted
  QpFailure,          // subproblem reported primal infeasibility
  Degenerate,         // repeated Fiedler eigenvalue blocked the derivatives
};

struct SqpSettings {
  int max_outer = 200;
  double kkt_tol = 1e-6;
  double step_tol = 1e-10;     // stop when the QP step collapses
  double eps_hessian = 1e-6;   // convexity floor passed to the NLP Hessian
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double min_alpha = 1e-8;
  double penalty_margin = 1.0;  // merit weight stays above |mu|_inf by this
  QpSettings qp;
};

/// One row per accepted outer iteration.
struct SqpIterate {
  int iteration = 0;
  double cost = 0.0;
  double violation_l1 = 0.0;
  double kkt = 0.0;
  double alpha = 0.0;
  double merit_before = 0.0;
  double merit_after = 0.0;
  double penalty = 0.0;
  int qp_iterations = 0;
  bool soc = false;                // step came from a second-order correction
  double min_stage_lambda2 = 0.0;  // NaN when connectivity rows are absent
};

struct SqpResult {
  SqpStatus status = SqpStatus::MaxIter;
  Vec z;
  Vec mu_eq;
  Vec mu_in;
  Vec mu_conn;
  int iterations = 0;
  double kkt = 0.0;
  double violation = 0.0;  // max-norm violation at exit
  std::vector<SqpIterate> log;
  int degenerate_stage = -1;
};

/// Optional multiplier seed; vectors with mismatched sizes are ignored.
struct SqpWarmStart {
  Vec mu_eq;
  Vec mu_in;
  Vec mu_conn;
};

/// Pluggable QP back end (the consensus splitting solver reuses this hook).
using QpSolveFn =
    std::function<QpSolution(const QpProblem&, const QpSettings&, const QpSolution*)>;

/// Eigenvalue floor for a symmetric matrix: returns h unchanged when its
/// minimum eigenvalue is already >= eps, otherwise the nearest (Frobenius)
/// symmetric matrix whose eigenvalues are clamped up to eps. Sets *clamped
/// when the floor had to act.
Mat regularize_hessian(const Mat& h, double eps, bool* clamped = nullptr);

/// Sequential quadratic programming on one MPC step's program. z0 is the
/// initial candidate; multipliers may be warm started separately. Each
/// accepted iterate does not increase the exact-penalty merit.
SqpResult solve_sqp(const NlpModel& nlp, const Vec& z0, const SqpSettings& settings,
                    const SqpWarmStart* warm = nullptr, QpSolveFn qp_solver = nullptr);

}  // namespace conmpc
