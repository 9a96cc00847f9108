// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include "conmpc/linalg.hpp"

namespace conmpc {

/// Convex quadratic program
///   min 0.5 z^T H z + c^T z   s.t.  A_eq z = b_eq,  A_in z <= b_in.
/// H must be symmetric positive definite (the NLP layer guarantees a floor).
struct QpProblem {
  Mat h;
  Vec c;
  Csr a_eq;  // p x n
  Vec b_eq;
  Csr a_in;  // q x n
  Vec b_in;

  int dim() const { return h.rows; }
  int num_eq() const { return a_eq.rows; }
  int num_in() const { return a_in.rows; }
};

enum class QpStatus { Optimal, MaxIter, PrimalInfeasible };

struct QpSettings {
  double tol_abs = 1e-8;
  double tol_rel = 1e-9;
  int max_iter = 20000;
  double sigma = 1e-6;          // proximal weight on the primal iterate
  double over_relax = 1.6;
  double rho0 = 0.1;            // initial constraint penalty
  double rho_eq_scale = 1e3;    // equality rows run this much stiffer
  double rho_min = 1e-6;
  double rho_max = 1e6;
  int check_every = 25;         // termination / adaptation cadence
  double adapt_ratio = 10.0;    // residual imbalance triggering rho *= 2 or /= 2
  bool scale = true;
  int scale_iters = 10;
  bool polish = true;           // active-set KKT refinement after convergence
  double polish_delta = 1e-9;
  int polish_passes = 4;
  double infeas_tol = 1e-5;     // relative certificate tolerance
  int infeas_persist = 100;     // consecutive positive checks before declaring
};

struct QpSolution {
  QpStatus status = QpStatus::MaxIter;
  Vec delta_z;
  Vec mu_eq;
  Vec mu_in;  // >= 0
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho_final = 0.0;  // adapted penalty, reusable as rho0 via warm start
  bool polished = false;
};

/// Operator-splitting solve; deterministic for identical inputs and warm
/// start. `warm` seeds the primal/dual iterates and the penalty parameter.
QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings = {},
                    const QpSolution* warm = nullptr);

}  // namespace conmpc
