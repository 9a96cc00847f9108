// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <stdexcept>
#include <string>

namespace conmpc {

/// Matrix handed to a symmetric routine is not symmetric within tolerance.
struct NotSymmetric : std::runtime_error {
  explicit NotSymmetric(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative factorization or eigensolve exceeded its sweep/iteration limit.
struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

/// Fiedler eigenvalue is not numerically simple; its derivatives are undefined.
struct DegenerateEigenvalue : std::runtime_error {
  DegenerateEigenvalue(const std::string& what, double gap_, int stage_ = -1)
      : std::runtime_error(what), gap(gap_), stage(stage_) {}
  double gap;  ///< spectral gap that failed the tolerance check
  int stage;   ///< horizon stage the Laplacian belongs to, -1 outside the OCP
};

/// Measured state violates the problem's state box beyond tolerance.
struct InfeasibleInput : std::runtime_error {
  explicit InfeasibleInput(const std::string& what) : std::runtime_error(what) {}
};

/// Dynamics step produced a non-finite state.
struct NonFiniteState : std::runtime_error {
  explicit NonFiniteState(const std::string& what) : std::runtime_error(what) {}
};

/// Quadratic subproblem data couples variables the partition cannot localize.
struct NonLocalRow : std::runtime_error {
  explicit NonLocalRow(const std::string& what) : std::runtime_error(what) {}
};

/// Scenario file failed schema validation.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// Consensus rounds exhausted before the residuals met tolerance.
struct MaxRounds : std::runtime_error {
  MaxRounds(const std::string& what, double primal_, double dual_)
      : std::runtime_error(what), primal(primal_), dual(dual_) {}
  double primal;  ///< consensus primal residual at the last round
  double dual;    ///< consensus dual residual at the last round
};

/// Decentralized eigenvalue estimate failed its residual check.
struct NotConverged : std::runtime_error {
  NotConverged(const std::string& what, double residual_)
      : std::runtime_error(what), residual(residual_) {}
  double residual;  ///< Rayleigh residual after the iteration budget
};

/// Operation requires a connected message topology.
struct GraphDisconnected : std::runtime_error {
  explicit GraphDisconnected(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace conmpc
