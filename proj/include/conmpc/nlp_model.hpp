// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include "conmpc/linalg.hpp"

namespace conmpc {

/// Smooth program  min f(z)  s.t.  g(z) = 0,  h(z) <= 0,  c(z) <= 0
/// where the c block collects connectivity rows whose exact curvature the
/// Hessian model treats specially. Everything the outer solver needs.
class NlpModel {
 public:
  virtual ~NlpModel() = default;

  virtual int dim() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;
  virtual int num_conn() const = 0;

  virtual double cost(const Vec& z, Vec* grad) const = 0;
  virtual void constraints(const Vec& z, Vec* g, Vec* h, Vec* conn) const = 0;
  virtual void jacobians(const Vec& z, Csr* jg, Csr* jh, Csr* jconn) const = 0;

  /// Positive definite model of the Lagrangian Hessian; post: >= eps_h * I.
  virtual Mat convexified_hessian(const Vec& z, const Vec& mu_h, const Vec& mu_conn,
                                  double eps_h) const = 0;

  virtual double violation_inf(const Vec& z) const = 0;
  virtual double violation_l1(const Vec& z) const = 0;

  /// Threshold the connectivity rows keep an eigenvalue above; only used to
  /// report the spectral margin in iteration logs.
  virtual double connectivity_floor() const { return 0.0; }
};

}  // namespace conmpc
