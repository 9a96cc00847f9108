// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <memory>

#include "conmpc/linalg.hpp"

namespace conmpc {

/// Discrete-time agent model x(k+1) = f(x(k), u(k)) with 2-D position output.
/// The first two state entries must be the planar position so a rigid
/// translation of the swarm maps to adding the same offset to those entries.
struct AgentModel {
  virtual ~AgentModel() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  /// throws NonFiniteState when the step leaves the model's domain.
  virtual void step(const double* x, const double* u, double* x_next) const = 0;
  /// A = df/dx (n x n), B = df/du (n x m); either output may be null.
  virtual void jacobians(const double* x, const double* u, Mat* A, Mat* B) const = 0;
};

/// Kinematic bicycle, state (px, py, theta, gamma), input (v, delta):
///   px'    = px + Ts cos(theta) v
///   py'    = py + Ts sin(theta) v
///   theta' = theta + Ts (v / wheelbase) tan(gamma)
///   gamma' = gamma + Ts delta
/// Heading is not wrapped; the state box keeps it in range.
struct BicycleParams {
  double ts = 0.1;
  double wheelbase = 0.005;
};

class BicycleModel final : public AgentModel {
 public:
  explicit BicycleModel(BicycleParams p = {}) : p_(p) {}
  int state_dim() const override { return 4; }
  int input_dim() const override { return 2; }
  /// pre: |gamma| < pi/2 (tan leaves the domain at the boundary).
  void step(const double* x, const double* u, double* x_next) const override;
  void jacobians(const double* x, const double* u, Mat* A, Mat* B) const override;
  const BicycleParams& params() const { return p_; }

 private:
  BicycleParams p_;
};

/// Verifies that translating the position entries of the state translates the
/// successor state's position entries identically and leaves the rest alone.
/// Returns the largest defect over the probes; exceeds ~1e-12 only for models
/// whose dynamics depend on absolute position.
double check_position_invariance(const AgentModel& model, const Vec& x, const Vec& u,
                                 const Vec& offsets);

}  // namespace conmpc
