// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conmpc/dynamics.hpp"
#include "conmpc/graph.hpp"
#include "conmpc/linalg.hpp"
#include "conmpc/nlp_model.hpp"

namespace conmpc {

/// Componentwise box; entries may be +-inf to drop a bound.
struct BoxBounds {
  Vec lo;
  Vec hi;
  bool contains(const double* x, double tol) const;
};

/// Piecewise-constant position reference: active entry is the last one whose
/// from_step is <= the current step.
struct ReferencePoint {
  int from_step = 0;
  double x = 0.0;
  double y = 0.0;
};

struct AgentSpec {
  Vec x0;  // size 4: px, py, theta, gamma
  std::vector<ReferencePoint> reference;  // empty: agent carries no offset cost
  BicycleParams params;

  bool has_reference() const { return !reference.empty(); }
  /// pre: has_reference()
  void reference_at(int step, double* r) const;
};

struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;  // rho_o; keep-out adds half the collision diameter
};

struct ScenarioSpec {
  std::string name;
  int horizon = 10;  // N
  int steps = 0;
  unsigned seed = 0;
  WeightKernel kernel;
  double edge_threshold = 1e-3;
  double lambda_min = 0.1;
  double collision_radius = 1.0;  // rho_a, minimum pairwise center distance
  std::vector<AgentSpec> agents;
  std::vector<Obstacle> obstacles;
  Vec q_diag = {1.0, 1.0, 1.0, 1.0};
  Vec r_diag = {0.5, 0.5};
  Vec q2_diag = {5.0, 5.0};
  BoxBounds state_box;  // size 4 each side
  BoxBounds input_box;  // size 2 each side

  int agent_count() const { return static_cast<int>(agents.size()); }
  double obstacle_keepout(int o) const { return obstacles[o].radius + 0.5 * collision_radius; }
  /// throws SchemaError on structurally invalid data (sizes, signs, weights).
  void validate() const;
};

/// Stacked decision vector: per agent [x(0..N); u(0..N-1); xbar; ubar],
/// agents concatenated in index order.
struct DecisionLayout {
  int agents = 0;
  int horizon = 0;
  static constexpr int nx = 4;
  static constexpr int nu = 2;

  int per_agent() const { return nx * (horizon + 1) + nu * horizon + nx + nu; }
  int dim() const { return agents * per_agent(); }
  int x_index(int i, int j) const { return i * per_agent() + nx * j; }
  int u_index(int i, int j) const { return i * per_agent() + nx * (horizon + 1) + nu * j; }
  int xbar_index(int i) const { return i * per_agent() + nx * (horizon + 1) + nu * horizon; }
  int ubar_index(int i) const { return xbar_index(i) + nx; }
  /// agent owning a flat decision index
  int agent_of(int flat) const { return flat / per_agent(); }
  /// true when the flat index is a position coordinate of some stage 1..N
  bool is_stage_position(int flat, int* agent, int* stage, int* coord) const;
};

enum class GRowKind { Init, Dynamics, SteadyState, Terminal };
struct GRow {
  GRowKind kind;
  int agent;
  int stage;  // dynamics stage j (x(j+1) = f(x(j), u(j))); 0 otherwise
  int comp;   // state component 0..3
};

enum class HRowKind { StateLo, StateHi, InputLo, InputHi, UbarLo, UbarHi, Obstacle, Collision };
struct HRow {
  HRowKind kind;
  int agent;
  int stage;
  int comp;   // box component, or obstacle index for Obstacle rows
  int other;  // second agent for Collision rows, else -1
};

/// One MPC step's nonlinear program over the stacked decision vector.
///
/// Equalities g(z) = 0: initial state pin, dynamics defects, steady-state
/// condition on (xbar, ubar), terminal x(N) = xbar. Inequalities h(z) <= 0:
/// state/input boxes (finite bounds only), ubar box, obstacle keep-out and
/// pairwise collision separation at stages 1..N. Connectivity rows c_j(z) =
/// lambda_min - lambda2(L(p(j))) <= 0 at stages 1..N are kept separate since
/// their exact curvature enters the Lagrangian Hessian.
class NlpProblem final : public NlpModel {
 public:
  /// x_now stacks measured agent states (4 per agent).
  /// throws InfeasibleInput when x_now leaves the state box by more than 1e-9.
  NlpProblem(const ScenarioSpec& spec, Vec x_now, int step_index, bool connectivity_on);

  const ScenarioSpec& spec() const { return *spec_; }
  const DecisionLayout& layout() const { return layout_; }
  int step_index() const { return step_; }
  bool connectivity_on() const { return conn_on_; }

  int dim() const override { return layout_.dim(); }
  int num_eq() const override { return static_cast<int>(g_rows_.size()); }
  int num_ineq() const override { return static_cast<int>(h_rows_.size()); }
  int num_conn() const override { return conn_stages_; }
  double connectivity_floor() const override { return spec_->lambda_min; }

  const std::vector<GRow>& g_rows() const { return g_rows_; }
  const std::vector<HRow>& h_rows() const { return h_rows_; }
  const std::vector<std::pair<int, int>>& collision_pairs() const { return pairs_; }
  const WeightedLaplacian& initial_graph() const { return graph_now_; }
  const Vec& x_now() const { return x_now_; }

  double cost(const Vec& z, Vec* grad) const override;
  void constraints(const Vec& z, Vec* g, Vec* h, Vec* conn) const override;
  void jacobians(const Vec& z, Csr* jg, Csr* jh, Csr* jconn) const override;

  /// Lagrangian curvature with cost terms exact, Gauss-Newton (dropped)
  /// equality curvature, exact norm-row and connectivity curvature, made
  /// positive definite blockwise: per-agent cost blocks carry the eps_h
  /// floor, stage-position curvature blocks are clamped to psd.
  /// post: result >= eps_h * I.
  Mat convexified_hessian(const Vec& z, const Vec& mu_h, const Vec& mu_conn,
                          double eps_h) const override;

  /// Raw Lagrangian curvature: exact cost blocks plus exact norm-row and
  /// connectivity curvature, no clamping. Equality curvature is omitted;
  /// positions enter the dynamics affinely, so its position rows and
  /// columns are zero regardless. Intended for derivative checks.
  Mat lagrangian_hessian(const Vec& z, const Vec& mu_h, const Vec& mu_conn) const;

  /// All-hover candidate: x(j) = x0, u = 0, xbar = x0, ubar = 0.
  Vec hover_candidate() const;

  /// Largest violation across every constraint group.
  double violation_inf(const Vec& z) const override;
  /// Exact-penalty violation: sum |g| + sum h+ + sum conn+.
  double violation_l1(const Vec& z) const override;

  /// Positions of all agents at a horizon stage, from z.
  Vec stage_positions(const Vec& z, int stage) const;

  int zero_distance_events() const { return zero_distance_events_; }

 private:
  void build_rows();
  FiedlerData stage_fiedler(const Vec& z, int stage) const;
  std::vector<Mat> stage_curvature(const Vec& z, const Vec& mu_h, const Vec& mu_conn,
                                   std::vector<bool>& active) const;
  void scatter_stage_block(Mat& h, const Mat& block, int stage) const;

  const ScenarioSpec* spec_;
  DecisionLayout layout_;
  Vec x_now_;
  int step_ = 0;
  bool conn_on_ = true;
  int conn_stages_ = 0;
  WeightedLaplacian graph_now_;         // frozen message/collision topology
  std::vector<std::pair<int, int>> pairs_;  // collision pairs, i < l
  std::vector<GRow> g_rows_;
  std::vector<HRow> h_rows_;
  std::vector<Mat> cost_hessian_;       // per agent, eps_h-clamped lazily
  mutable std::vector<Mat> cost_hessian_clamped_;
  mutable double clamped_floor_ = -1.0;
  mutable int zero_distance_events_ = 0;
};

}  // namespace conmpc
