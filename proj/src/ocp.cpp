// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include "conmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conmpc/errors.hpp"

namespace conmpc {

namespace {
constexpr double kZeroDist = 1e-12;
}

bool BoxBounds::contains(const double* x, double tol) const {
  for (std::size_t c = 0; c < lo.size(); ++c) {
    if (x[c] < lo[c] - tol || x[c] > hi[c] + tol) return false;
  }
  return true;
}

void AgentSpec::reference_at(int step, double* r) const {
  const ReferencePoint* active = &reference.front();
  for (const ReferencePoint& p : reference) {
    if (p.from_step <= step) active = &p;
  }
  r[0] = active->x;
  r[1] = active->y;
}

void ScenarioSpec::validate() const {
  const auto fail = [](const std::string& msg) { throw SchemaError("scenario: " + msg); };
  if (agents.empty()) fail("needs at least one agent");
  if (horizon < 1) fail("horizon must be >= 1");
  if (steps < 1) fail("steps must be >= 1");
  if (q_diag.size() != 4 || r_diag.size() != 2 || q2_diag.size() != 2) {
    fail("cost diagonals must have sizes 4, 2, 2");
  }
  for (double v : q_diag) {
    if (!(v > 0.0)) fail("q_diag entries must be positive");
  }
  for (double v : r_diag) {
    if (!(v > 0.0)) fail("r_diag entries must be positive");
  }
  for (double v : q2_diag) {
    if (!(v >= 0.0)) fail("q2_diag entries must be nonnegative");
  }
  if (!(lambda_min > 0.0)) fail("lambda_min must be positive");
  if (!(collision_radius > 0.0)) fail("collision_radius must be positive");
  if (!(kernel.comm_radius > 0.0)) fail("kernel comm_radius must be positive");
  if (kernel.type == KernelType::Gaussian && !(kernel.epsilon > 0.0 && kernel.epsilon < 1.0)) {
    fail("gaussian epsilon must lie in (0, 1)");
  }
  if (kernel.type == KernelType::TanhCutoff && !(kernel.gain > 0.0)) {
    fail("tanh gain must be positive");
  }
  if (!(edge_threshold > 0.0 && edge_threshold < 1.0)) fail("edge_threshold must lie in (0, 1)");
  if (state_box.lo.size() != 4 || state_box.hi.size() != 4 || input_box.lo.size() != 2 ||
      input_box.hi.size() != 2) {
    fail("state box needs 4 entries per side, input box 2");
  }
  for (std::size_t c = 0; c < 4; ++c) {
    if (!(state_box.lo[c] <= state_box.hi[c])) fail("state box is empty");
  }
  for (std::size_t c = 0; c < 2; ++c) {
    if (!(input_box.lo[c] <= input_box.hi[c])) fail("input box is empty");
    if (!std::isfinite(input_box.lo[c]) || !std::isfinite(input_box.hi[c])) {
      fail("input box must be finite");
    }
  }
  for (const Obstacle& o : obstacles) {
    if (!(o.radius >= 0.0)) fail("obstacle radius must be nonnegative");
  }
  for (const AgentSpec& a : agents) {
    if (a.x0.size() != 4) fail("agent x0 must have 4 entries");
    if (!(a.params.ts > 0.0) || !(a.params.wheelbase > 0.0)) {
      fail("agent params must be positive");
    }
    int prev = std::numeric_limits<int>::min();
    for (const ReferencePoint& p : a.reference) {
      if (p.from_step <= prev) fail("reference schedule must have increasing from_step");
      prev = p.from_step;
    }
    if (!a.reference.empty() && a.reference.front().from_step != 0) {
      fail("reference schedule must start at step 0");
    }
  }
}

bool DecisionLayout::is_stage_position(int flat, int* agent, int* stage, int* coord) const {
  const int i = flat / per_agent();
  const int local = flat - i * per_agent();
  if (local >= nx * (horizon + 1)) return false;
  const int j = local / nx;
  const int c = local - nx * j;
  if (c > 1 || j < 1) return false;
  if (agent != nullptr) *agent = i;
  if (stage != nullptr) *stage = j;
  if (coord != nullptr) *coord = c;
  return true;
}

NlpProblem::NlpProblem(const ScenarioSpec& spec, Vec x_now, int step_index, bool connectivity_on)
    : spec_(&spec), x_now_(std::move(x_now)), step_(step_index), conn_on_(connectivity_on) {
  const int m = spec.agent_count();
  layout_.agents = m;
  layout_.horizon = spec.horizon;
  if (static_cast<int>(x_now_.size()) != 4 * m) {
    throw InfeasibleInput("measured state size does not match the agent count");
  }
  for (int i = 0; i < m; ++i) {
    if (!spec.state_box.contains(&x_now_[4 * i], 1e-9)) {
      throw InfeasibleInput("measured state outside the state box beyond 1e-9");
    }
  }
  Vec pos(2 * m);
  for (int i = 0; i < m; ++i) {
    pos[2 * i] = x_now_[4 * i];
    pos[2 * i + 1] = x_now_[4 * i + 1];
  }
  graph_now_ = build_laplacian(pos, spec.kernel, spec.edge_threshold);
  for (int i = 0; i < m; ++i) {
    for (int l = i + 1; l < m; ++l) {
      if (graph_now_.is_edge(i, l)) pairs_.push_back({i, l});
    }
  }
  conn_stages_ = (conn_on_ && m >= 2) ? spec.horizon : 0;
  build_rows();

  // constant per-agent cost curvature; identical for agents of the same
  // reference class since the weights are scenario-wide
  const int n = spec.horizon;
  const int d = layout_.per_agent();
  cost_hessian_.resize(m);
  for (int i = 0; i < m; ++i) {
    Mat h(d, d);
    const int lxbar = 4 * (n + 1) + 2 * n;
    const int lubar = lxbar + 4;
    for (int j = 1; j < n; ++j) {
      for (int c = 0; c < 4; ++c) {
        const double w = 2.0 * spec.q_diag[c];
        const int lx = 4 * j + c;
        h(lx, lx) += w;
        h(lx, lxbar + c) -= w;
        h(lxbar + c, lx) -= w;
        h(lxbar + c, lxbar + c) += w;
      }
      for (int c = 0; c < 2; ++c) {
        const double w = 2.0 * spec.r_diag[c];
        const int lu = 4 * (n + 1) + 2 * j + c;
        h(lu, lu) += w;
        h(lu, lubar + c) -= w;
        h(lubar + c, lu) -= w;
        h(lubar + c, lubar + c) += w;
      }
    }
    if (spec.agents[i].has_reference()) {
      for (int c = 0; c < 2; ++c) h(lxbar + c, lxbar + c) += 2.0 * spec.q2_diag[c];
    }
    cost_hessian_[i] = std::move(h);
  }
}

void NlpProblem::build_rows() {
  const int m = layout_.agents;
  const int n = layout_.horizon;
  const ScenarioSpec& s = *spec_;
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < 4; ++c) g_rows_.push_back({GRowKind::Init, i, 0, c});
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < 4; ++c) g_rows_.push_back({GRowKind::Dynamics, i, j, c});
    }
    for (int c = 0; c < 4; ++c) g_rows_.push_back({GRowKind::SteadyState, i, 0, c});
    for (int c = 0; c < 4; ++c) g_rows_.push_back({GRowKind::Terminal, i, 0, c});
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= n; ++j) {
      for (int c = 0; c < 4; ++c) {
        if (std::isfinite(s.state_box.lo[c])) h_rows_.push_back({HRowKind::StateLo, i, j, c, -1});
      }
      for (int c = 0; c < 4; ++c) {
        if (std::isfinite(s.state_box.hi[c])) h_rows_.push_back({HRowKind::StateHi, i, j, c, -1});
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < 2; ++c) h_rows_.push_back({HRowKind::InputLo, i, j, c, -1});
      for (int c = 0; c < 2; ++c) h_rows_.push_back({HRowKind::InputHi, i, j, c, -1});
    }
    for (int c = 0; c < 2; ++c) h_rows_.push_back({HRowKind::UbarLo, i, 0, c, -1});
    for (int c = 0; c < 2; ++c) h_rows_.push_back({HRowKind::UbarHi, i, 0, c, -1});
    for (int o = 0; o < static_cast<int>(s.obstacles.size()); ++o) {
      for (int j = 1; j <= n; ++j) h_rows_.push_back({HRowKind::Obstacle, i, j, o, -1});
    }
  }
  for (const auto& [i, l] : pairs_) {
    for (int j = 1; j <= n; ++j) h_rows_.push_back({HRowKind::Collision, i, j, -1, l});
  }
}

double NlpProblem::cost(const Vec& z, Vec* grad) const {
  const int m = layout_.agents;
  const int n = layout_.horizon;
  const ScenarioSpec& s = *spec_;
  if (grad != nullptr) grad->assign(layout_.dim(), 0.0);
  double j_total = 0.0;
  for (int i = 0; i < m; ++i) {
    const int xb = layout_.xbar_index(i);
    const int ub = layout_.ubar_index(i);
    for (int j = 1; j < n; ++j) {
      const int xi = layout_.x_index(i, j);
      for (int c = 0; c < 4; ++c) {
        const double d = z[xi + c] - z[xb + c];
        j_total += s.q_diag[c] * d * d;
        if (grad != nullptr) {
          (*grad)[xi + c] += 2.0 * s.q_diag[c] * d;
          (*grad)[xb + c] -= 2.0 * s.q_diag[c] * d;
        }
      }
      const int ui = layout_.u_index(i, j);
      for (int c = 0; c < 2; ++c) {
        const double d = z[ui + c] - z[ub + c];
        j_total += s.r_diag[c] * d * d;
        if (grad != nullptr) {
          (*grad)[ui + c] += 2.0 * s.r_diag[c] * d;
          (*grad)[ub + c] -= 2.0 * s.r_diag[c] * d;
        }
      }
    }
    if (s.agents[i].has_reference()) {
      double r[2];
      s.agents[i].reference_at(step_, r);
      for (int c = 0; c < 2; ++c) {
        const double d = z[xb + c] - r[c];
        j_total += s.q2_diag[c] * d * d;
        if (grad != nullptr) (*grad)[xb + c] += 2.0 * s.q2_diag[c] * d;
      }
    }
  }
  return j_total;
}

FiedlerData NlpProblem::stage_fiedler(const Vec& z, int stage) const {
  const Vec pos = stage_positions(z, stage);
  try {
    return fiedler(build_laplacian(pos, spec_->kernel, spec_->edge_threshold));
  } catch (const DegenerateEigenvalue& e) {
    throw DegenerateEigenvalue(e.what(), e.gap, stage);
  }
}

Vec NlpProblem::stage_positions(const Vec& z, int stage) const {
  const int m = layout_.agents;
  Vec pos(2 * m);
  for (int i = 0; i < m; ++i) {
    const int xi = layout_.x_index(i, stage);
    pos[2 * i] = z[xi];
    pos[2 * i + 1] = z[xi + 1];
  }
  return pos;
}

void NlpProblem::constraints(const Vec& z, Vec* g, Vec* h, Vec* conn) const {
  const int n = layout_.horizon;
  const ScenarioSpec& s = *spec_;
  if (g != nullptr) {
    g->resize(g_rows_.size());
    double fx[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t r = 0; r < g_rows_.size(); ++r) {
      const GRow& row = g_rows_[r];
      const BicycleModel model(s.agents[row.agent].params);
      switch (row.kind) {
        case GRowKind::Init:
          (*g)[r] = z[layout_.x_index(row.agent, 0) + row.comp] - x_now_[4 * row.agent + row.comp];
          break;
        case GRowKind::Dynamics:
          if (row.comp == 0) {
            model.step(&z[layout_.x_index(row.agent, row.stage)],
                       &z[layout_.u_index(row.agent, row.stage)], fx);
          }
          (*g)[r] = z[layout_.x_index(row.agent, row.stage + 1) + row.comp] - fx[row.comp];
          break;
        case GRowKind::SteadyState:
          if (row.comp == 0) {
            model.step(&z[layout_.xbar_index(row.agent)], &z[layout_.ubar_index(row.agent)], fx);
          }
          (*g)[r] = z[layout_.xbar_index(row.agent) + row.comp] - fx[row.comp];
          break;
        case GRowKind::Terminal:
          (*g)[r] = z[layout_.x_index(row.agent, n) + row.comp] -
                    z[layout_.xbar_index(row.agent) + row.comp];
          break;
      }
    }
  }
  if (h != nullptr) {
    h->resize(h_rows_.size());
    for (std::size_t r = 0; r < h_rows_.size(); ++r) {
      const HRow& row = h_rows_[r];
      switch (row.kind) {
        case HRowKind::StateLo:
          (*h)[r] = s.state_box.lo[row.comp] - z[layout_.x_index(row.agent, row.stage) + row.comp];
          break;
        case HRowKind::StateHi:
          (*h)[r] = z[layout_.x_index(row.agent, row.stage) + row.comp] - s.state_box.hi[row.comp];
          break;
        case HRowKind::InputLo:
          (*h)[r] = s.input_box.lo[row.comp] - z[layout_.u_index(row.agent, row.stage) + row.comp];
          break;
        case HRowKind::InputHi:
          (*h)[r] = z[layout_.u_index(row.agent, row.stage) + row.comp] - s.input_box.hi[row.comp];
          break;
        case HRowKind::UbarLo:
          (*h)[r] = s.input_box.lo[row.comp] - z[layout_.ubar_index(row.agent) + row.comp];
          break;
        case HRowKind::UbarHi:
          (*h)[r] = z[layout_.ubar_index(row.agent) + row.comp] - s.input_box.hi[row.comp];
          break;
        case HRowKind::Obstacle: {
          const Obstacle& o = s.obstacles[row.comp];
          const int xi = layout_.x_index(row.agent, row.stage);
          const double dist = std::hypot(z[xi] - o.x, z[xi + 1] - o.y);
          (*h)[r] = s.obstacle_keepout(row.comp) - dist;
          break;
        }
        case HRowKind::Collision: {
          const int xi = layout_.x_index(row.agent, row.stage);
          const int xl = layout_.x_index(row.other, row.stage);
          const double dist = std::hypot(z[xi] - z[xl], z[xi + 1] - z[xl + 1]);
          (*h)[r] = s.collision_radius - dist;
          break;
        }
      }
    }
  }
  if (conn != nullptr) {
    conn->resize(conn_stages_);
    for (int j = 1; j <= conn_stages_; ++j) {
      (*conn)[j - 1] = s.lambda_min - stage_fiedler(z, j).lambda2;
    }
  }
}

void NlpProblem::jacobians(const Vec& z, Csr* jg, Csr* jh, Csr* jconn) const {
  const int n = layout_.horizon;
  const int dim = layout_.dim();
  const ScenarioSpec& s = *spec_;
  if (jg != nullptr) {
    std::vector<Csr::Triplet> t;
    Mat a, b;
    for (std::size_t r = 0; r < g_rows_.size(); ++r) {
      const GRow& row = g_rows_[r];
      const int ri = static_cast<int>(r);
      const BicycleModel model(s.agents[row.agent].params);
      switch (row.kind) {
        case GRowKind::Init:
          t.push_back({ri, layout_.x_index(row.agent, 0) + row.comp, 1.0});
          break;
        case GRowKind::Dynamics: {
          if (row.comp == 0) {
            model.jacobians(&z[layout_.x_index(row.agent, row.stage)],
                            &z[layout_.u_index(row.agent, row.stage)], &a, &b);
          }
          t.push_back({ri, layout_.x_index(row.agent, row.stage + 1) + row.comp, 1.0});
          for (int c = 0; c < 4; ++c) {
            if (a(row.comp, c) != 0.0) {
              t.push_back({ri, layout_.x_index(row.agent, row.stage) + c, -a(row.comp, c)});
            }
          }
          for (int c = 0; c < 2; ++c) {
            if (b(row.comp, c) != 0.0) {
              t.push_back({ri, layout_.u_index(row.agent, row.stage) + c, -b(row.comp, c)});
            }
          }
          break;
        }
        case GRowKind::SteadyState: {
          if (row.comp == 0) {
            model.jacobians(&z[layout_.xbar_index(row.agent)], &z[layout_.ubar_index(row.agent)],
                            &a, &b);
          }
          for (int c = 0; c < 4; ++c) {
            const double v = (row.comp == c ? 1.0 : 0.0) - a(row.comp, c);
            if (v != 0.0) t.push_back({ri, layout_.xbar_index(row.agent) + c, v});
          }
          for (int c = 0; c < 2; ++c) {
            if (b(row.comp, c) != 0.0) {
              t.push_back({ri, layout_.ubar_index(row.agent) + c, -b(row.comp, c)});
            }
          }
          break;
        }
        case GRowKind::Terminal:
          t.push_back({ri, layout_.x_index(row.agent, n) + row.comp, 1.0});
          t.push_back({ri, layout_.xbar_index(row.agent) + row.comp, -1.0});
          break;
      }
    }
    *jg = Csr::from_triplets(static_cast<int>(g_rows_.size()), dim, std::move(t));
  }
  if (jh != nullptr) {
    std::vector<Csr::Triplet> t;
    for (std::size_t r = 0; r < h_rows_.size(); ++r) {
      const HRow& row = h_rows_[r];
      const int ri = static_cast<int>(r);
      switch (row.kind) {
        case HRowKind::StateLo:
          t.push_back({ri, layout_.x_index(row.agent, row.stage) + row.comp, -1.0});
          break;
        case HRowKind::StateHi:
          t.push_back({ri, layout_.x_index(row.agent, row.stage) + row.comp, 1.0});
          break;
        case HRowKind::InputLo:
          t.push_back({ri, layout_.u_index(row.agent, row.stage) + row.comp, -1.0});
          break;
        case HRowKind::InputHi:
          t.push_back({ri, layout_.u_index(row.agent, row.stage) + row.comp, 1.0});
          break;
        case HRowKind::UbarLo:
          t.push_back({ri, layout_.ubar_index(row.agent) + row.comp, -1.0});
          break;
        case HRowKind::UbarHi:
          t.push_back({ri, layout_.ubar_index(row.agent) + row.comp, 1.0});
          break;
        case HRowKind::Obstacle: {
          const Obstacle& o = s.obstacles[row.comp];
          const int xi = layout_.x_index(row.agent, row.stage);
          double ux = z[xi] - o.x;
          double uy = z[xi + 1] - o.y;
          const double dist = std::hypot(ux, uy);
          if (dist < kZeroDist) {
            ++zero_distance_events_;
            ux = 1.0;
            uy = 0.0;
          } else {
            ux /= dist;
            uy /= dist;
          }
          t.push_back({ri, xi, -ux});
          t.push_back({ri, xi + 1, -uy});
          break;
        }
        case HRowKind::Collision: {
          const int xi = layout_.x_index(row.agent, row.stage);
          const int xl = layout_.x_index(row.other, row.stage);
          double ux = z[xi] - z[xl];
          double uy = z[xi + 1] - z[xl + 1];
          const double dist = std::hypot(ux, uy);
          if (dist < kZeroDist) {
            ++zero_distance_events_;
            ux = 1.0;
            uy = 0.0;
          } else {
            ux /= dist;
            uy /= dist;
          }
          t.push_back({ri, xi, -ux});
          t.push_back({ri, xi + 1, -uy});
          t.push_back({ri, xl, ux});
          t.push_back({ri, xl + 1, uy});
          break;
        }
      }
    }
    *jh = Csr::from_triplets(static_cast<int>(h_rows_.size()), dim, std::move(t));
  }
  if (jconn != nullptr) {
    std::vector<Csr::Triplet> t;
    for (int j = 1; j <= conn_stages_; ++j) {
      const FiedlerData fd = stage_fiedler(z, j);
      const Vec pos = stage_positions(z, j);
      Vec grad;
      try {
        grad = grad_lambda2(pos, spec_->kernel, fd);
      } catch (const DegenerateEigenvalue& e) {
        throw DegenerateEigenvalue(e.what(), e.gap, j);
      }
      for (int i = 0; i < layout_.agents; ++i) {
        for (int c = 0; c < 2; ++c) {
          const double v = -grad[2 * i + c];
          if (v != 0.0) t.push_back({j - 1, layout_.x_index(i, j) + c, v});
        }
      }
    }
    *jconn = Csr::from_triplets(conn_stages_, dim, std::move(t));
  }
}

std::vector<Mat> NlpProblem::stage_curvature(const Vec& z, const Vec& mu_h,
                                              const Vec& mu_conn,
                                              std::vector<bool>& active) const {
  const int m = layout_.agents;
  const int n = layout_.horizon;
  const ScenarioSpec& s = *spec_;

  std::vector<Mat> stage_blocks(n + 1);
  active.assign(n + 1, false);
  const auto block = [&](int j) -> Mat& {
    if (!active[j]) {
      stage_blocks[j] = Mat(2 * m, 2 * m);
      active[j] = true;
    }
    return stage_blocks[j];
  };

  for (std::size_t r = 0; r < h_rows_.size(); ++r) {
    const double mu = mu_h[r];
    if (mu == 0.0) continue;
    const HRow& row = h_rows_[r];
    if (row.kind == HRowKind::Obstacle) {
      const Obstacle& o = s.obstacles[row.comp];
      const int xi = layout_.x_index(row.agent, row.stage);
      const double dx = z[xi] - o.x;
      const double dy = z[xi + 1] - o.y;
      const double dist = std::hypot(dx, dy);
      if (dist < kZeroDist) continue;
      const double ux = dx / dist, uy = dy / dist;
      // grad h = -u; hess h = -(I - u u^T)/dist
      Mat& b = block(row.stage);
      const int bi = 2 * row.agent;
      const double sxx = (1.0 - ux * ux) / dist;
      const double syy = (1.0 - uy * uy) / dist;
      const double sxy = (-ux * uy) / dist;
      b(bi, bi) -= mu * sxx;
      b(bi + 1, bi + 1) -= mu * syy;
      b(bi, bi + 1) -= mu * sxy;
      b(bi + 1, bi) -= mu * sxy;
    } else if (row.kind == HRowKind::Collision) {
      const int xi = layout_.x_index(row.agent, row.stage);
      const int xl = layout_.x_index(row.other, row.stage);
      const double dx = z[xi] - z[xl];
      const double dy = z[xi + 1] - z[xl + 1];
      const double dist = std::hypot(dx, dy);
      if (dist < kZeroDist) continue;
      const double ux = dx / dist, uy = dy / dist;
      Mat& b = block(row.stage);
      const int bi = 2 * row.agent;
      const int bl = 2 * row.other;
      const double sxx = (1.0 - ux * ux) / dist;
      const double syy = (1.0 - uy * uy) / dist;
      const double sxy = (-ux * uy) / dist;
      // 4x4 pattern [[-S, S], [S, -S]] on (p_i, p_l)
      const double sm[2][2] = {{sxx, sxy}, {sxy, syy}};
      for (int rr = 0; rr < 2; ++rr) {
        for (int cc = 0; cc < 2; ++cc) {
          const double v = mu * sm[rr][cc];
          b(bi + rr, bi + cc) -= v;
          b(bl + rr, bl + cc) -= v;
          b(bi + rr, bl + cc) += v;
          b(bl + rr, bi + cc) += v;
        }
      }
    }
  }
  for (int j = 1; j <= conn_stages_; ++j) {
    const double mu = mu_conn[j - 1];
    if (mu == 0.0) continue;
    const FiedlerData fd = stage_fiedler(z, j);
    const Vec pos = stage_positions(z, j);
    Mat hl;
    try {
      hl = hess_lambda2(pos, spec_->kernel, fd);
    } catch (const DegenerateEigenvalue& e) {
      throw DegenerateEigenvalue(e.what(), e.gap, j);
    }
    Mat& b = block(j);
    for (int r = 0; r < 2 * m; ++r) {
      for (int c = 0; c < 2 * m; ++c) b(r, c) -= mu * hl(r, c);
    }
  }
  return stage_blocks;
}

void NlpProblem::scatter_stage_block(Mat& h, const Mat& block, int stage) const {
  const int m = layout_.agents;
  for (int ia = 0; ia < m; ++ia) {
    for (int ib = 0; ib < m; ++ib) {
      for (int ra = 0; ra < 2; ++ra) {
        for (int rb = 0; rb < 2; ++rb) {
          const double v = block(2 * ia + ra, 2 * ib + rb);
          if (v != 0.0) {
            h(layout_.x_index(ia, stage) + ra, layout_.x_index(ib, stage) + rb) += v;
          }
        }
      }
    }
  }
}

Mat NlpProblem::lagrangian_hessian(const Vec& z, const Vec& mu_h, const Vec& mu_conn) const {
  const int m = layout_.agents;
  const int d = layout_.per_agent();
  Mat h(layout_.dim(), layout_.dim());
  for (int i = 0; i < m; ++i) {
    const int base = i * d;
    const Mat& blk = cost_hessian_[i];
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        const double v = blk(r, c);
        if (v != 0.0) h(base + r, base + c) = v;
      }
    }
  }
  std::vector<bool> active;
  const std::vector<Mat> blocks = stage_curvature(z, mu_h, mu_conn, active);
  for (int j = 1; j <= layout_.horizon; ++j) {
    if (active[j]) scatter_stage_block(h, blocks[j], j);
  }
  return h;
}

Mat NlpProblem::convexified_hessian(const Vec& z, const Vec& mu_h, const Vec& mu_conn,
                                    double eps_h) const {
  const int m = layout_.agents;
  const int n = layout_.horizon;
  const int d = layout_.per_agent();
  const ScenarioSpec& s = *spec_;

  if (clamped_floor_ != eps_h) {
    cost_hessian_clamped_.assign(m, Mat());
    Mat clamped_by_class[2];
    bool have[2] = {false, false};
    for (int i = 0; i < m; ++i) {
      const int cls = s.agents[i].has_reference() ? 1 : 0;
      if (!have[cls]) {
        clamped_by_class[cls] = eig_clamp(cost_hessian_[i], eps_h);
        have[cls] = true;
      }
      cost_hessian_clamped_[i] = clamped_by_class[cls];
    }
    clamped_floor_ = eps_h;
  }

  Mat h(layout_.dim(), layout_.dim());
  for (int i = 0; i < m; ++i) {
    const int base = i * d;
    const Mat& blk = cost_hessian_clamped_[i];
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        const double v = blk(r, c);
        if (v != 0.0) h(base + r, base + c) = v;
      }
    }
  }

  // Norm-row and connectivity curvature is indefinite; projecting each stage
  // block to psd keeps the whole matrix at the cost-block floor while
  // preserving block-diagonal-plus-stage structure for partitioning.
  std::vector<bool> active;
  const std::vector<Mat> blocks = stage_curvature(z, mu_h, mu_conn, active);
  for (int j = 1; j <= n; ++j) {
    if (!active[j]) continue;
    scatter_stage_block(h, eig_clamp(blocks[j], 0.0), j);
  }
  return h;
}

Vec NlpProblem::hover_candidate() const {
  const int m = layout_.agents;
  const int n = layout_.horizon;
  Vec z(layout_.dim(), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= n; ++j) {
      for (int c = 0; c < 4; ++c) z[layout_.x_index(i, j) + c] = x_now_[4 * i + c];
    }
    for (int c = 0; c < 4; ++c) z[layout_.xbar_index(i) + c] = x_now_[4 * i + c];
  }
  return z;
}

double NlpProblem::violation_inf(const Vec& z) const {
  Vec g, h, conn;
  constraints(z, &g, &h, &conn);
  double v = 0.0;
  for (double x : g) v = std::max(v, std::fabs(x));
  for (double x : h) v = std::max(v, x);
  for (double x : conn) v = std::max(v, x);
  return v;
}

double NlpProblem::violation_l1(const Vec& z) const {
  Vec g, h, conn;
  constraints(z, &g, &h, &conn);
  double v = 0.0;
  for (double x : g) v += std::fabs(x);
  for (double x : h) v += std::max(0.0, x);
  for (double x : conn) v += std::max(0.0, x);
  return v;
}

}  // namespace conmpc
