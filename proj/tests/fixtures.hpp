// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <cmath>
#include <limits>

#include "conmpc/ocp.hpp"

namespace conmpc::testutil {

inline constexpr double kInfBound = std::numeric_limits<double>::infinity();

/// Agents on a vertical line at x = -6 with mirrored references at x = +6
/// and one unit obstacle at the origin. Spacing 1.3 keeps the swarm
/// connected under a tanh cutoff with radius 2.
inline ScenarioSpec line_scenario(int agents, int horizon, double spacing = 1.3) {
  ScenarioSpec s;
  s.name = "test-line";
  s.horizon = horizon;
  s.steps = 10;
  s.kernel.type = KernelType::TanhCutoff;
  s.kernel.comm_radius = 2.0;
  s.kernel.gain = 10.0;
  s.lambda_min = 0.1;
  s.collision_radius = 1.0;
  s.state_box.lo = {-kInfBound, -kInfBound, -M_PI, -M_PI_2};
  s.state_box.hi = {kInfBound, kInfBound, M_PI, M_PI_2};
  s.input_box.lo = {-4.0, -1.0};
  s.input_box.hi = {4.0, 1.0};
  s.obstacles.push_back({0.0, 0.0, 1.0});
  for (int i = 0; i < agents; ++i) {
    AgentSpec a;
    const double y = (i - 0.5 * (agents - 1)) * spacing;
    a.x0 = {-6.0, y, 0.0, 0.0};
    a.reference.push_back({0, 6.0, y});
    s.agents.push_back(a);
  }
  return s;
}

/// Two agents near the edge of communication range whose references pull
/// them further apart; keeping the spectral floor forces the lower bound of
/// their separation, so the connectivity row goes active.
inline ScenarioSpec pull_apart_scenario(int horizon) {
  ScenarioSpec s;
  s.name = "test-pull-apart";
  s.horizon = horizon;
  s.steps = 10;
  s.kernel.type = KernelType::TanhCutoff;
  s.kernel.comm_radius = 2.0;
  s.kernel.gain = 10.0;
  s.lambda_min = 0.5;
  s.collision_radius = 0.5;
  s.state_box.lo = {-kInfBound, -kInfBound, -M_PI, -M_PI_2};
  s.state_box.hi = {kInfBound, kInfBound, M_PI, M_PI_2};
  s.input_box.lo = {-4.0, -1.0};
  s.input_box.hi = {4.0, 1.0};
  AgentSpec a;
  a.x0 = {0.0, -0.8, -M_PI_2, 0.0};
  a.reference.push_back({0, 0.0, -4.0});
  s.agents.push_back(a);
  AgentSpec b;
  b.x0 = {0.0, 0.8, M_PI_2, 0.0};
  b.reference.push_back({0, 0.0, 4.0});
  s.agents.push_back(b);
  return s;
}

/// Equilateral triangle: the weighted Laplacian has a repeated second
/// eigenvalue, so connectivity derivatives are undefined there.
inline ScenarioSpec triangle_scenario(int horizon) {
  ScenarioSpec s;
  s.name = "test-triangle";
  s.horizon = horizon;
  s.steps = 10;
  s.kernel.type = KernelType::TanhCutoff;
  s.kernel.comm_radius = 2.0;
  s.kernel.gain = 10.0;
  s.lambda_min = 0.1;
  s.collision_radius = 0.5;
  s.state_box.lo = {-kInfBound, -kInfBound, -M_PI, -M_PI_2};
  s.state_box.hi = {kInfBound, kInfBound, M_PI, M_PI_2};
  s.input_box.lo = {-4.0, -1.0};
  s.input_box.hi = {4.0, 1.0};
  const double r = 1.0;
  for (int i = 0; i < 3; ++i) {
    const double ang = 2.0 * M_PI * i / 3.0;
    AgentSpec a;
    a.x0 = {r * std::cos(ang), r * std::sin(ang), 0.0, 0.0};
    a.reference.push_back({0, r * std::cos(ang), r * std::sin(ang)});
    s.agents.push_back(a);
  }
  return s;
}

/// Stacked measured state vector straight from the initial conditions.
inline Vec measured(const ScenarioSpec& s) {
  Vec x;
  for (const AgentSpec& a : s.agents) x.insert(x.end(), a.x0.begin(), a.x0.end());
  return x;
}

}  // namespace conmpc::testutil
