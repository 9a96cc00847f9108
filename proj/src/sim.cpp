// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#include "conmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>

#include "conmpc/dynamics.hpp"
#include "conmpc/errors.hpp"
#include "conmpc/graph.hpp"

namespace conmpc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec stacked_positions(const Vec& x, int m) {
  Vec pos(2 * m);
  for (int i = 0; i < m; ++i) {
    pos[2 * i] = x[4 * i];
    pos[2 * i + 1] = x[4 * i + 1];
  }
  return pos;
}

double clamp_box(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

const char* to_string(StepOutcome o) {
  switch (o) {
    case StepOutcome::KktOptimal: return "kkt_optimal";
    case StepOutcome::MaxIterFeasible: return "max_iter_feasible";
    case StepOutcome::StalledFeasible: return "stalled_feasible";
    case StepOutcome::Terminal: return "terminal";
    case StepOutcome::LineSearchFailure: return "line_search_failure";
    case StepOutcome::QpFailure: return "qp_failure";
    case StepOutcome::Degenerate: return "degenerate";
    case StepOutcome::MaxIterInfeasible: return "max_iter_infeasible";
  }
  return "unknown";
}

SwarmMeasurement measure_swarm(const ScenarioSpec& spec, const Vec& x, int step) {
  const int m = spec.agent_count();
  SwarmMeasurement mm;
  const Vec pos = stacked_positions(x, m);
  if (m >= 2) {
    WeightedLaplacian lap = build_laplacian(pos, spec.kernel, spec.edge_threshold);
    // gap_tol 0 keeps a repeated eigenvalue from aborting a diagnostic read.
    mm.lambda2 = fiedler(lap, 0.0).lambda2;
  } else {
    mm.lambda2 = kInf;  // a lone agent cannot disconnect
  }
  mm.min_pairwise_dist = kInf;
  for (int i = 0; i < m; ++i)
    for (int l = i + 1; l < m; ++l) {
      const double d = std::hypot(pos[2 * i] - pos[2 * l], pos[2 * i + 1] - pos[2 * l + 1]);
      mm.min_pairwise_dist = std::min(mm.min_pairwise_dist, d);
    }
  mm.min_obstacle_clearance = kInf;
  for (std::size_t o = 0; o < spec.obstacles.size(); ++o)
    for (int i = 0; i < m; ++i) {
      const double d = std::hypot(pos[2 * i] - spec.obstacles[o].x,
                                  pos[2 * i + 1] - spec.obstacles[o].y);
      mm.min_obstacle_clearance =
          std::min(mm.min_obstacle_clearance, d - spec.obstacle_keepout(static_cast<int>(o)));
    }
  mm.tracking_error.assign(m, kNan);
  mm.max_tracking_error = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!spec.agents[i].has_reference()) continue;
    double r[2];
    spec.agents[i].reference_at(step, r);
    mm.tracking_error[i] = std::hypot(pos[2 * i] - r[0], pos[2 * i + 1] - r[1]);
    mm.max_tracking_error = std::max(mm.max_tracking_error, mm.tracking_error[i]);
  }
  return mm;
}

Vec shifted_candidate(const NlpProblem& prev, const Vec& z_prev) {
  const DecisionLayout& lay = prev.layout();
  const int n = lay.horizon;
  Vec z = z_prev;  // xbar and ubar carry over
  for (int i = 0; i < lay.agents; ++i) {
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < DecisionLayout::nx; ++c)
        z[lay.x_index(i, j) + c] = z_prev[lay.x_index(i, j + 1) + c];
    for (int c = 0; c < DecisionLayout::nx; ++c)
      z[lay.x_index(i, n) + c] = z_prev[lay.xbar_index(i) + c];
    for (int j = 0; j + 1 < n; ++j)
      for (int c = 0; c < DecisionLayout::nu; ++c)
        z[lay.u_index(i, j) + c] = z_prev[lay.u_index(i, j + 1) + c];
    for (int c = 0; c < DecisionLayout::nu; ++c)
      z[lay.u_index(i, n - 1) + c] = z_prev[lay.ubar_index(i) + c];
  }
  return z;
}

SqpWarmStart shifted_multipliers(const NlpProblem& prev, const SqpResult& prev_result,
                                 const NlpProblem& next) {
  SqpWarmStart w;

  using EqKey = std::tuple<int, int, int, int>;
  std::map<EqKey, int> eq_at;
  const auto& pg = prev.g_rows();
  for (std::size_t i = 0; i < pg.size(); ++i)
    eq_at[{static_cast<int>(pg[i].kind), pg[i].agent, pg[i].stage, pg[i].comp}] =
        static_cast<int>(i);
  const auto& ng = next.g_rows();
  w.mu_eq.assign(ng.size(), 0.0);
  for (std::size_t i = 0; i < ng.size(); ++i) {
    const EqKey ahead{static_cast<int>(ng[i].kind), ng[i].agent, ng[i].stage + 1, ng[i].comp};
    const EqKey same{static_cast<int>(ng[i].kind), ng[i].agent, ng[i].stage, ng[i].comp};
    auto it = eq_at.find(ahead);
    if (it == eq_at.end()) it = eq_at.find(same);
    if (it != eq_at.end() && it->second < static_cast<int>(prev_result.mu_eq.size()))
      w.mu_eq[i] = prev_result.mu_eq[it->second];
  }

  using InKey = std::tuple<int, int, int, int, int>;
  std::map<InKey, int> in_at;
  const auto& ph = prev.h_rows();
  for (std::size_t i = 0; i < ph.size(); ++i)
    in_at[{static_cast<int>(ph[i].kind), ph[i].agent, ph[i].stage, ph[i].comp, ph[i].other}] =
        static_cast<int>(i);
  const auto& nh = next.h_rows();
  w.mu_in.assign(nh.size(), 0.0);
  for (std::size_t i = 0; i < nh.size(); ++i) {
    const InKey ahead{static_cast<int>(nh[i].kind), nh[i].agent, nh[i].stage + 1, nh[i].comp,
                      nh[i].other};
    const InKey same{static_cast<int>(nh[i].kind), nh[i].agent, nh[i].stage, nh[i].comp,
                     nh[i].other};
    auto it = in_at.find(ahead);
    if (it == in_at.end()) it = in_at.find(same);
    if (it != in_at.end() && it->second < static_cast<int>(prev_result.mu_in.size()))
      w.mu_in[i] = prev_result.mu_in[it->second];
  }

  // Spectral rows are one per stage 1..N in order; advance by one, keep tail.
  const int pc = static_cast<int>(prev_result.mu_conn.size());
  w.mu_conn.assign(next.num_conn(), 0.0);
  for (int j = 0; j < next.num_conn(); ++j)
    if (pc > 0) w.mu_conn[j] = prev_result.mu_conn[std::min(j + 1, pc - 1)];
  return w;
}

namespace {

StepOutcome classify(const SqpResult& res, double feasible_tol) {
  switch (res.status) {
    case SqpStatus::KktOptimal: return StepOutcome::KktOptimal;
    case SqpStatus::MaxIter:
      return res.violation <= feasible_tol ? StepOutcome::MaxIterFeasible
                                           : StepOutcome::MaxIterInfeasible;
    case SqpStatus::LineSearchFailure:
      return res.violation <= feasible_tol ? StepOutcome::StalledFeasible
                                           : StepOutcome::LineSearchFailure;
    case SqpStatus::QpFailure: return StepOutcome::QpFailure;
    case SqpStatus::Degenerate: return StepOutcome::Degenerate;
  }
  return StepOutcome::QpFailure;
}

}  // namespace

ClosedLoopTrace simulate(const ScenarioSpec& spec, const SimSettings& settings) {
  spec.validate();
  const int steps = settings.steps_override >= 0 ? settings.steps_override : spec.steps;
  const int m = spec.agent_count();
  const auto t_begin = std::chrono::steady_clock::now();

  ClosedLoopTrace out;
  out.rows.reserve(static_cast<std::size_t>(steps) + 1);

  std::vector<BicycleModel> models;
  models.reserve(m);
  for (int i = 0; i < m; ++i) models.emplace_back(spec.agents[i].params);

  Vec x(4 * m);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < 4; ++c) x[4 * i + c] = spec.agents[i].x0[c];

  std::optional<NlpProblem> prev;
  SqpResult prev_res;

  for (int k = 0; k < steps; ++k) {
    TraceRow row;
    row.k = k;
    row.states = x;
    row.inputs.assign(2 * m, 0.0);
    SwarmMeasurement mm = measure_swarm(spec, x, k);
    row.lambda2 = mm.lambda2;
    row.min_pairwise_dist = mm.min_pairwise_dist;
    row.min_obstacle_clearance = mm.min_obstacle_clearance;
    row.tracking_error = std::move(mm.tracking_error);
    row.max_tracking_error = mm.max_tracking_error;
    row.lambda2_estimate = kNan;
    row.qp_deviation = kNan;
    row.candidate_violation = kNan;

    bool ok = false;
    try {
      NlpProblem nlp(spec, x, k, settings.connectivity_on);
      Vec z0;
      SqpWarmStart warm;
      bool have_warm = false;
      if (prev) {
        z0 = shifted_candidate(*prev, prev_res.z);
        warm = shifted_multipliers(*prev, prev_res, nlp);
        have_warm = true;
      } else {
        z0 = nlp.hover_candidate();
      }
      row.candidate_violation = nlp.violation_inf(z0);

      const auto t0 = std::chrono::steady_clock::now();
      SqpResult res;
      if (settings.mode == SolveMode::Distributed) {
        NetworkSim net(nlp.initial_graph());
        ConsensusState cstate;  // shared by all subproblems of this step
        double deviation = 0.0;
        QpSolveFn splitting = [&](const QpProblem& qp, const QpSettings& qs,
                                  const QpSolution* warm_qp) {
          Partition part = partition(qp, nlp.layout(), nlp.initial_graph());
          DistributedSolution d = solve_distributed(part, net, settings.consensus, &cstate);
          if (settings.oracle_check) {
            QpSolution central = solve_qp(qp, qs, warm_qp);
            for (std::size_t i = 0; i < central.delta_z.size(); ++i)
              deviation = std::max(
                  deviation, std::fabs(d.qp.delta_z[i] - central.delta_z[i]));
          }
          return d.qp;
        };
        res = solve_sqp(nlp, z0, settings.sqp, have_warm ? &warm : nullptr, splitting);
        if (settings.oracle_check) row.qp_deviation = deviation;
        if (m >= 2) {
          try {
            SpectralEstimate est =
                distributed_fiedler(stacked_positions(x, m), spec.kernel, net,
                                    settings.fiedler_iters, spec.seed + static_cast<unsigned>(k),
                                    settings.fiedler_tol);
            row.lambda2_estimate = est.disconnected ? 0.0 : est.lambda2;
          } catch (const NotConverged&) {
            row.lambda2_estimate = kNan;
          }
        }
        row.messages = net.messages();
        row.bytes = net.bytes();
      } else {
        res = solve_sqp(nlp, z0, settings.sqp, have_warm ? &warm : nullptr);
      }
      row.solve_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.sqp_iterations = res.iterations;
      row.qp_iterations = 0;
      for (const SqpIterate& it : res.log) row.qp_iterations += it.qp_iterations;
      row.outcome = classify(res, settings.feasible_tol);
      ok = row.outcome == StepOutcome::KktOptimal ||
           row.outcome == StepOutcome::MaxIterFeasible ||
           row.outcome == StepOutcome::StalledFeasible;
      if (ok) {
        for (int i = 0; i < m; ++i)
          for (int c = 0; c < DecisionLayout::nu; ++c)
            row.inputs[2 * i + c] = clamp_box(res.z[nlp.layout().u_index(i, 0) + c],
                                              spec.input_box.lo[c], spec.input_box.hi[c]);
        prev.emplace(std::move(nlp));
        prev_res = std::move(res);
      }
    } catch (const DegenerateEigenvalue&) {
      row.outcome = StepOutcome::Degenerate;
    } catch (const std::runtime_error&) {
      row.outcome = StepOutcome::QpFailure;
    }

    out.rows.push_back(std::move(row));
    if (!ok) {
      out.failed = true;
      out.failed_step = k;
      break;
    }

    const Vec& u = out.rows.back().inputs;
    try {
      Vec x_next(4 * m);
      for (int i = 0; i < m; ++i) models[i].step(&x[4 * i], &u[2 * i], &x_next[4 * i]);
      x = std::move(x_next);
    } catch (const NonFiniteState&) {
      out.failed = true;
      out.failed_step = k;
      break;
    }
  }

  if (!out.failed) {
    TraceRow row;
    row.k = steps;
    row.states = x;
    row.inputs.assign(2 * m, 0.0);
    SwarmMeasurement mm = measure_swarm(spec, x, steps);
    row.lambda2 = mm.lambda2;
    row.min_pairwise_dist = mm.min_pairwise_dist;
    row.min_obstacle_clearance = mm.min_obstacle_clearance;
    row.tracking_error = std::move(mm.tracking_error);
    row.max_tracking_error = mm.max_tracking_error;
    row.outcome = StepOutcome::Terminal;
    row.candidate_violation = kNan;
    row.qp_deviation = kNan;
    row.lambda2_estimate = kNan;
    if (settings.mode == SolveMode::Distributed && m >= 2) {
      const Vec pos = stacked_positions(x, m);
      NetworkSim net(build_laplacian(pos, spec.kernel, spec.edge_threshold));
      try {
        SpectralEstimate est =
            distributed_fiedler(pos, spec.kernel, net, settings.fiedler_iters,
                                spec.seed + static_cast<unsigned>(steps), settings.fiedler_tol);
        row.lambda2_estimate = est.disconnected ? 0.0 : est.lambda2;
      } catch (const NotConverged&) {
        row.lambda2_estimate = kNan;
      }
      row.messages = net.messages();
      row.bytes = net.bytes();
    }
    out.rows.push_back(std::move(row));
  }

  out.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return out;
}

}  // namespace conmpc
