// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <vector>

#include "conmpc/distributed.hpp"
#include "conmpc/ocp.hpp"
#include "conmpc/sqp.hpp"

namespace conmpc {

/// Per-step verdict recorded in the trace.
enum class StepOutcome {
  KktOptimal,         // solver reached stationarity
  MaxIterFeasible,    // iteration budget spent, candidate feasible
  StalledFeasible,    // merit line search stalled on a feasible candidate
  Terminal,           // trailing row, no solve performed
  LineSearchFailure,  // merit line search stalled while still infeasible
  QpFailure,          // subproblem infeasible or the splitting solver gave up
  Degenerate,         // repeated Fiedler eigenvalue blocked the derivatives
  MaxIterInfeasible,  // iteration budget spent with violated constraints
};

const char* to_string(StepOutcome o);

/// Swarm health at one measured state.
struct SwarmMeasurement {
  double lambda2 = 0.0;
  double min_pairwise_dist = 0.0;      // +inf for a single agent
  double min_obstacle_clearance = 0.0; // distance minus keep-out; +inf if no obstacles
  Vec tracking_error;                  // per agent; NaN without a reference
  double max_tracking_error = 0.0;     // 0 when nobody tracks
};

SwarmMeasurement measure_swarm(const ScenarioSpec& spec, const Vec& x, int step);

/// One closed-loop step. states holds the measured state the solve saw;
/// inputs holds what was applied afterwards (zeros when nothing was).
struct TraceRow {
  int k = 0;
  Vec states;  // 4 per agent
  Vec inputs;  // 2 per agent
  double lambda2 = 0.0;
  double min_pairwise_dist = 0.0;
  double min_obstacle_clearance = 0.0;
  Vec tracking_error;
  double max_tracking_error = 0.0;
  StepOutcome outcome = StepOutcome::Terminal;
  int sqp_iterations = 0;
  int qp_iterations = 0;        // summed over outer iterations
  double solve_seconds = 0.0;
  double candidate_violation = 0.0;  // warm-start quality before the solve
  long long messages = 0;       // network traffic (distributed mode)
  long long bytes = 0;
  double lambda2_estimate = 0.0;  // decentralized power-iteration value; NaN centrally
  double qp_deviation = 0.0;      // max |dz_dist - dz_central| this step; NaN unless checked
};

struct ClosedLoopTrace {
  std::vector<TraceRow> rows;  // steps + 1 rows on success, truncated on failure
  bool failed = false;
  int failed_step = -1;
  double total_seconds = 0.0;
};

enum class SolveMode { Centralized, Distributed };

struct SimSettings {
  SolveMode mode = SolveMode::Centralized;
  bool connectivity_on = true;
  bool oracle_check = false;  // distributed mode: also solve each QP centrally and diff
  int steps_override = -1;    // <0: use the scenario's step count
  double feasible_tol = 1e-6; // accept a MaxIter exit when violation stays below this
  int fiedler_iters = 5000;
  double fiedler_tol = 1e-6;
  SqpSettings sqp;
  ConsensusSettings consensus;
};

/// Warm start for the next step: every stage advances by one, the steady-state
/// pair fills the vacated tail slots, and (xbar, ubar) carry over.
Vec shifted_candidate(const NlpProblem& prev, const Vec& z_prev);

/// Multipliers follow their constraint descriptors: a row at stage j takes the
/// previous solution's value at stage j+1, keeps its own stage when that row
/// does not exist, and starts at zero when neither does.
SqpWarmStart shifted_multipliers(const NlpProblem& prev, const SqpResult& prev_result,
                                 const NlpProblem& next);

/// Receding-horizon closed loop: solve, apply the first input through the
/// plant model, shift, repeat. Stops early when a step's outcome is not
/// accepted; the offending row is kept and failed/failed_step are set.
ClosedLoopTrace simulate(const ScenarioSpec& spec, const SimSettings& settings);

}  // namespace conmpc
