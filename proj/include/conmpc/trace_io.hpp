// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#pragma once

#include <string>
#include <vector>

#include "conmpc/ocp.hpp"
#include "conmpc/sim.hpp"

namespace conmpc {

/// Closed-loop trace as CSV text. Columns: k, then px/py/theta/gamma/v/delta
/// per agent, then lambda2, min_dist, min_clearance, max_track_err,
/// sqp_iters, status. Values print with %.17g so a rerun of the same
/// scenario, seed, and mode produces byte-identical output.
std::string trace_csv(const ScenarioSpec& spec, const ClosedLoopTrace& trace);

/// Run summary as pretty-printed JSON: final tracking errors, worst-case
/// lambda2 / pairwise distance / obstacle clearance over the run, iteration
/// totals, and wall time. Distributed runs add message totals, the worst
/// decentralized eigenvalue error, and (when the oracle cross-check ran) the
/// largest step deviation from the centralized solver.
std::string summary_json(const ScenarioSpec& spec, const ClosedLoopTrace& trace,
                         const SimSettings& settings);

/// Top-down SVG of the run: obstacle bodies with their keep-out rings, one
/// polyline per agent, reference marks, and the communication graph drawn at
/// each requested snapshot step (clamped to the available rows).
std::string trajectory_svg(const ScenarioSpec& spec, const ClosedLoopTrace& trace,
                           const std::vector<int>& snapshot_steps);

/// SVG of lambda2 against the step index with the floor drawn as a dashed
/// line. Distributed traces overlay the decentralized estimate.
std::string lambda2_svg(const ScenarioSpec& spec, const ClosedLoopTrace& trace);

/// Write text to a file, creating parent directories. Throws
/// std::runtime_error when the path cannot be opened.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace conmpc
