// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#pragma once

#include <string>

#include <json.hpp>

#include "conmpc/ocp.hpp"

namespace conmpc {

/// Build a ScenarioSpec from a parsed JSON document. Every key is checked:
/// unknown keys raise SchemaError rather than being ignored, so a typo in a
/// scenario file cannot silently fall back to a default.
ScenarioSpec scenario_from_json(const nlohmann::json& doc);

/// Serialize a spec to the same schema scenario_from_json accepts.
/// Unbounded box entries are written as null.
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

/// Parse a scenario from JSON text. Wraps parse errors in SchemaError.
ScenarioSpec scenario_from_text(const std::string& text);

/// Read and parse a scenario file, then run the load-time checks:
/// ScenarioSpec::validate() and the hover-candidate feasibility probe.
/// Throws SchemaError with a specific message on any failure.
ScenarioSpec load_scenario_file(const std::string& path);

/// Worst constraint violation of the hover candidate (all agents parked at
/// their initial states with zero input) for the first planning problem.
/// A shipped scenario must start feasible; this is the load-time probe.
double hover_candidate_violation(const ScenarioSpec& spec);

}  // namespace conmpc
