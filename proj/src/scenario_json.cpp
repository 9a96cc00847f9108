// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include "conmpc/scenario_json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "conmpc/graph.hpp"

namespace conmpc {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SchemaError("scenario schema: " + where + ": " + what);
}

/// Every object is consumed through this guard so a misspelled key is an
/// error, not a silently applied default.
void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) fail(where, "unknown key \"" + it.key() + "\"");
  }
}

const json& require(const json& obj, const std::string& where, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, "missing key \"" + key + "\"");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<std::int64_t>();
}

/// Fixed-length numeric array. Null entries become +/-inf when allow_null is
/// set (bound arrays); otherwise null is rejected.
Vec as_vec(const json& v, const std::string& where, std::size_t n, bool allow_null,
           double null_value) {
  if (!v.is_array() || v.size() != n) {
    fail(where, "expected an array of " + std::to_string(n) + " numbers");
  }
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& e = v[i];
    if (e.is_null()) {
      if (!allow_null) fail(where, "null is not allowed here");
      out[i] = null_value;
    } else {
      out[i] = as_number(e, where + "[" + std::to_string(i) + "]");
    }
  }
  return out;
}

BoxBounds parse_box(const json& v, const std::string& where, std::size_t dim) {
  if (!v.is_object()) fail(where, "expected an object with lo/hi arrays");
  reject_unknown_keys(v, where, {"lo", "hi"});
  BoxBounds box;
  const double inf = std::numeric_limits<double>::infinity();
  box.lo = as_vec(require(v, where, "lo"), where + ".lo", dim, true, -inf);
  box.hi = as_vec(require(v, where, "hi"), where + ".hi", dim, true, inf);
  return box;
}

WeightKernel parse_kernel(const json& v) {
  const std::string where = "kernel";
  if (!v.is_object()) fail(where, "expected an object");
  reject_unknown_keys(v, where, {"type", "comm_radius", "epsilon", "gain"});
  WeightKernel k;
  const json& tv = require(v, where, "type");
  if (!tv.is_string()) fail(where + ".type", "expected a string");
  const std::string type = tv.get<std::string>();
  if (type == "tanh") {
    k.type = KernelType::TanhCutoff;
  } else if (type == "gaussian") {
    k.type = KernelType::Gaussian;
  } else if (type == "dirac") {
    k.type = KernelType::DiracTest;
  } else {
    fail(where + ".type", "unknown kernel \"" + type + "\" (tanh, gaussian, dirac)");
  }
  if (auto it = v.find("comm_radius"); it != v.end())
    k.comm_radius = as_number(*it, where + ".comm_radius");
  if (auto it = v.find("epsilon"); it != v.end())
    k.epsilon = as_number(*it, where + ".epsilon");
  if (auto it = v.find("gain"); it != v.end()) k.gain = as_number(*it, where + ".gain");
  return k;
}

AgentSpec parse_agent(const json& v, std::size_t idx) {
  const std::string where = "agents[" + std::to_string(idx) + "]";
  if (!v.is_object()) fail(where, "expected an object");
  reject_unknown_keys(v, where, {"x0", "reference", "ts", "wheelbase"});
  AgentSpec a;
  a.x0 = as_vec(require(v, where, "x0"), where + ".x0", 4, false, 0.0);
  if (auto it = v.find("reference"); it != v.end()) {
    if (!it->is_array()) fail(where + ".reference", "expected an array of waypoints");
    for (std::size_t j = 0; j < it->size(); ++j) {
      const std::string wp = where + ".reference[" + std::to_string(j) + "]";
      const json& r = (*it)[j];
      if (!r.is_object()) fail(wp, "expected an object");
      reject_unknown_keys(r, wp, {"from_step", "x", "y"});
      ReferencePoint p;
      p.from_step = static_cast<int>(as_integer(require(r, wp, "from_step"), wp + ".from_step"));
      p.x = as_number(require(r, wp, "x"), wp + ".x");
      p.y = as_number(require(r, wp, "y"), wp + ".y");
      if (j > 0 && p.from_step <= a.reference.back().from_step) {
        fail(wp, "from_step must be strictly increasing");
      }
      a.reference.push_back(p);
    }
    if (!a.reference.empty() && a.reference.front().from_step != 0) {
      fail(where + ".reference", "first waypoint must have from_step 0");
    }
  }
  if (auto it = v.find("ts"); it != v.end()) a.params.ts = as_number(*it, where + ".ts");
  if (auto it = v.find("wheelbase"); it != v.end())
    a.params.wheelbase = as_number(*it, where + ".wheelbase");
  return a;
}

Obstacle parse_obstacle(const json& v, std::size_t idx) {
  const std::string where = "obstacles[" + std::to_string(idx) + "]";
  if (!v.is_object()) fail(where, "expected an object");
  reject_unknown_keys(v, where, {"x", "y", "radius"});
  Obstacle o;
  o.x = as_number(require(v, where, "x"), where + ".x");
  o.y = as_number(require(v, where, "y"), where + ".y");
  o.radius = as_number(require(v, where, "radius"), where + ".radius");
  return o;
}

json box_to_json(const BoxBounds& box) {
  json lo = json::array();
  json hi = json::array();
  for (double v : box.lo) lo.push_back(std::isinf(v) ? json() : json(v));
  for (double v : box.hi) hi.push_back(std::isinf(v) ? json() : json(v));
  return json{{"lo", lo}, {"hi", hi}};
}

}  // namespace

ScenarioSpec scenario_from_json(const json& doc) {
  const std::string where = "scenario";
  if (!doc.is_object()) fail(where, "top level must be an object");
  reject_unknown_keys(doc, where,
                      {"name", "horizon", "steps", "seed", "kernel", "edge_threshold",
                       "lambda_min", "collision_radius", "costs", "state_box",
                       "input_box", "agents", "obstacles"});
  ScenarioSpec s;
  const json& name = require(doc, where, "name");
  if (!name.is_string()) fail(where + ".name", "expected a string");
  s.name = name.get<std::string>();
  s.horizon = static_cast<int>(as_integer(require(doc, where, "horizon"), where + ".horizon"));
  s.steps = static_cast<int>(as_integer(require(doc, where, "steps"), where + ".steps"));
  const std::int64_t seed = as_integer(require(doc, where, "seed"), where + ".seed");
  if (seed < 0) fail(where + ".seed", "seed must be non-negative");
  s.seed = static_cast<unsigned>(seed);
  s.kernel = parse_kernel(require(doc, where, "kernel"));
  if (auto it = doc.find("edge_threshold"); it != doc.end())
    s.edge_threshold = as_number(*it, where + ".edge_threshold");
  s.lambda_min = as_number(require(doc, where, "lambda_min"), where + ".lambda_min");
  s.collision_radius =
      as_number(require(doc, where, "collision_radius"), where + ".collision_radius");

  const json& costs = require(doc, where, "costs");
  if (!costs.is_object()) fail(where + ".costs", "expected an object");
  reject_unknown_keys(costs, where + ".costs", {"q", "r", "q2"});
  s.q_diag = as_vec(require(costs, where + ".costs", "q"), where + ".costs.q", 4, false, 0.0);
  s.r_diag = as_vec(require(costs, where + ".costs", "r"), where + ".costs.r", 2, false, 0.0);
  s.q2_diag = as_vec(require(costs, where + ".costs", "q2"), where + ".costs.q2", 2, false, 0.0);

  s.state_box = parse_box(require(doc, where, "state_box"), where + ".state_box", 4);
  s.input_box = parse_box(require(doc, where, "input_box"), where + ".input_box", 2);

  const json& agents = require(doc, where, "agents");
  if (!agents.is_array() || agents.empty()) fail(where + ".agents", "expected a non-empty array");
  for (std::size_t i = 0; i < agents.size(); ++i) s.agents.push_back(parse_agent(agents[i], i));

  if (auto it = doc.find("obstacles"); it != doc.end()) {
    if (!it->is_array()) fail(where + ".obstacles", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) s.obstacles.push_back(parse_obstacle((*it)[i], i));
  }
  return s;
}

json scenario_to_json(const ScenarioSpec& s) {
  json kernel;
  switch (s.kernel.type) {
    case KernelType::TanhCutoff: kernel["type"] = "tanh"; break;
    case KernelType::Gaussian: kernel["type"] = "gaussian"; break;
    case KernelType::DiracTest: kernel["type"] = "dirac"; break;
  }
  kernel["comm_radius"] = s.kernel.comm_radius;
  kernel["epsilon"] = s.kernel.epsilon;
  kernel["gain"] = s.kernel.gain;

  json agents = json::array();
  for (const AgentSpec& a : s.agents) {
    json ja;
    ja["x0"] = json(a.x0);
    if (!a.reference.empty()) {
      json ref = json::array();
      for (const ReferencePoint& p : a.reference) {
        ref.push_back(json{{"from_step", p.from_step}, {"x", p.x}, {"y", p.y}});
      }
      ja["reference"] = ref;
    }
    ja["ts"] = a.params.ts;
    ja["wheelbase"] = a.params.wheelbase;
    agents.push_back(ja);
  }

  json obstacles = json::array();
  for (const Obstacle& o : s.obstacles) {
    obstacles.push_back(json{{"x", o.x}, {"y", o.y}, {"radius", o.radius}});
  }

  return json{{"name", s.name},
              {"horizon", s.horizon},
              {"steps", s.steps},
              {"seed", s.seed},
              {"kernel", kernel},
              {"edge_threshold", s.edge_threshold},
              {"lambda_min", s.lambda_min},
              {"collision_radius", s.collision_radius},
              {"costs", json{{"q", json(s.q_diag)}, {"r", json(s.r_diag)}, {"q2", json(s.q2_diag)}}},
              {"state_box", box_to_json(s.state_box)},
              {"input_box", box_to_json(s.input_box)},
              {"agents", agents},
              {"obstacles", obstacles}};
}

ScenarioSpec scenario_from_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scenario schema: invalid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

double hover_candidate_violation(const ScenarioSpec& spec) {
  Vec x_now;
  for (const AgentSpec& a : spec.agents) x_now.insert(x_now.end(), a.x0.begin(), a.x0.end());
  NlpProblem nlp(spec, x_now, 0, true);
  return nlp.violation_inf(nlp.hover_candidate());
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("scenario schema: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioSpec spec = scenario_from_text(buf.str());
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw SchemaError("scenario schema: " + std::string(e.what()));
  }
  double viol = 0.0;
  try {
    viol = hover_candidate_violation(spec);
  } catch (const std::exception& e) {
    throw SchemaError("scenario load check: initial configuration rejected: " +
                      std::string(e.what()));
  }
  if (viol > 1e-6) {
    std::ostringstream msg;
    msg << "scenario load check: hover candidate infeasible, worst violation " << viol;
    throw SchemaError(msg.str());
  }
  return spec;
}

}  // namespace conmpc
