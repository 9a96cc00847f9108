// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include "conmpc/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "conmpc/graph.hpp"

namespace conmpc {
namespace {

void put_g17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

std::string g2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Ten visually distinct strokes; agents beyond ten wrap around.
const char* agent_color(int i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
                                  "#7f7f7f", "#bcbd22"};
  return palette[i % 10];
}

struct WorldMap {
  double xmin, ymin, scale, height, pad;
  double sx(double x) const { return pad + (x - xmin) * scale; }
  double sy(double y) const { return height - pad - (y - ymin) * scale; }
};

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

}  // namespace

std::string trace_csv(const ScenarioSpec& spec, const ClosedLoopTrace& trace) {
  const int m = spec.agent_count();
  std::string out = "k";
  for (int i = 0; i < m; ++i) {
    const std::string s = std::to_string(i);
    out += ",px" + s + ",py" + s + ",theta" + s + ",gamma" + s + ",v" + s + ",delta" + s;
  }
  out += ",lambda2,min_dist,min_clearance,max_track_err,sqp_iters,status\n";
  for (const TraceRow& row : trace.rows) {
    out += std::to_string(row.k);
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < 4; ++c) {
        out += ',';
        put_g17(out, row.states[4 * i + c]);
      }
      for (int c = 0; c < 2; ++c) {
        out += ',';
        put_g17(out, row.inputs[2 * i + c]);
      }
    }
    out += ',';
    put_g17(out, row.lambda2);
    out += ',';
    put_g17(out, row.min_pairwise_dist);
    out += ',';
    put_g17(out, row.min_obstacle_clearance);
    out += ',';
    put_g17(out, row.max_tracking_error);
    out += ',' + std::to_string(row.sqp_iterations);
    out += ',';
    out += to_string(row.outcome);
    out += '\n';
  }
  return out;
}

std::string summary_json(const ScenarioSpec& spec, const ClosedLoopTrace& trace,
                         const SimSettings& settings) {
  using nlohmann::json;
  json j;
  j["scenario"] = spec.name;
  j["mode"] = settings.mode == SolveMode::Distributed ? "distributed" : "centralized";
  j["connectivity_constraint"] = settings.connectivity_on;
  j["steps_requested"] =
      settings.steps_override >= 0 ? settings.steps_override : spec.steps;
  j["steps_completed"] = trace.failed ? trace.failed_step
                                      : static_cast<int>(trace.rows.size()) - 1;
  j["failed"] = trace.failed;
  if (trace.failed) j["failed_step"] = trace.failed_step;

  double min_l2 = std::numeric_limits<double>::infinity();
  double min_dist = std::numeric_limits<double>::infinity();
  double min_clear = std::numeric_limits<double>::infinity();
  long long sqp_total = 0, qp_total = 0, msg_total = 0, byte_total = 0;
  double max_dev = 0.0, max_fiedler_err = 0.0;
  bool any_dev = false, any_est = false;
  for (const TraceRow& row : trace.rows) {
    min_l2 = std::min(min_l2, row.lambda2);
    min_dist = std::min(min_dist, row.min_pairwise_dist);
    min_clear = std::min(min_clear, row.min_obstacle_clearance);
    sqp_total += row.sqp_iterations;
    qp_total += row.qp_iterations;
    msg_total += row.messages;
    byte_total += row.bytes;
    if (std::isfinite(row.qp_deviation)) {
      any_dev = true;
      max_dev = std::max(max_dev, row.qp_deviation);
    }
    if (std::isfinite(row.lambda2_estimate) && std::isfinite(row.lambda2)) {
      any_est = true;
      max_fiedler_err = std::max(max_fiedler_err, std::abs(row.lambda2_estimate - row.lambda2));
    }
  }
  j["min_lambda2"] = finite_or(min_l2, -1.0);
  j["min_pairwise_distance"] = finite_or(min_dist, -1.0);
  j["min_obstacle_clearance"] = finite_or(min_clear, -1.0);
  j["total_sqp_iterations"] = sqp_total;
  j["total_qp_iterations"] = qp_total;
  j["wall_seconds"] = trace.total_seconds;

  if (!trace.rows.empty()) {
    const TraceRow& last = trace.rows.back();
    j["final_tracking_errors"] = json(last.tracking_error);
    j["final_max_tracking_error"] = last.max_tracking_error;
    j["final_lambda2"] = finite_or(last.lambda2, -1.0);
  }
  if (settings.mode == SolveMode::Distributed) {
    j["total_messages"] = msg_total;
    j["total_bytes"] = byte_total;
    if (any_est) j["max_decentralized_lambda2_error"] = max_fiedler_err;
    if (any_dev) j["max_qp_deviation"] = max_dev;
  }
  return j.dump(2) + "\n";
}

std::string trajectory_svg(const ScenarioSpec& spec, const ClosedLoopTrace& trace,
                           const std::vector<int>& snapshot_steps) {
  const int m = spec.agent_count();
  const double inf = std::numeric_limits<double>::infinity();
  double xmin = inf, xmax = -inf, ymin = inf, ymax = -inf;
  auto grow = [&](double x, double y, double r) {
    xmin = std::min(xmin, x - r);
    xmax = std::max(xmax, x + r);
    ymin = std::min(ymin, y - r);
    ymax = std::max(ymax, y + r);
  };
  for (const TraceRow& row : trace.rows) {
    for (int i = 0; i < m; ++i) grow(row.states[4 * i], row.states[4 * i + 1], 0.0);
  }
  for (const Obstacle& o : spec.obstacles)
    grow(o.x, o.y, o.radius + 0.5 * spec.collision_radius);
  for (const AgentSpec& a : spec.agents) {
    for (const ReferencePoint& p : a.reference) grow(p.x, p.y, 0.0);
  }
  if (!(xmax > xmin)) { xmin = -1.0; xmax = 1.0; }
  if (!(ymax > ymin)) { ymin = -1.0; ymax = 1.0; }
  xmin -= 1.0; xmax += 1.0; ymin -= 1.0; ymax += 1.0;

  const double pad = 30.0, wmax = 900.0, hmax = 700.0;
  const double scale = std::min((wmax - 2 * pad) / (xmax - xmin),
                                (hmax - 2 * pad) / (ymax - ymin));
  const double width = (xmax - xmin) * scale + 2 * pad;
  const double height = (ymax - ymin) * scale + 2 * pad;
  const WorldMap wm{xmin, ymin, scale, height, pad};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + g2(width) + "\" height=\"" +
       g2(height) + "\" viewBox=\"0 0 " + g2(width) + " " + g2(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Light metric grid every 2 m with coordinate labels along the frame.
  s += "<g stroke=\"#e0e0e0\" stroke-width=\"1\" font-size=\"10\" fill=\"#909090\">\n";
  for (double gx = std::ceil(xmin / 2.0) * 2.0; gx <= xmax; gx += 2.0) {
    s += "<line x1=\"" + g2(wm.sx(gx)) + "\" y1=\"" + g2(wm.sy(ymin)) + "\" x2=\"" +
         g2(wm.sx(gx)) + "\" y2=\"" + g2(wm.sy(ymax)) + "\"/>\n";
    s += "<text x=\"" + g2(wm.sx(gx) - 6) + "\" y=\"" + g2(wm.sy(ymin) + 14) +
         "\" stroke=\"none\">" + g2(gx) + "</text>\n";
  }
  for (double gy = std::ceil(ymin / 2.0) * 2.0; gy <= ymax; gy += 2.0) {
    s += "<line x1=\"" + g2(wm.sx(xmin)) + "\" y1=\"" + g2(wm.sy(gy)) + "\" x2=\"" +
         g2(wm.sx(xmax)) + "\" y2=\"" + g2(wm.sy(gy)) + "\"/>\n";
    s += "<text x=\"" + g2(wm.sx(xmin) - 26) + "\" y=\"" + g2(wm.sy(gy) + 4) +
         "\" stroke=\"none\">" + g2(gy) + "</text>\n";
  }
  s += "</g>\n";

  for (const Obstacle& o : spec.obstacles) {
    s += "<circle cx=\"" + g2(wm.sx(o.x)) + "\" cy=\"" + g2(wm.sy(o.y)) + "\" r=\"" +
         g2((o.radius + 0.5 * spec.collision_radius) * scale) +
         "\" fill=\"none\" stroke=\"#c06060\" stroke-dasharray=\"5,4\"/>\n";
    s += "<circle cx=\"" + g2(wm.sx(o.x)) + "\" cy=\"" + g2(wm.sy(o.y)) + "\" r=\"" +
         g2(o.radius * scale) + "\" fill=\"#d9d9d9\" stroke=\"#707070\"/>\n";
  }

  // Reference marks: one x per distinct waypoint.
  for (int i = 0; i < m; ++i) {
    for (const ReferencePoint& p : spec.agents[i].reference) {
      const double cx = wm.sx(p.x), cy = wm.sy(p.y);
      s += "<path d=\"M" + g2(cx - 5) + " " + g2(cy - 5) + " L" + g2(cx + 5) + " " +
           g2(cy + 5) + " M" + g2(cx - 5) + " " + g2(cy + 5) + " L" + g2(cx + 5) + " " +
           g2(cy - 5) + "\" stroke=\"" + agent_color(i) + "\" stroke-width=\"1.5\"/>\n";
    }
  }

  // Communication graph at the requested snapshots.
  std::set<int> snaps;
  const int last = static_cast<int>(trace.rows.size()) - 1;
  for (int k : snapshot_steps) {
    if (last >= 0) snaps.insert(std::clamp(k, 0, last));
  }
  for (int k : snaps) {
    const TraceRow& row = trace.rows[k];
    s += "<g stroke=\"#b0c4de\" stroke-width=\"1\">\n";
    for (int i = 0; i < m; ++i) {
      for (int jx = i + 1; jx < m; ++jx) {
        const double w = weight(spec.kernel, &row.states[4 * i], &row.states[4 * jx]);
        if (w < spec.edge_threshold) continue;
        s += "<line x1=\"" + g2(wm.sx(row.states[4 * i])) + "\" y1=\"" +
             g2(wm.sy(row.states[4 * i + 1])) + "\" x2=\"" + g2(wm.sx(row.states[4 * jx])) +
             "\" y2=\"" + g2(wm.sy(row.states[4 * jx + 1])) + "\"/>\n";
      }
    }
    s += "</g>\n";
    for (int i = 0; i < m; ++i) {
      s += "<circle cx=\"" + g2(wm.sx(row.states[4 * i])) + "\" cy=\"" +
           g2(wm.sy(row.states[4 * i + 1])) + "\" r=\"3\" fill=\"" + agent_color(i) +
           "\"/>\n";
    }
    if (m > 0) {
      s += "<text x=\"" + g2(wm.sx(row.states[0]) + 6) + "\" y=\"" +
           g2(wm.sy(row.states[1]) - 6) + "\" font-size=\"10\" fill=\"#505050\">k=" +
           std::to_string(row.k) + "</text>\n";
    }
  }

  for (int i = 0; i < m; ++i) {
    std::string pts;
    for (const TraceRow& row : trace.rows) {
      pts += g2(wm.sx(row.states[4 * i])) + "," + g2(wm.sy(row.states[4 * i + 1])) + " ";
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + agent_color(i) +
         "\" stroke-width=\"1.5\" opacity=\"0.85\"/>\n";
  }

  s += "<text x=\"" + g2(pad) + "\" y=\"18\" font-size=\"13\" fill=\"#303030\">" +
       spec.name + ": trajectories, obstacles, communication graph</text>\n";
  s += "</svg>\n";
  return s;
}

std::string lambda2_svg(const ScenarioSpec& spec, const ClosedLoopTrace& trace) {
  const double width = 820.0, height = 420.0, padl = 60.0, padr = 20.0, padt = 30.0,
               padb = 40.0;
  double ymax = spec.lambda_min;
  bool any_estimate = false;
  for (const TraceRow& row : trace.rows) {
    if (std::isfinite(row.lambda2)) ymax = std::max(ymax, row.lambda2);
    if (std::isfinite(row.lambda2_estimate)) any_estimate = true;
  }
  ymax *= 1.08;
  const int n = static_cast<int>(trace.rows.size());
  const int kmax = n > 1 ? trace.rows.back().k : 1;
  auto px = [&](double k) { return padl + k / kmax * (width - padl - padr); };
  auto py = [&](double v) { return height - padb - v / ymax * (height - padt - padb); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + g2(width) + "\" height=\"" +
       g2(height) + "\" viewBox=\"0 0 " + g2(width) + " " + g2(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  s += "<g stroke=\"#e0e0e0\" font-size=\"10\" fill=\"#707070\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = ymax * t / 5.0;
    s += "<line x1=\"" + g2(padl) + "\" y1=\"" + g2(py(v)) + "\" x2=\"" + g2(width - padr) +
         "\" y2=\"" + g2(py(v)) + "\"/>\n";
    s += "<text x=\"" + g2(padl - 36) + "\" y=\"" + g2(py(v) + 4) + "\" stroke=\"none\">" +
         g2(v) + "</text>\n";
  }
  const int kstep = std::max(1, kmax / 10);
  for (int k = 0; k <= kmax; k += kstep) {
    s += "<text x=\"" + g2(px(k) - 6) + "\" y=\"" + g2(height - padb + 16) +
         "\" stroke=\"none\">" + std::to_string(k) + "</text>\n";
  }
  s += "</g>\n";

  s += "<line x1=\"" + g2(padl) + "\" y1=\"" + g2(py(spec.lambda_min)) + "\" x2=\"" +
       g2(width - padr) + "\" y2=\"" + g2(py(spec.lambda_min)) +
       "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
  s += "<text x=\"" + g2(width - padr - 130) + "\" y=\"" + g2(py(spec.lambda_min) - 6) +
       "\" font-size=\"11\" fill=\"#d62728\">floor " + g2(spec.lambda_min) + "</text>\n";

  std::string pts;
  for (const TraceRow& row : trace.rows) {
    if (!std::isfinite(row.lambda2)) continue;
    pts += g2(px(row.k)) + "," + g2(py(std::min(row.lambda2, ymax))) + " ";
  }
  s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.8\"/>\n";

  if (any_estimate) {
    std::string ep;
    for (const TraceRow& row : trace.rows) {
      if (!std::isfinite(row.lambda2_estimate)) continue;
      ep += g2(px(row.k)) + "," + g2(py(std::min(row.lambda2_estimate, ymax))) + " ";
    }
    s += "<polyline points=\"" + ep +
         "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.2\" stroke-dasharray=\"3,3\"/>\n";
    s += "<text x=\"" + g2(padl + 8) + "\" y=\"" + g2(padt + 26) +
         "\" font-size=\"11\" fill=\"#2ca02c\">decentralized estimate</text>\n";
  }

  s += "<text x=\"" + g2(padl) + "\" y=\"18\" font-size=\"13\" fill=\"#303030\">" + spec.name +
       ": algebraic connectivity over the run</text>\n";
  s += "<text x=\"" + g2(width / 2) + "\" y=\"" + g2(height - 8) +
       "\" font-size=\"11\" fill=\"#505050\">step k</text>\n";
  s += "</svg>\n";
  return s;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace conmpc
