// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "conmpc/errors.hpp"
#include "conmpc/graph.hpp"
#include "conmpc/scenario_json.hpp"
#include "conmpc/sim.hpp"
#include "conmpc/trace_io.hpp"

namespace {

using namespace conmpc;

struct RunOptions {
  std::string scenario_path;
  std::string out_dir = ".";
  bool no_connectivity = false;
  bool distributed = false;
  bool oracle_check = false;
  bool plot = false;
  long long seed = -1;   // <0: keep the file's seed
  int steps = -1;        // <0: keep the file's step count
};

int cmd_run(const RunOptions& opt) {
  ScenarioSpec spec;
  try {
    spec = load_scenario_file(opt.scenario_path);
  } catch (const SchemaError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (opt.seed >= 0) spec.seed = static_cast<unsigned>(opt.seed);

  SimSettings settings;
  settings.mode = opt.distributed ? SolveMode::Distributed : SolveMode::Centralized;
  settings.connectivity_on = !opt.no_connectivity;
  settings.oracle_check = opt.oracle_check;
  settings.steps_override = opt.steps;

  const ClosedLoopTrace trace = simulate(spec, settings);

  const std::filesystem::path dir(opt.out_dir);
  const std::string csv_path = (dir / (spec.name + ".csv")).string();
  const std::string summary_path = (dir / (spec.name + "_summary.json")).string();
  write_text_file(csv_path, trace_csv(spec, trace));
  write_text_file(summary_path, summary_json(spec, trace, settings));
  std::vector<std::string> written = {csv_path, summary_path};
  if (opt.plot) {
    const std::string traj_path = (dir / (spec.name + "_trajectories.svg")).string();
    const std::string l2_path = (dir / (spec.name + "_lambda2.svg")).string();
    write_text_file(traj_path, trajectory_svg(spec, trace, {0, 15, 25, 40}));
    write_text_file(l2_path, lambda2_svg(spec, trace));
    written.push_back(traj_path);
    written.push_back(l2_path);
  }

  double min_l2 = std::numeric_limits<double>::infinity();
  double min_dist = std::numeric_limits<double>::infinity();
  for (const TraceRow& row : trace.rows) {
    min_l2 = std::min(min_l2, row.lambda2);
    min_dist = std::min(min_dist, row.min_pairwise_dist);
  }
  std::printf("scenario %s: %d agents, %zu rows, mode %s, connectivity %s\n",
              spec.name.c_str(), spec.agent_count(), trace.rows.size(),
              settings.mode == SolveMode::Distributed ? "distributed" : "centralized",
              settings.connectivity_on ? "on" : "off");
  std::printf("  min lambda2 %.6f  min pairwise dist %.6f  wall %.2fs\n", min_l2, min_dist,
              trace.total_seconds);
  if (!trace.rows.empty()) {
    std::printf("  final max tracking error %.6f\n", trace.rows.back().max_tracking_error);
  }
  for (const std::string& p : written) std::printf("  wrote %s\n", p.c_str());

  if (trace.failed) {
    const char* why = trace.rows.empty() ? "no rows" : to_string(trace.rows.back().outcome);
    std::fprintf(stderr, "solve failed at step %d (%s); trace truncated\n", trace.failed_step,
                 why);
    return 3;
  }
  return 0;
}

struct DerivOptions {
  int agents = 5;
  std::string kernel = "tanh";
  int trials = 100;
  long long seed = 1;
};

/// Positions drawn uniformly in a box sized so a swarm of this many agents is
/// usually connected, with a small minimum separation. Mirrors the sampling
/// used by the graph unit tests so both exercise the same distribution.
Vec sample_positions(std::mt19937_64& rng, int m, double comm_radius) {
  const double box = 0.45 * comm_radius * std::sqrt(static_cast<double>(m));
  const double min_sep = 0.35;
  std::uniform_real_distribution<double> d(-box, box);
  Vec p(2 * m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double x = d(rng);
      const double y = d(rng);
      bool ok = true;
      for (int j = 0; j < i; ++j) {
        if (std::hypot(x - p[2 * j], y - p[2 * j + 1]) < min_sep) {
          ok = false;
          break;
        }
      }
      if (ok) {
        p[2 * i] = x;
        p[2 * i + 1] = y;
        break;
      }
    }
  }
  return p;
}

int cmd_check_derivatives(const DerivOptions& opt) {
  WeightKernel kernel;
  kernel.type = opt.kernel == "gaussian" ? KernelType::Gaussian : KernelType::TanhCutoff;

  const double grad_tol = 1e-5, hess_tol = 1e-4, eigvec_tol = 1e-4;
  std::mt19937_64 seq(static_cast<unsigned long long>(opt.seed));
  int checked = 0, skipped = 0;
  double worst_grad = 0.0, worst_hess = 0.0, worst_eigvec = 0.0;
  bool breached = false;

  for (int t = 0; t < opt.trials; ++t) {
    // Every trial gets its own child seed so a breach is reproducible in
    // isolation from the position printout below.
    const unsigned long long child_seed = seq();
    std::mt19937_64 rng(child_seed);
    const Vec pos = sample_positions(rng, opt.agents, kernel.comm_radius);
    const int dim = 2 * opt.agents;

    auto lambda2_at = [&](const Vec& q) { return fiedler(build_laplacian(q, kernel)).lambda2; };

    double g_err = 0.0, h_err = 0.0, v_err = 0.0;
    try {
      const FiedlerData fd = fiedler(build_laplacian(pos, kernel));
      if (fd.lambda2 <= 1e-2 || fd.gap <= 1e-3 || fd.gap_low <= 1e-3) {
        std::printf("trial %3d seed %llu: skipped (near-degenerate spectrum: lambda2 %.3e, "
                    "gaps %.3e/%.3e)\n",
                    t, child_seed, fd.lambda2, fd.gap_low, fd.gap);
        ++skipped;
        continue;
      }

      const Vec g = grad_lambda2(pos, kernel, fd);
      Vec gfd(dim);
      for (int c = 0; c < dim; ++c) {
        Vec q = pos;
        const double h = 1e-6;
        q[c] = pos[c] + h;
        const double fp = lambda2_at(q);
        q[c] = pos[c] - h;
        const double fm = lambda2_at(q);
        gfd[c] = (fp - fm) / (2.0 * h);
      }
      double scale = 1e-9;
      for (double v : gfd) scale = std::max(scale, std::fabs(v));
      for (int c = 0; c < dim; ++c) g_err = std::max(g_err, std::fabs(g[c] - gfd[c]) / scale);

      const Mat hess = hess_lambda2(pos, kernel, fd);
      for (int c = 0; c < dim; ++c) {
        Vec q = pos;
        const double h = 1e-5;
        q[c] = pos[c] + h;
        const FiedlerData fp = fiedler(build_laplacian(q, kernel));
        const Vec gp = grad_lambda2(q, kernel, fp);
        q[c] = pos[c] - h;
        const FiedlerData fm = fiedler(build_laplacian(q, kernel));
        const Vec gm = grad_lambda2(q, kernel, fm);
        for (int r = 0; r < dim; ++r) {
          const double fdv = (gp[r] - gm[r]) / (2.0 * h);
          h_err = std::max(h_err, std::fabs(hess(r, c) - fdv) / std::max(1.0, std::fabs(fdv)));
        }
      }

      const Mat dv = grad_v2(pos, kernel, fd);
      for (int c = 0; c < dim; ++c) {
        Vec q = pos;
        const double h = 1e-6;
        q[c] = pos[c] + h;
        FiedlerData fp = fiedler(build_laplacian(q, kernel));
        q[c] = pos[c] - h;
        FiedlerData fm = fiedler(build_laplacian(q, kernel));
        // sign-align the perturbed eigenvectors to the base one
        double dp = 0.0, dm = 0.0;
        for (int i = 0; i < opt.agents; ++i) {
          dp += fp.v2[i] * fd.v2[i];
          dm += fm.v2[i] * fd.v2[i];
        }
        for (int i = 0; i < opt.agents; ++i) {
          const double vp = dp < 0 ? -fp.v2[i] : fp.v2[i];
          const double vm = dm < 0 ? -fm.v2[i] : fm.v2[i];
          const double fdv = (vp - vm) / (2.0 * h);
          v_err = std::max(v_err, std::fabs(dv(i, c) - fdv) / std::max(1.0, std::fabs(fdv)));
        }
      }
    } catch (const DegenerateEigenvalue& e) {
      std::printf("trial %3d seed %llu: skipped (%s)\n", t, child_seed, e.what());
      ++skipped;
      continue;
    }

    ++checked;
    worst_grad = std::max(worst_grad, g_err);
    worst_hess = std::max(worst_hess, h_err);
    worst_eigvec = std::max(worst_eigvec, v_err);
    if (g_err > grad_tol || h_err > hess_tol || v_err > eigvec_tol) {
      breached = true;
      std::printf("trial %3d seed %llu: BREACH grad %.3e hess %.3e eigvec %.3e (agents %d, "
                  "kernel %s)\n",
                  t, child_seed, g_err, h_err, v_err, opt.agents, opt.kernel.c_str());
      std::printf("  positions:");
      for (double v : pos) std::printf(" %.17g", v);
      std::printf("\n");
    }
  }

  std::printf("derivative check: %d trial%s checked, %d skipped (agents %d, kernel %s, seed "
              "%lld)\n",
              checked, checked == 1 ? "" : "s", skipped, opt.agents, opt.kernel.c_str(),
              opt.seed);
  if (checked > 0) {
    std::printf("  worst gradient rel err  %.3e (tol %.0e)\n", worst_grad, grad_tol);
    std::printf("  worst hessian rel err   %.3e (tol %.0e)\n", worst_hess, hess_tol);
    std::printf("  worst eigvec rel err    %.3e (tol %.0e)\n", worst_eigvec, eigvec_tol);
  }
  return breached ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-agent MPC with a spectral connectivity floor"};
  app.require_subcommand(1);

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "simulate a scenario file closed loop");
  run_cmd->add_option("scenario", run.scenario_path, "scenario JSON file")->required();
  run_cmd->add_flag("--no-connectivity", run.no_connectivity,
                    "drop the lambda2 floor from the constraint set");
  run_cmd->add_flag("--distributed", run.distributed,
                    "solve each QP by per-agent consensus over the communication graph");
  run_cmd->add_flag("--oracle-check", run.oracle_check,
                    "also solve each QP centrally and record the worst deviation");
  run_cmd->add_flag("--plot", run.plot, "write trajectory and lambda2 SVG plots");
  run_cmd->add_option("--out", run.out_dir, "output directory (default .)");
  run_cmd->add_option("--seed", run.seed, "override the scenario seed")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--steps", run.steps, "override the scenario step count")
      ->check(CLI::NonNegativeNumber);

  DerivOptions deriv;
  CLI::App* chk_cmd = app.add_subcommand(
      "check-derivatives", "compare connectivity derivatives against finite differences");
  chk_cmd->add_option("--agents", deriv.agents, "swarm size (default 5)")
      ->check(CLI::Range(2, 10000));
  chk_cmd->add_option("--kernel", deriv.kernel, "edge weight kernel (default tanh)")
      ->check(CLI::IsMember({"tanh", "gaussian"}));
  chk_cmd->add_option("--trials", deriv.trials, "number of random swarms (default 100)")
      ->check(CLI::NonNegativeNumber);
  chk_cmd->add_option("--seed", deriv.seed, "base RNG seed (default 1)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run);
    if (chk_cmd->parsed()) return cmd_check_derivatives(deriv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
