// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#include "conmpc/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "conmpc/errors.hpp"

namespace conmpc {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Eval {
  double f = 0.0;
  Vec grad, g, h, conn;
  Csr jg, jh, jconn;
};

Eval evaluate(const NlpModel& nlp, const Vec& z) {
  Eval e;
  e.grad.assign(nlp.dim(), 0.0);
  e.f = nlp.cost(z, &e.grad);
  e.g.assign(nlp.num_eq(), 0.0);
  e.h.assign(nlp.num_ineq(), 0.0);
  e.conn.assign(nlp.num_conn(), 0.0);
  nlp.constraints(z, &e.g, &e.h, &e.conn);
  nlp.jacobians(z, &e.jg, &e.jh, &e.jconn);
  return e;
}

double l1_violation(const Eval& e) {
  double v = 0.0;
  for (double gi : e.g) v += std::fabs(gi);
  for (double hi : e.h) v += std::max(hi, 0.0);
  for (double ci : e.conn) v += std::max(ci, 0.0);
  return v;
}

double kkt_residual(const NlpModel& nlp, const Eval& e, const Vec& mu_eq,
                    const Vec& mu_in, const Vec& mu_conn) {
  Vec stat = e.grad;
  e.jg.transposed().matvec_add(mu_eq.data(), stat.data());
  e.jh.transposed().matvec_add(mu_in.data(), stat.data());
  if (nlp.num_conn() > 0) e.jconn.transposed().matvec_add(mu_conn.data(), stat.data());
  double r = norm_inf(stat);
  for (double gi : e.g) r = std::max(r, std::fabs(gi));
  for (std::size_t i = 0; i < e.h.size(); ++i) {
    r = std::max(r, std::max(e.h[i], 0.0));
    r = std::max(r, std::fabs(mu_in[i] * e.h[i]));
  }
  for (std::size_t i = 0; i < e.conn.size(); ++i) {
    r = std::max(r, std::max(e.conn[i], 0.0));
    r = std::max(r, std::fabs(mu_conn[i] * e.conn[i]));
  }
  return r;
}

/// Inequality rows and connectivity rows share one block in the subproblem;
/// connectivity rows are appended after the plain rows.
Csr stack_rows(const Csr& a, const Csr& b, int cols) {
  std::vector<Csr::Triplet> t;
  t.reserve(a.nnz() + b.nnz());
  for (int i = 0; i < a.rows; ++i)
    for (int k = a.indptr[i]; k < a.indptr[i + 1]; ++k)
      t.push_back({i, a.indices[k], a.data[k]});
  for (int i = 0; i < b.rows; ++i)
    for (int k = b.indptr[i]; k < b.indptr[i + 1]; ++k)
      t.push_back({a.rows + i, b.indices[k], b.data[k]});
  return Csr::from_triplets(a.rows + b.rows, cols, std::move(t));
}

}  // namespace

Mat regularize_hessian(const Mat& h, double eps, bool* clamped) {
  if (clamped) *clamped = false;
  // Factorization probe: h - 0.999*eps*I positive definite means every
  // eigenvalue clears the floor. The 0.1% slack keeps matrices assembled to
  // sit exactly at the floor from bouncing into the eigendecomposition.
  Cholesky probe;
  if (probe.factor(h, -0.999 * eps)) return h;
  if (clamped) *clamped = true;
  return eig_clamp(h, eps);
}

SqpResult solve_sqp(const NlpModel& nlp, const Vec& z0, const SqpSettings& st,
                    const SqpWarmStart* warm, QpSolveFn qp_solver) {
  if (!qp_solver)
    qp_solver = [](const QpProblem& qp, const QpSettings& qs, const QpSolution* w) {
      return solve_qp(qp, qs, w);
    };

  const int nh = nlp.num_ineq();
  const int nc = nlp.num_conn();

  SqpResult out;
  out.z = z0;
  out.mu_eq.assign(nlp.num_eq(), 0.0);
  out.mu_in.assign(nh, 0.0);
  out.mu_conn.assign(nc, 0.0);
  if (warm) {
    if (static_cast<int>(warm->mu_eq.size()) == nlp.num_eq()) out.mu_eq = warm->mu_eq;
    if (static_cast<int>(warm->mu_in.size()) == nh) out.mu_in = warm->mu_in;
    if (static_cast<int>(warm->mu_conn.size()) == nc) out.mu_conn = warm->mu_conn;
  }

  double rho = st.penalty_margin;
  QpSolution qp_prev;
  bool have_qp_prev = false;

  // Fallback for budget exhaustion: the cleanest iterate seen, where
  // violations at or below the optimality tolerance count as equally clean
  // and the objective breaks the tie. Comparing raw violations instead would
  // let a perfectly feasible but expensive candidate (a hover plan, say)
  // shadow a converged iterate whose residual is merely rounding-level.
  Vec z_best = out.z;
  Vec mu_eq_best = out.mu_eq, mu_in_best = out.mu_in, mu_conn_best = out.mu_conn;
  double viol_best = std::numeric_limits<double>::infinity();
  double cost_best = std::numeric_limits<double>::infinity();
  const auto viol_key = [&st](double v) { return v <= st.kkt_tol ? 0.0 : v; };
  const auto cleaner = [&viol_key](double viol_a, double cost_a, double viol_b,
                                   double cost_b) {
    if (viol_key(viol_a) != viol_key(viol_b)) return viol_key(viol_a) < viol_key(viol_b);
    return cost_a < cost_b;
  };

  for (int iter = 1; iter <= st.max_outer; ++iter) {
    Eval e;
    try {
      e = evaluate(nlp, out.z);
    } catch (const DegenerateEigenvalue& ex) {
      out.status = SqpStatus::Degenerate;
      out.degenerate_stage = ex.stage;
      return out;
    }

    out.kkt = kkt_residual(nlp, e, out.mu_eq, out.mu_in, out.mu_conn);
    out.violation = nlp.violation_inf(out.z);
    out.iterations = iter - 1;
    if (iter == 1 || cleaner(out.violation, e.f, viol_best, cost_best)) {
      z_best = out.z;
      mu_eq_best = out.mu_eq;
      mu_in_best = out.mu_in;
      mu_conn_best = out.mu_conn;
      viol_best = out.violation;
      cost_best = e.f;
    }

    SqpIterate row;
    row.iteration = iter;
    row.cost = e.f;
    row.violation_l1 = l1_violation(e);
    row.kkt = out.kkt;
    row.penalty = rho;
    row.min_stage_lambda2 = kNan;
    if (nc > 0) {
      double worst = -std::numeric_limits<double>::infinity();
      for (double ci : e.conn) worst = std::max(worst, ci);
      row.min_stage_lambda2 = nlp.connectivity_floor() - worst;
    }

    if (out.kkt <= st.kkt_tol) {
      out.status = SqpStatus::KktOptimal;
      out.log.push_back(row);
      return out;
    }

    QpProblem qp;
    qp.h = regularize_hessian(
        nlp.convexified_hessian(out.z, out.mu_in, out.mu_conn, st.eps_hessian),
        st.eps_hessian);
    qp.c = e.grad;
    qp.a_eq = e.jg;
    qp.b_eq.assign(e.g.size(), 0.0);
    for (std::size_t i = 0; i < e.g.size(); ++i) qp.b_eq[i] = -e.g[i];
    if (nc > 0) {
      qp.a_in = stack_rows(e.jh, e.jconn, nlp.dim());
    } else {
      qp.a_in = e.jh;
    }
    qp.b_in.assign(nh + nc, 0.0);
    for (int i = 0; i < nh; ++i) qp.b_in[i] = -e.h[i];
    for (int i = 0; i < nc; ++i) qp.b_in[nh + i] = -e.conn[i];

    QpSolution qs = qp_solver(qp, st.qp, have_qp_prev ? &qp_prev : nullptr);
    row.qp_iterations = qs.iterations;
    if (qs.status == QpStatus::PrimalInfeasible) {
      out.status = SqpStatus::QpFailure;
      out.log.push_back(row);
      return out;
    }
    qp_prev = qs;
    have_qp_prev = true;

    const Vec& dz = qs.delta_z;
    out.mu_eq = qs.mu_eq;
    for (int i = 0; i < nh; ++i) out.mu_in[i] = std::max(qs.mu_in[i], 0.0);
    for (int i = 0; i < nc; ++i) out.mu_conn[i] = std::max(qs.mu_in[nh + i], 0.0);

    double mu_norm = 0.0;
    for (double m : out.mu_eq) mu_norm = std::max(mu_norm, std::fabs(m));
    for (double m : out.mu_in) mu_norm = std::max(mu_norm, m);
    for (double m : out.mu_conn) mu_norm = std::max(mu_norm, m);
    rho = std::max(rho, mu_norm + st.penalty_margin);
    row.penalty = rho;

    if (norm_inf(dz) <= st.step_tol) {
      out.status = out.kkt <= 10.0 * st.kkt_tol ? SqpStatus::KktOptimal : SqpStatus::MaxIter;
      out.log.push_back(row);
      return out;
    }

    const double viol1 = l1_violation(e);
    const double merit0 = e.f + rho * viol1;
    // The subproblem zeroes the linearized violation, so the model decrease
    // of the penalty term is the full current violation.
    const double descent = dot(e.grad, dz) - rho * viol1;
    row.merit_before = merit0;
    if (descent >= 0.0) {
      out.status = SqpStatus::LineSearchFailure;
      out.log.push_back(row);
      return out;
    }

    double alpha = 1.0;
    bool accepted = false;
    double step_len = 0.0;
    Vec z_try(out.z.size());
    while (alpha >= st.min_alpha) {
      for (std::size_t i = 0; i < out.z.size(); ++i) z_try[i] = out.z[i] + alpha * dz[i];
      double merit_try;
      bool usable = true;
      try {
        merit_try = nlp.cost(z_try, nullptr) + rho * nlp.violation_l1(z_try);
      } catch (const DegenerateEigenvalue&) {
        usable = false;  // trial point sits on a repeated eigenvalue, shrink
        merit_try = 0.0;
      }
      if (usable && merit_try <= merit0 + st.armijo_c1 * alpha * descent) {
        out.z = z_try;
        row.alpha = alpha;
        row.merit_after = merit_try;
        step_len = alpha * norm_inf(dz);
        accepted = true;
        break;
      }
      // A rejected full step that traded feasibility away is cutting the
      // corner of a curved constraint boundary; moving along it needs a
      // second-order correction, not a shorter stride. Redo the subproblem
      // with residuals from the trial point under the same linearization.
      if (alpha == 1.0 && usable && nlp.violation_l1(z_try) > viol1) {
        bool soc_usable = true;
        Vec g_t(e.g.size()), h_t(e.h.size()), conn_t(e.conn.size());
        try {
          nlp.constraints(z_try, &g_t, &h_t, &conn_t);
        } catch (const DegenerateEigenvalue&) {
          soc_usable = false;
        }
        if (soc_usable) {
          QpProblem soc = qp;
          Vec jd(e.g.size(), 0.0);
          e.jg.matvec(dz.data(), jd.data());
          for (std::size_t i = 0; i < g_t.size(); ++i) soc.b_eq[i] = -g_t[i] + jd[i];
          jd.assign(nh, 0.0);
          e.jh.matvec(dz.data(), jd.data());
          for (int i = 0; i < nh; ++i) soc.b_in[i] = -h_t[i] + jd[i];
          if (nc > 0) {
            jd.assign(nc, 0.0);
            e.jconn.matvec(dz.data(), jd.data());
            for (int i = 0; i < nc; ++i) soc.b_in[nh + i] = -conn_t[i] + jd[i];
          }
          QpSolution corr = qp_solver(soc, st.qp, &qs);
          if (corr.status != QpStatus::PrimalInfeasible) {
            for (std::size_t i = 0; i < out.z.size(); ++i)
              z_try[i] = out.z[i] + corr.delta_z[i];
            try {
              merit_try = nlp.cost(z_try, nullptr) + rho * nlp.violation_l1(z_try);
              if (merit_try <= merit0 + st.armijo_c1 * descent) {
                out.z = z_try;
                row.alpha = 1.0;
                row.soc = true;
                row.merit_after = merit_try;
                row.qp_iterations += corr.iterations;
                step_len = norm_inf(corr.delta_z);
                accepted = true;
              }
            } catch (const DegenerateEigenvalue&) {
              // corrected point is degenerate; fall back to backtracking
            }
          }
        }
        if (accepted) break;
      }
      alpha *= st.backtrack;
    }
    if (!accepted) {
      out.status = SqpStatus::LineSearchFailure;
      if (cleaner(viol_best, cost_best, out.violation, e.f)) {
        try {
          Eval eb = evaluate(nlp, z_best);
          out.z = z_best;
          out.mu_eq = mu_eq_best;
          out.mu_in = mu_in_best;
          out.mu_conn = mu_conn_best;
          out.kkt = kkt_residual(nlp, eb, out.mu_eq, out.mu_in, out.mu_conn);
          out.violation = nlp.violation_inf(out.z);
        } catch (const DegenerateEigenvalue&) {
          // cleanest point sits on a repeated eigenvalue; keep the incumbent
        }
      }
      out.log.push_back(row);
      return out;
    }
    out.log.push_back(row);

    const double viol_now = nlp.violation_inf(out.z);

    if (step_len <= st.step_tol) {
      // The accepted move is numerically zero; further iterations would
      // replay the same subproblem. kkt is one zero-length step stale.
      out.iterations = iter;
      out.violation = viol_now;
      out.status = out.kkt <= 10.0 * st.kkt_tol ? SqpStatus::KktOptimal : SqpStatus::MaxIter;
      return out;
    }
  }

  // Budget exhausted: hand back the cleanest iterate seen, assessed at face
  // value.
  try {
    Eval e = evaluate(nlp, out.z);
    if (cleaner(viol_best, cost_best, nlp.violation_inf(out.z), e.f)) {
      out.z = z_best;
      out.mu_eq = mu_eq_best;
      out.mu_in = mu_in_best;
      out.mu_conn = mu_conn_best;
      e = evaluate(nlp, out.z);
    }
    out.kkt = kkt_residual(nlp, e, out.mu_eq, out.mu_in, out.mu_conn);
    out.violation = nlp.violation_inf(out.z);
    out.status = out.kkt <= st.kkt_tol ? SqpStatus::KktOptimal : SqpStatus::MaxIter;
  } catch (const DegenerateEigenvalue& ex) {
    out.status = SqpStatus::Degenerate;
    out.degenerate_stage = ex.stage;
  }
  out.iterations = st.max_outer;
  return out;
}

}  // namespace conmpc
