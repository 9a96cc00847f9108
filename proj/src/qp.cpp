// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#include "conmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "conmpc/errors.hpp"
#include "conmpc/simd/kernels.hpp"

namespace conmpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clipd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Scaled working copy of the QP. Rows of the stacked constraint matrix keep
// equalities first, inequalities after; only upper bounds exist for the
// inequality block.
struct Scaled {
  int n = 0, p = 0, m = 0;  // m = total rows
  Mat h;                    // D H D * cost_scale
  Vec q;                    // D c * cost_scale
  Csr a, at;                // E A D and its transpose
  Vec ub;                   // E [b_eq; b_in]
  Vec d, e;                 // diagonal scalings, x = D x_hat, y = E y_hat / cost_scale
  double cost_scale = 1.0;
};

void scale_rows_cols(Csr& a, Csr& at, const Vec& row_s, const Vec& col_s) {
  for (int i = 0; i < a.rows; ++i)
    for (int k = a.indptr[i]; k < a.indptr[i + 1]; ++k)
      a.data[k] *= row_s[i] * col_s[a.indices[k]];
  for (int j = 0; j < at.rows; ++j)
    for (int k = at.indptr[j]; k < at.indptr[j + 1]; ++k)
      at.data[k] *= col_s[j] * row_s[at.indices[k]];
}

Scaled build_scaled(const QpProblem& qp, const QpSettings& st) {
  Scaled s;
  s.n = qp.dim();
  s.p = qp.num_eq();
  s.m = qp.num_eq() + qp.num_in();
  s.h = qp.h;
  s.q = qp.c;
  s.d.assign(s.n, 1.0);
  s.e.assign(s.m, 1.0);

  std::vector<Csr::Triplet> trips;
  trips.reserve(qp.a_eq.nnz() + qp.a_in.nnz());
  for (int i = 0; i < qp.a_eq.rows; ++i)
    for (int k = qp.a_eq.indptr[i]; k < qp.a_eq.indptr[i + 1]; ++k)
      trips.push_back({i, qp.a_eq.indices[k], qp.a_eq.data[k]});
  for (int i = 0; i < qp.a_in.rows; ++i)
    for (int k = qp.a_in.indptr[i]; k < qp.a_in.indptr[i + 1]; ++k)
      trips.push_back({s.p + i, qp.a_in.indices[k], qp.a_in.data[k]});
  s.a = Csr::from_triplets(s.m, s.n, trips);
  s.at = s.a.transposed();

  s.ub.assign(s.m, 0.0);
  for (int i = 0; i < s.p; ++i) s.ub[i] = qp.b_eq[i];
  for (int i = 0; i < qp.a_in.rows; ++i) s.ub[s.p + i] = qp.b_in[i];

  if (st.scale) {
    Vec dx(s.n), de(s.m);
    for (int pass = 0; pass < st.scale_iters; ++pass) {
      // Rows or columns that are numerically zero are left alone: repeated
      // clipped amplification of a ~1e-17 entry would otherwise inflate its
      // scaling (and the unscaled dual) by orders of magnitude.
      for (int j = 0; j < s.n; ++j) {
        double cn = 0.0;
        for (int i = 0; i < s.n; ++i) cn = std::max(cn, std::fabs(s.h(i, j)));
        for (int k = s.at.indptr[j]; k < s.at.indptr[j + 1]; ++k)
          cn = std::max(cn, std::fabs(s.at.data[k]));
        dx[j] = cn > 1e-12 ? clipd(1.0 / std::sqrt(cn), 1e-4, 1e4) : 1.0;
      }
      for (int i = 0; i < s.m; ++i) {
        double rn = 0.0;
        for (int k = s.a.indptr[i]; k < s.a.indptr[i + 1]; ++k)
          rn = std::max(rn, std::fabs(s.a.data[k]) * dx[s.a.indices[k]]);
        de[i] = rn > 1e-12 ? clipd(1.0 / std::sqrt(rn), 1e-4, 1e4) : 1.0;
      }
      for (int i = 0; i < s.n; ++i)
        for (int j = 0; j < s.n; ++j) s.h(i, j) *= dx[i] * dx[j];
      scale_rows_cols(s.a, s.at, de, dx);
      for (int j = 0; j < s.n; ++j) {
        s.q[j] *= dx[j];
        s.d[j] *= dx[j];
      }
      for (int i = 0; i < s.m; ++i) {
        s.ub[i] *= de[i];
        s.e[i] *= de[i];
      }
    }
    // Cost scaling keeps the objective terms near unit magnitude so the
    // unscaled dual residual test is not dominated by a single huge entry.
    double mean_col = 0.0;
    for (int j = 0; j < s.n; ++j) {
      double cn = 0.0;
      for (int i = 0; i < s.n; ++i) cn = std::max(cn, std::fabs(s.h(i, j)));
      mean_col += cn;
    }
    mean_col /= std::max(1, s.n);
    double qn = norm_inf(s.q);
    double gamma = 1.0 / clipd(std::max(mean_col, qn), 1e-4, 1e4);
    for (double& v : s.h.a) v *= gamma;
    for (double& v : s.q) v *= gamma;
    s.cost_scale = gamma;
  }
  return s;
}

// Normal-equations matrix H_s + sigma I + A^T diag(rho) A, refactored
// whenever rho changes.
bool factor_reduced(const Scaled& s, double sigma, const Vec& rho, Cholesky& chol) {
  Mat k = s.h;
  for (int i = 0; i < s.n; ++i) k(i, i) += sigma;
  for (int i = 0; i < s.m; ++i) {
    for (int k1 = s.a.indptr[i]; k1 < s.a.indptr[i + 1]; ++k1) {
      double v1 = rho[i] * s.a.data[k1];
      int c1 = s.a.indices[k1];
      for (int k2 = s.a.indptr[i]; k2 < s.a.indptr[i + 1]; ++k2)
        k(c1, s.a.indices[k2]) += v1 * s.a.data[k2];
    }
  }
  return chol.factor(k);
}

struct Residuals {
  double prim = 0.0, dual = 0.0;
  double eps_prim = 0.0, eps_dual = 0.0;
};

Residuals compute_residuals(const Scaled& s, const QpSettings& st, const Vec& z,
                            const Vec& ax, const Vec& hx, const Vec& aty) {
  Residuals r;
  double ax_n = 0.0, z_n = 0.0;
  for (int i = 0; i < s.m; ++i) {
    double inv_e = 1.0 / s.e[i];
    r.prim = std::max(r.prim, std::fabs(ax[i] - z[i]) * inv_e);
    ax_n = std::max(ax_n, std::fabs(ax[i]) * inv_e);
    z_n = std::max(z_n, std::fabs(z[i]) * inv_e);
  }
  double hx_n = 0.0, aty_n = 0.0, q_n = 0.0;
  double inv_c = 1.0 / s.cost_scale;
  for (int j = 0; j < s.n; ++j) {
    double inv_d = inv_c / s.d[j];
    r.dual = std::max(r.dual, std::fabs(hx[j] + s.q[j] + aty[j]) * inv_d);
    hx_n = std::max(hx_n, std::fabs(hx[j]) * inv_d);
    aty_n = std::max(aty_n, std::fabs(aty[j]) * inv_d);
    q_n = std::max(q_n, std::fabs(s.q[j]) * inv_d);
  }
  r.eps_prim = st.tol_abs + st.tol_rel * std::max(ax_n, z_n);
  r.eps_dual = st.tol_abs + st.tol_rel * std::max({hx_n, aty_n, q_n});
  return r;
}

// Unbounded dual ray test: a direction dy with A^T dy ~ 0 and negative
// constraint support certifies that no primal point satisfies all rows.
bool infeasibility_certificate(const Scaled& s, const QpProblem& qp,
                               const QpSettings& st, const Vec& dy_hat) {
  Vec dy(s.m);
  double dy_n = 0.0;
  for (int i = 0; i < s.m; ++i) {
    dy[i] = s.e[i] * dy_hat[i] / s.cost_scale;
    dy_n = std::max(dy_n, std::fabs(dy[i]));
  }
  if (dy_n <= 0.0) return false;
  double tol = st.infeas_tol * dy_n;
  double support = 0.0;
  for (int i = 0; i < s.p; ++i) support += qp.b_eq[i] * dy[i];
  for (int i = s.p; i < s.m; ++i) {
    if (dy[i] < -tol) return false;  // lower bound is -inf, ray must not push it
    support += qp.b_in[i - s.p] * std::max(dy[i], 0.0);
  }
  Vec aty(s.n, 0.0);
  for (int j = 0; j < s.n; ++j) {
    double acc = 0.0;
    for (int k = s.at.indptr[j]; k < s.at.indptr[j + 1]; ++k)
      acc += s.at.data[k] * dy_hat[s.at.indices[k]];
    aty[j] = acc / (s.d[j] * s.cost_scale);
  }
  return norm_inf(aty) <= tol && support <= -tol;
}

struct KktMetric {
  double stat = 0.0, feas = 0.0, comp = 0.0;
  double total() const { return std::max({stat, feas, comp}); }
};

KktMetric unscaled_kkt(const QpProblem& qp, const Vec& z, const Vec& mu_eq,
                       const Vec& mu_in) {
  KktMetric k;
  Vec grad(qp.dim(), 0.0);
  matvec(qp.h, z.data(), grad.data());
  for (int j = 0; j < qp.dim(); ++j) grad[j] += qp.c[j];
  Vec t(qp.dim(), 0.0);
  qp.a_eq.transposed().matvec_add(mu_eq.data(), t.data());
  qp.a_in.transposed().matvec_add(mu_in.data(), t.data());
  for (int j = 0; j < qp.dim(); ++j)
    k.stat = std::max(k.stat, std::fabs(grad[j] + t[j]));
  Vec ge(qp.num_eq(), 0.0);
  qp.a_eq.matvec(z.data(), ge.data());
  for (int i = 0; i < qp.num_eq(); ++i)
    k.feas = std::max(k.feas, std::fabs(ge[i] - qp.b_eq[i]));
  Vec gi(qp.num_in(), 0.0);
  qp.a_in.matvec(z.data(), gi.data());
  for (int i = 0; i < qp.num_in(); ++i) {
    double slack = qp.b_in[i] - gi[i];
    k.feas = std::max(k.feas, std::max(-slack, 0.0));
    k.comp = std::max(k.comp, std::fabs(mu_in[i] * slack));
  }
  return k;
}

// Active-set refinement: re-solve the equality-constrained KKT system on the
// rows the splitting method marked active, keep the result only if every KKT
// measure improves or stays level and the multiplier signs survive.
void polish(const QpProblem& qp, const QpSettings& st, QpSolution& sol) {
  int n = qp.dim(), p = qp.num_eq(), q = qp.num_in();
  double mu_scale = 1.0;
  for (int i = 0; i < q; ++i) mu_scale = std::max(mu_scale, sol.mu_in[i]);
  Vec gi(q, 0.0);
  qp.a_in.matvec(sol.delta_z.data(), gi.data());
  std::vector<int> active;
  for (int i = 0; i < q; ++i) {
    double slack = qp.b_in[i] - gi[i];
    if (sol.mu_in[i] > 1e-9 * mu_scale || slack < 1e-9 * std::max(1.0, std::fabs(qp.b_in[i])))
      active.push_back(i);
  }
  KktMetric before = unscaled_kkt(qp, sol.delta_z, sol.mu_eq, sol.mu_in);

  for (int pass = 0; pass < st.polish_passes; ++pass) {
    int a = static_cast<int>(active.size());
    int dim = n + p + a;
    Mat kkt(dim, dim);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) kkt(i, j) = qp.h(i, j);
      kkt(i, i) += st.polish_delta;
    }
    for (int i = 0; i < p; ++i) {
      for (int k = qp.a_eq.indptr[i]; k < qp.a_eq.indptr[i + 1]; ++k) {
        kkt(n + i, qp.a_eq.indices[k]) = qp.a_eq.data[k];
        kkt(qp.a_eq.indices[k], n + i) = qp.a_eq.data[k];
      }
      kkt(n + i, n + i) = -st.polish_delta;
    }
    for (int r = 0; r < a; ++r) {
      int i = active[r];
      for (int k = qp.a_in.indptr[i]; k < qp.a_in.indptr[i + 1]; ++k) {
        kkt(n + p + r, qp.a_in.indices[k]) = qp.a_in.data[k];
        kkt(qp.a_in.indices[k], n + p + r) = qp.a_in.data[k];
      }
      kkt(n + p + r, n + p + r) = -st.polish_delta;
    }
    LdltQuasidef ldlt;
    if (!ldlt.factor(kkt)) return;

    Vec rhs(dim, 0.0);
    for (int j = 0; j < n; ++j) rhs[j] = -qp.c[j];
    for (int i = 0; i < p; ++i) rhs[n + i] = qp.b_eq[i];
    for (int r = 0; r < a; ++r) rhs[n + p + r] = qp.b_in[active[r]];

    // One round of iterative refinement against the unshifted KKT matrix.
    Vec sol_v = rhs;
    ldlt.solve(sol_v);
    for (int refine = 0; refine < 2; ++refine) {
      Vec resid = rhs;
      // resid -= K0 * sol_v with K0 the delta-free KKT matrix
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += qp.h(i, j) * sol_v[j];
        resid[i] -= acc;
      }
      for (int i = 0; i < p; ++i) {
        double acc = 0.0;
        for (int k = qp.a_eq.indptr[i]; k < qp.a_eq.indptr[i + 1]; ++k) {
          acc += qp.a_eq.data[k] * sol_v[qp.a_eq.indices[k]];
          resid[qp.a_eq.indices[k]] -= qp.a_eq.data[k] * sol_v[n + i];
        }
        resid[n + i] -= acc;
      }
      for (int r = 0; r < a; ++r) {
        int i = active[r];
        double acc = 0.0;
        for (int k = qp.a_in.indptr[i]; k < qp.a_in.indptr[i + 1]; ++k) {
          acc += qp.a_in.data[k] * sol_v[qp.a_in.indices[k]];
          resid[qp.a_in.indices[k]] -= qp.a_in.data[k] * sol_v[n + p + r];
        }
        resid[n + p + r] -= acc;
      }
      ldlt.solve(resid);
      for (int j = 0; j < dim; ++j) sol_v[j] += resid[j];
    }

    Vec z_new(sol_v.begin(), sol_v.begin() + n);
    Vec mu_eq_new(sol_v.begin() + n, sol_v.begin() + n + p);
    Vec mu_in_new(q, 0.0);
    bool sign_ok = true;
    for (int r = 0; r < a; ++r) {
      double m = sol_v[n + p + r];
      if (m < -1e-9 * mu_scale) sign_ok = false;
      mu_in_new[active[r]] = std::max(m, 0.0);
    }
    Vec gi_new(q, 0.0);
    qp.a_in.matvec(z_new.data(), gi_new.data());
    bool feas_ok = true;
    for (int i = 0; i < q; ++i)
      if (gi_new[i] > qp.b_in[i] + 1e-9 * std::max(1.0, std::fabs(qp.b_in[i])))
        feas_ok = false;

    if (sign_ok && feas_ok) {
      KktMetric after = unscaled_kkt(qp, z_new, mu_eq_new, mu_in_new);
      if (after.total() <= before.total() + 1e-14) {
        sol.delta_z = z_new;
        sol.mu_eq = mu_eq_new;
        sol.mu_in = mu_in_new;
        sol.polished = true;
      }
      return;
    }

    // Revise the working set deterministically and retry.
    std::vector<int> next;
    for (int r = 0; r < a; ++r)
      if (sol_v[n + p + r] >= -1e-9 * mu_scale) next.push_back(active[r]);
    for (int i = 0; i < q; ++i) {
      if (gi_new[i] > qp.b_in[i] + 1e-9 * std::max(1.0, std::fabs(qp.b_in[i])) &&
          !std::binary_search(next.begin(), next.end(), i))
        next.insert(std::lower_bound(next.begin(), next.end(), i), i);
    }
    if (next == active) return;
    active = std::move(next);
  }
}

}  // namespace

QpSolution solve_qp(const QpProblem& qp, const QpSettings& st, const QpSolution* warm) {
  const int n = qp.dim();
  if (static_cast<int>(qp.c.size()) != n || qp.h.cols != n)
    throw SchemaError("qp: objective dimensions disagree");
  if (qp.a_eq.rows != static_cast<int>(qp.b_eq.size()) ||
      qp.a_in.rows != static_cast<int>(qp.b_in.size()))
    throw SchemaError("qp: constraint dimensions disagree");

  Scaled s = build_scaled(qp, st);
  const int m = s.m, p = s.p;

  double rho_bar = st.rho0;
  if (warm && warm->rho_final > 0.0) rho_bar = clipd(warm->rho_final, st.rho_min, st.rho_max);
  Vec rho(m);
  auto set_rho = [&](double bar) {
    for (int i = 0; i < m; ++i)
      rho[i] = i < p ? clipd(st.rho_eq_scale * bar, st.rho_min, st.rho_max) : bar;
  };
  set_rho(rho_bar);

  Vec x(n, 0.0), z(m, 0.0), y(m, 0.0);
  if (warm && static_cast<int>(warm->delta_z.size()) == n &&
      static_cast<int>(warm->mu_eq.size()) == p &&
      static_cast<int>(warm->mu_in.size()) == m - p) {
    for (int j = 0; j < n; ++j) x[j] = warm->delta_z[j] / s.d[j];
    for (int i = 0; i < p; ++i) y[i] = s.cost_scale * warm->mu_eq[i] / s.e[i];
    for (int i = p; i < m; ++i) y[i] = s.cost_scale * warm->mu_in[i - p] / s.e[i];
  }
  s.a.matvec(x.data(), z.data());
  for (int i = 0; i < p; ++i) z[i] = s.ub[i];
  for (int i = p; i < m; ++i) z[i] = std::min(z[i], s.ub[i]);

  Cholesky chol;
  double sigma = st.sigma;
  while (!factor_reduced(s, sigma, rho, chol)) {
    sigma *= 10.0;
    if (sigma > 1.0) throw NoConvergence("qp: reduced system not factorizable");
  }

  QpSolution out;
  out.delta_z.assign(n, 0.0);
  out.mu_eq.assign(p, 0.0);
  out.mu_in.assign(m - p, 0.0);

  Vec rhs(n), xt(n), zt(m), y_prev(m), dy(m), ax(m), hx(n), aty(n);
  int infeas_streak = 0;

  for (int iter = 1; iter <= st.max_iter; ++iter) {
    y_prev = y;

    for (int j = 0; j < n; ++j) rhs[j] = sigma * x[j] - s.q[j];
    for (int i = 0; i < m; ++i) dy[i] = rho[i] * z[i] - y[i];  // reuse dy as scratch
    s.at.matvec_add(dy.data(), rhs.data());
    xt = rhs;
    chol.solve(xt);
    s.a.matvec(xt.data(), zt.data());

    const double al = st.over_relax;
    for (int j = 0; j < n; ++j) x[j] = al * xt[j] + (1.0 - al) * x[j];
    for (int i = 0; i < m; ++i) {
      double v = al * zt[i] + (1.0 - al) * z[i] + y[i] / rho[i];
      double z_new = i < p ? s.ub[i] : std::min(v, s.ub[i]);
      y[i] = rho[i] * (v - z_new);
      z[i] = z_new;
    }

    if (iter % st.check_every != 0 && iter != st.max_iter) continue;

    s.a.matvec(x.data(), ax.data());
    matvec(s.h, x.data(), hx.data());
    s.at.matvec(y.data(), aty.data());
    Residuals r = compute_residuals(s, st, z, ax, hx, aty);
    out.iterations = iter;
    out.primal_residual = r.prim;
    out.dual_residual = r.dual;

    if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
      out.status = QpStatus::Optimal;
      break;
    }

    for (int i = 0; i < m; ++i) dy[i] = y[i] - y_prev[i];
    if (infeasibility_certificate(s, qp, st, dy)) {
      if (++infeas_streak >= st.infeas_persist) {
        out.status = QpStatus::PrimalInfeasible;
        for (int j = 0; j < n; ++j) out.delta_z[j] = s.d[j] * x[j];
        for (int i = 0; i < p; ++i) out.mu_eq[i] = s.e[i] * y[i] / s.cost_scale;
        for (int i = p; i < m; ++i) out.mu_in[i - p] = s.e[i] * y[i] / s.cost_scale;
        out.rho_final = rho_bar;
        return out;
      }
    } else {
      infeas_streak = 0;
    }

    // Penalty adaptation balances the normalized residuals; factor-of-two
    // steps keep refactorizations rare and the trajectory reproducible.
    double prim_rel = r.prim / std::max(r.eps_prim, 1e-300);
    double dual_rel = r.dual / std::max(r.eps_dual, 1e-300);
    double new_bar = rho_bar;
    if (prim_rel > st.adapt_ratio * dual_rel)
      new_bar = clipd(rho_bar * 2.0, st.rho_min, st.rho_max);
    else if (dual_rel > st.adapt_ratio * prim_rel)
      new_bar = clipd(rho_bar * 0.5, st.rho_min, st.rho_max);
    if (new_bar != rho_bar) {
      rho_bar = new_bar;
      set_rho(rho_bar);
      while (!factor_reduced(s, sigma, rho, chol)) {
        sigma *= 10.0;
        if (sigma > 1.0) throw NoConvergence("qp: reduced system not factorizable");
      }
    }
  }

  for (int j = 0; j < n; ++j) out.delta_z[j] = s.d[j] * x[j];
  for (int i = 0; i < p; ++i) out.mu_eq[i] = s.e[i] * y[i] / s.cost_scale;
  for (int i = p; i < m; ++i) out.mu_in[i - p] = std::max(0.0, s.e[i] * y[i] / s.cost_scale);
  out.rho_final = rho_bar;
  if (out.status != QpStatus::Optimal) return out;

  if (st.polish && m - p > 0) polish(qp, st, out);
  return out;
}

}  // namespace conmpc
