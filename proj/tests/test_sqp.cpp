// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "conmpc/graph.hpp"
#include "conmpc/sqp.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "testutil.hpp"

using namespace conmpc;
using testutil::line_scenario;
using testutil::measured;
using testutil::pull_apart_scenario;
using testutil::triangle_scenario;

namespace {

/// min (z0-1)^2 + (z1-2)^2  s.t.  z0 + z1 = 1; optimum (0,1), multiplier 2.
struct EqualityToy final : NlpModel {
  int dim() const override { return 2; }
  int num_eq() const override { return 1; }
  int num_ineq() const override { return 0; }
  int num_conn() const override { return 0; }

  double cost(const Vec& z, Vec* grad) const override {
    if (grad) *grad = {2.0 * (z[0] - 1.0), 2.0 * (z[1] - 2.0)};
    return (z[0] - 1.0) * (z[0] - 1.0) + (z[1] - 2.0) * (z[1] - 2.0);
  }
  void constraints(const Vec& z, Vec* g, Vec*, Vec*) const override {
    (*g)[0] = z[0] + z[1] - 1.0;
  }
  void jacobians(const Vec&, Csr* jg, Csr* jh, Csr* jc) const override {
    *jg = Csr::from_triplets(1, 2, {{0, 0, 1.0}, {0, 1, 1.0}});
    *jh = Csr::from_triplets(0, 2, {});
    *jc = Csr::from_triplets(0, 2, {});
  }
  Mat convexified_hessian(const Vec&, const Vec&, const Vec&, double) const override {
    Mat h = Mat::identity(2);
    h(0, 0) = h(1, 1) = 2.0;
    return h;
  }
  double violation_inf(const Vec& z) const override { return std::fabs(z[0] + z[1] - 1.0); }
  double violation_l1(const Vec& z) const override { return violation_inf(z); }
};

/// min (z-1)^2  s.t.  z <= 0; optimum 0, multiplier 2.
struct InequalityToy final : NlpModel {
  int dim() const override { return 1; }
  int num_eq() const override { return 0; }
  int num_ineq() const override { return 1; }
  int num_conn() const override { return 0; }

  double cost(const Vec& z, Vec* grad) const override {
    if (grad) *grad = {2.0 * (z[0] - 1.0)};
    return (z[0] - 1.0) * (z[0] - 1.0);
  }
  void constraints(const Vec& z, Vec*, Vec* h, Vec*) const override { (*h)[0] = z[0]; }
  void jacobians(const Vec&, Csr* jg, Csr* jh, Csr* jc) const override {
    *jg = Csr::from_triplets(0, 1, {});
    *jh = Csr::from_triplets(1, 1, {{0, 0, 1.0}});
    *jc = Csr::from_triplets(0, 1, {});
  }
  Mat convexified_hessian(const Vec&, const Vec&, const Vec&, double) const override {
    Mat h(1, 1);
    h(0, 0) = 2.0;
    return h;
  }
  double violation_inf(const Vec& z) const override { return std::max(z[0], 0.0); }
  double violation_l1(const Vec& z) const override { return violation_inf(z); }
};

double stage_lambda2(const NlpProblem& nlp, const Vec& z, int stage) {
  WeightedLaplacian wl =
      build_laplacian(nlp.stage_positions(z, stage), nlp.spec().kernel,
                      nlp.spec().edge_threshold);
  return fiedler(wl).lambda2;
}

void check_merit_monotone(const SqpResult& r) {
  for (const SqpIterate& row : r.log) {
    if (row.alpha > 0.0) {
      CHECK(row.merit_after <= row.merit_before + 1e-12);
      CHECK(row.alpha <= 1.0);
    }
  }
}

}  // namespace

TEST_CASE("equality toy converges to the hand optimum in one step") {
  EqualityToy toy;
  SqpSettings st;
  SqpResult r = solve_sqp(toy, {0.0, 0.0}, st);
  REQUIRE(r.status == SqpStatus::KktOptimal);
  CHECK(r.iterations <= 2);
  CHECK(std::fabs(r.z[0]) < 1e-7);
  CHECK(std::fabs(r.z[1] - 1.0) < 1e-7);
  CHECK(std::fabs(r.mu_eq[0] - 2.0) < 1e-6);
  check_merit_monotone(r);
}

TEST_CASE("inequality toy pins the bound with multiplier two") {
  InequalityToy toy;
  SqpSettings st;
  SqpResult r = solve_sqp(toy, {-1.0}, st);
  REQUIRE(r.status == SqpStatus::KktOptimal);
  CHECK(std::fabs(r.z[0]) < 1e-7);
  CHECK(std::fabs(r.mu_in[0] - 2.0) < 1e-6);
  CHECK(r.mu_in[0] >= 0.0);
  check_merit_monotone(r);

  // Starting inside the feasible region converges to the same point.
  SqpResult r2 = solve_sqp(toy, {-3.0}, st);
  REQUIRE(r2.status == SqpStatus::KktOptimal);
  CHECK(std::fabs(r2.z[0]) < 1e-7);
}

TEST_CASE("start at the optimum terminates immediately") {
  EqualityToy toy;
  SqpWarmStart warm;
  warm.mu_eq = {2.0};
  SqpResult r = solve_sqp(toy, {0.0, 1.0}, SqpSettings{}, &warm);
  REQUIRE(r.status == SqpStatus::KktOptimal);
  CHECK(r.iterations == 0);
}

TEST_CASE("hover start on a small swarm program reaches a kkt point") {
  ScenarioSpec s = line_scenario(3, 5);
  s.validate();
  NlpProblem nlp(s, measured(s), 0, true);
  SqpSettings st;
  st.qp.polish = false;
  SqpResult r = solve_sqp(nlp, nlp.hover_candidate(), st);
  REQUIRE(r.status == SqpStatus::KktOptimal);
  CHECK(r.violation <= 1e-6);
  CHECK(r.kkt <= 1e-6);
  check_merit_monotone(r);

  // Hard constraints hold at every horizon stage of the solution.
  for (int j = 1; j <= s.horizon; ++j) {
    CHECK(stage_lambda2(nlp, r.z, j) >= s.lambda_min - 1e-6);
    Vec p = nlp.stage_positions(r.z, j);
    for (int i = 0; i < 3; ++i)
      for (int l = i + 1; l < 3; ++l) {
        const double dx = p[2 * i] - p[2 * l];
        const double dy = p[2 * i + 1] - p[2 * l + 1];
        CHECK(std::sqrt(dx * dx + dy * dy) >= s.collision_radius - 1e-6);
      }
  }

  // Multipliers for inequality rows stay sign-correct.
  for (double m : r.mu_in) CHECK(m >= 0.0);
  for (double m : r.mu_conn) CHECK(m >= 0.0);
}

TEST_CASE("pull-apart pair activates the connectivity rows") {
  ScenarioSpec s = pull_apart_scenario(6);
  s.validate();
  NlpProblem nlp(s, measured(s), 0, true);
  REQUIRE(nlp.num_conn() == 6);
  SqpSettings st;
  st.qp.polish = false;
  SqpResult r = solve_sqp(nlp, nlp.hover_candidate(), st);
  REQUIRE(r.status == SqpStatus::KktOptimal);
  CHECK(r.violation <= 1e-6);

  // References sit beyond the connectivity envelope, so at least the last
  // stage's spectral floor must clamp the separation, with a positive
  // multiplier on some connectivity row.
  double last = stage_lambda2(nlp, r.z, s.horizon);
  CHECK(last >= s.lambda_min - 1e-6);
  CHECK(last <= s.lambda_min + 1e-2);
  double mu_max = 0.0;
  for (double m : r.mu_conn) mu_max = std::max(mu_max, m);
  CHECK(mu_max > 1e-4);

  // Without connectivity rows the same program lets the pair split.
  NlpProblem off(s, measured(s), 0, false);
  REQUIRE(off.num_conn() == 0);
  SqpResult r_off = solve_sqp(off, off.hover_candidate(), st);
  REQUIRE((r_off.status == SqpStatus::KktOptimal || r_off.status == SqpStatus::MaxIter));
  CHECK(stage_lambda2(off, r_off.z, s.horizon) < s.lambda_min);
}

TEST_CASE("repeated eigenvalue at the start reports degeneracy") {
  ScenarioSpec s = triangle_scenario(4);
  s.validate();
  NlpProblem nlp(s, measured(s), 0, true);
  SqpSettings st;
  SqpResult r = solve_sqp(nlp, nlp.hover_candidate(), st);
  CHECK(r.status == SqpStatus::Degenerate);
  CHECK(r.degenerate_stage >= 1);
}

TEST_CASE("iteration log is populated and internally consistent") {
  ScenarioSpec s = line_scenario(3, 5);
  NlpProblem nlp(s, measured(s), 0, true);
  SqpSettings st;
  st.qp.polish = false;
  SqpResult r = solve_sqp(nlp, nlp.hover_candidate(), st);
  REQUIRE(!r.log.empty());
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].iteration == static_cast<int>(i) + 1);
    CHECK(r.log[i].kkt >= 0.0);
    CHECK(std::isfinite(r.log[i].cost));
  }
  // The spectral margin column tracks the true minimum stage eigenvalue.
  const SqpIterate& last = r.log.back();
  if (!std::isnan(last.min_stage_lambda2)) {
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= s.horizon; ++j) worst = std::min(worst, stage_lambda2(nlp, r.z, j));
    CHECK(std::fabs(last.min_stage_lambda2 - worst) < 1e-6);
  }
}

TEST_CASE("regularize_hessian leaves a matrix above the floor untouched") {
  Mat h(3, 3);
  h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
  bool clamped = true;
  Mat r = regularize_hessian(h, 1e-6, &clamped);
  CHECK(!clamped);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(r(i, j) == h(i, j));
}

TEST_CASE("regularize_hessian lifts negative eigenvalues to the floor") {
  Mat h(2, 2);
  h(0, 0) = 1.0;
  h(1, 1) = -2.0;
  bool clamped = false;
  Mat r = regularize_hessian(h, 1e-6, &clamped);
  CHECK(clamped);
  CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r(1, 1) == doctest::Approx(1e-6).epsilon(1e-9));
  CHECK(std::fabs(r(0, 1)) < 1e-15);
  CHECK(std::fabs(r(1, 0)) < 1e-15);
}

TEST_CASE("regularize_hessian is the nearest matrix satisfying the floor") {
  std::mt19937 rng(99);
  const int n = 6;
  const double eps = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    Mat h(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        h(i, j) = h(j, i) = u(rng);
      }
    }
    bool clamped = false;
    Mat r = regularize_hessian(h, eps, &clamped);

    EigResult before = jacobi_eig(h);
    EigResult after = jacobi_eig(r);
    CHECK(after.eigenvalues[0] >= eps - 1e-12);

    // Clamping in the eigenbasis is the Frobenius projection onto the
    // feasible cone, so the distance equals the clamped spectral gaps.
    double want = 0.0;
    for (double ev : before.eigenvalues) {
      const double gap = std::max(0.0, eps - ev);
      want += gap * gap;
    }
    want = std::sqrt(want);
    double got = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = r(i, j) - h(i, j);
        got += d * d;
      }
    got = std::sqrt(got);
    CHECK(got == doctest::Approx(want).epsilon(1e-8));

    if (clamped) {
      // The diagonal shift reaching the same floor is never closer.
      const double shift = eps - before.eigenvalues[0];
      const double shift_dist = shift * std::sqrt(static_cast<double>(n));
      CHECK(shift_dist >= got - 1e-12);
    }
  }
}

TEST_CASE("raw Lagrangian curvature matches finite differences of the gradient") {
  ScenarioSpec s = line_scenario(3, 2);
  NlpProblem nlp(s, measured(s), 0, true);
  const int dim = nlp.dim();
  const int nh = nlp.num_ineq();
  const int nc = nlp.num_conn();

  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> upos(-0.1, 0.1);
  std::uniform_real_distribution<double> umu(0.0, 1.0);
  Vec z = nlp.hover_candidate();
  for (double& zi : z) zi += upos(rng);
  Vec mu_h(nh), mu_conn(nc);
  for (double& m : mu_h) m = umu(rng);
  for (double& m : mu_conn) m = umu(rng);

  // Equality multipliers stay zero: the dynamics are affine in positions, so
  // their curvature cannot reach the compared rows anyway.
  const auto grad_lagrangian = [&](const Vec& at) {
    Vec g;
    nlp.cost(at, &g);
    Csr jg, jh, jconn;
    nlp.jacobians(at, &jg, &jh, &jconn);
    Vec acc(dim, 0.0);
    for (int i = 0; i < nh; ++i) {
      for (int k = jh.indptr[i]; k < jh.indptr[i + 1]; ++k)
        acc[jh.indices[k]] += mu_h[i] * jh.data[k];
    }
    for (int i = 0; i < nc; ++i) {
      for (int k = jconn.indptr[i]; k < jconn.indptr[i + 1]; ++k)
        acc[jconn.indices[k]] += mu_conn[i] * jconn.data[k];
    }
    for (int i = 0; i < dim; ++i) g[i] += acc[i];
    return g;
  };

  Mat exact = nlp.lagrangian_hessian(z, mu_h, mu_conn);
  const double step = 1e-5;
  Vec zp = z, zm = z;
  double worst = 0.0;
  for (int k = 0; k < dim; ++k) {
    zp[k] = z[k] + step;
    zm[k] = z[k] - step;
    const Vec gp = grad_lagrangian(zp);
    const Vec gm = grad_lagrangian(zm);
    zp[k] = z[k];
    zm[k] = z[k];
    for (int r = 0; r < dim; ++r) {
      const double fd = (gp[r] - gm[r]) / (2.0 * step);
      const double denom = std::max(1.0, std::fabs(exact(r, k)));
      worst = std::max(worst, std::fabs(fd - exact(r, k)) / denom);
    }
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("hessian handed to the subproblem keeps the convexity floor") {
  ScenarioSpec s = line_scenario(2, 3);
  NlpProblem nlp(s, measured(s), 0, true);
  const double eps = 1e-6;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> upos(-0.2, 0.2);
  std::uniform_real_distribution<double> umu(0.0, 2.0);
  for (int trial = 0; trial < 3; ++trial) {
    Vec z = nlp.hover_candidate();
    for (double& zi : z) zi += upos(rng);
    Vec mu_h(nlp.num_ineq()), mu_conn(nlp.num_conn());
    for (double& m : mu_h) m = umu(rng);
    for (double& m : mu_conn) m = umu(rng);
    Mat h = regularize_hessian(nlp.convexified_hessian(z, mu_h, mu_conn, eps), eps);
    EigResult eg = jacobi_eig(h);
    CHECK(eg.eigenvalues[0] >= eps * (1.0 - 1e-3));
  }
}

TEST_CASE("exact penalty merit is cost plus weighted violation") {
  ScenarioSpec s = line_scenario(3, 4);
  NlpProblem nlp(s, measured(s), 0, true);

  // Hover is feasible here, so the penalty term vanishes.
  Vec z = nlp.hover_candidate();
  const double f = nlp.cost(z, nullptr);
  const double v = nlp.violation_l1(z);
  CHECK(v < 1e-9);
  CHECK(f + 1.0 * v == doctest::Approx(f));

  // Push one input far outside its box; the penalty part scales linearly
  // with the weight and the merit never drops below the bare cost.
  Vec z_bad = z;
  z_bad[nlp.layout().u_index(0, 0)] = 10.0;
  const double fb = nlp.cost(z_bad, nullptr);
  const double vb = nlp.violation_l1(z_bad);
  CHECK(vb > 1.0);
  const double m1 = fb + 1.0 * vb;
  const double m2 = fb + 2.0 * vb;
  CHECK(m2 - fb == doctest::Approx(2.0 * (m1 - fb)).epsilon(1e-12));
  CHECK(m1 >= fb);
}
