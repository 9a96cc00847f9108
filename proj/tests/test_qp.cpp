// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "conmpc/qp.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace conmpc;
using testutil::random_spd;
using testutil::random_vec;

namespace {

Csr dense_rows(const Mat& m) { return Csr::from_dense(m); }

Csr empty_rows(int cols) { return Csr::from_triplets(0, cols, {}); }

QpProblem unconstrained(const Mat& h, const Vec& c) {
  QpProblem qp;
  qp.h = h;
  qp.c = c;
  qp.a_eq = empty_rows(h.rows);
  qp.a_in = empty_rows(h.rows);
  return qp;
}

double kkt_stationarity(const QpProblem& qp, const QpSolution& s) {
  Vec g(qp.dim(), 0.0);
  matvec(qp.h, s.delta_z.data(), g.data());
  axpy(1.0, qp.c, g);
  qp.a_eq.transposed().matvec_add(s.mu_eq.data(), g.data());
  qp.a_in.transposed().matvec_add(s.mu_in.data(), g.data());
  return norm_inf(g);
}

}  // namespace

TEST_CASE("unconstrained qp matches direct solve") {
  std::mt19937_64 rng(11);
  for (int n : {1, 3, 10, 30}) {
    Mat h = random_spd(rng, n, 1.0);
    Vec c = random_vec(rng, n, -2.0, 2.0);
    QpSolution sol = solve_qp(unconstrained(h, c));
    REQUIRE(sol.status == QpStatus::Optimal);

    Cholesky chol;
    REQUIRE(chol.factor(h));
    Vec want = c;
    for (double& v : want) v = -v;
    chol.solve(want);
    for (int j = 0; j < n; ++j) CHECK(std::fabs(sol.delta_z[j] - want[j]) < 1e-7);
  }
}

TEST_CASE("single inequality, hand KKT point") {
  // min (z-1)^2 s.t. z <= 0: optimum pinned at the bound with multiplier 2.
  Mat h(1, 1);
  h(0, 0) = 2.0;
  Mat a(1, 1);
  a(0, 0) = 1.0;
  QpProblem qp;
  qp.h = h;
  qp.c = {-2.0};
  qp.a_eq = empty_rows(1);
  qp.a_in = dense_rows(a);
  qp.b_in = {0.0};

  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(std::fabs(sol.delta_z[0]) < 1e-8);
  CHECK(std::fabs(sol.mu_in[0] - 2.0) < 1e-6);
  CHECK(sol.mu_in[0] >= -1e-10);
}

TEST_CASE("equality constrained qp matches dense kkt factorization") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 18, p = 6;
    Mat h = random_spd(rng, n, 1.0);
    Vec c = random_vec(rng, n, -1.0, 1.0);
    Mat a(p, n);
    for (double& v : a.a) v = random_vec(rng, 1, -1.0, 1.0)[0];
    Vec b = random_vec(rng, p, -1.0, 1.0);

    QpProblem qp;
    qp.h = h;
    qp.c = c;
    qp.a_eq = dense_rows(a);
    qp.b_eq = b;
    qp.a_in = empty_rows(n);
    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);

    Mat kkt(n + p, n + p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) kkt(i, j) = h(i, j);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < n; ++j) {
        kkt(n + i, j) = a(i, j);
        kkt(j, n + i) = a(i, j);
      }
    LdltQuasidef ldlt;
    REQUIRE(ldlt.factor(kkt));
    Vec rhs(n + p, 0.0);
    for (int j = 0; j < n; ++j) rhs[j] = -c[j];
    for (int i = 0; i < p; ++i) rhs[n + i] = b[i];
    ldlt.solve(rhs);

    for (int j = 0; j < n; ++j) CHECK(std::fabs(sol.delta_z[j] - rhs[j]) < 1e-7);
    for (int i = 0; i < p; ++i) CHECK(std::fabs(sol.mu_eq[i] - rhs[n + i]) < 1e-6);
  }
}

TEST_CASE("mixed active and inactive bounds") {
  // min 0.5 ||z - (2,-1)||^2 s.t. z1 <= 1, z2 <= 5: first row active.
  Mat h = Mat::identity(2);
  Mat a = Mat::identity(2);
  QpProblem qp;
  qp.h = h;
  qp.c = {-2.0, 1.0};
  qp.a_eq = empty_rows(2);
  qp.a_in = dense_rows(a);
  qp.b_in = {1.0, 5.0};

  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(std::fabs(sol.delta_z[0] - 1.0) < 1e-8);
  CHECK(std::fabs(sol.delta_z[1] + 1.0) < 1e-8);
  CHECK(std::fabs(sol.mu_in[0] - 1.0) < 1e-6);
  CHECK(std::fabs(sol.mu_in[1]) < 1e-8);
  CHECK(sol.mu_in[0] >= -1e-10);
  CHECK(sol.mu_in[1] >= -1e-10);
  // Polish lands the active bound essentially exactly.
  CHECK(sol.polished);
  CHECK(std::fabs(sol.delta_z[0] - 1.0) < 1e-10);
}

TEST_CASE("equality plus active inequality, hand KKT point") {
  // min 0.5 (z1^2 + z2^2) s.t. z1 + z2 = 2, z1 <= 0.5
  // -> z = (0.5, 1.5), nu = -1.5, mu = 1.
  Mat h = Mat::identity(2);
  Mat ae(1, 2);
  ae(0, 0) = 1.0;
  ae(0, 1) = 1.0;
  Mat ai(1, 2);
  ai(0, 0) = 1.0;
  QpProblem qp;
  qp.h = h;
  qp.c = {0.0, 0.0};
  qp.a_eq = dense_rows(ae);
  qp.b_eq = {2.0};
  qp.a_in = dense_rows(ai);
  qp.b_in = {0.5};

  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(std::fabs(sol.delta_z[0] - 0.5) < 1e-8);
  CHECK(std::fabs(sol.delta_z[1] - 1.5) < 1e-8);
  CHECK(std::fabs(sol.mu_eq[0] + 1.5) < 1e-6);
  CHECK(std::fabs(sol.mu_in[0] - 1.0) < 1e-6);
}

TEST_CASE("random boxed qp satisfies kkt conditions") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 4; ++trial) {
    int n = 25;
    Mat h = random_spd(rng, n, 0.8);
    Vec c = random_vec(rng, n, -3.0, 3.0);
    Mat a(2 * n, n);
    for (int j = 0; j < n; ++j) {
      a(j, j) = 1.0;       // z <= 0.7
      a(n + j, j) = -1.0;  // z >= -0.7
    }
    QpProblem qp;
    qp.h = h;
    qp.c = c;
    qp.a_eq = empty_rows(n);
    qp.a_in = dense_rows(a);
    qp.b_in.assign(2 * n, 0.7);

    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(kkt_stationarity(qp, sol) < 1e-6);
    Vec gi(2 * n, 0.0);
    qp.a_in.matvec(sol.delta_z.data(), gi.data());
    for (int i = 0; i < 2 * n; ++i) {
      double slack = qp.b_in[i] - gi[i];
      CHECK(slack > -1e-7);
      CHECK(sol.mu_in[i] >= -1e-10);
      CHECK(std::fabs(sol.mu_in[i] * slack) < 1e-6);
    }
  }
}

TEST_CASE("repeat solve is bitwise identical") {
  std::mt19937_64 rng(5);
  int n = 12;
  Mat h = random_spd(rng, n, 0.6);
  Vec c = random_vec(rng, n, -1.0, 1.0);
  Mat a(3, n);
  for (int j = 0; j < n; ++j) {
    a(0, j) = j % 2 ? 1.0 : -1.0;
    a(1, j) = 1.0 / (1 + j);
    a(2, j) = (j == 0 || j == n - 1) ? 1.0 : 0.0;
  }
  QpProblem qp;
  qp.h = h;
  qp.c = c;
  qp.a_eq = empty_rows(n);
  qp.a_in = dense_rows(a);
  qp.b_in = {0.3, -0.1, 0.2};

  QpSolution s1 = solve_qp(qp);
  QpSolution s2 = solve_qp(qp);
  REQUIRE(s1.status == QpStatus::Optimal);
  REQUIRE(s1.delta_z.size() == s2.delta_z.size());
  CHECK(std::memcmp(s1.delta_z.data(), s2.delta_z.data(),
                    s1.delta_z.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(s1.mu_in.data(), s2.mu_in.data(),
                    s1.mu_in.size() * sizeof(double)) == 0);
  CHECK(s1.iterations == s2.iterations);
}

TEST_CASE("contradictory bounds detected as primal infeasible") {
  // z >= 2 and z <= -1 expressed as upper-bound rows.
  Mat h(1, 1);
  h(0, 0) = 2.0;
  Mat a(2, 1);
  a(0, 0) = -1.0;
  a(1, 0) = 1.0;
  QpProblem qp;
  qp.h = h;
  qp.c = {0.0};
  qp.a_eq = empty_rows(1);
  qp.a_in = dense_rows(a);
  qp.b_in = {-2.0, -1.0};

  QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::PrimalInfeasible);
}

TEST_CASE("infeasible equality pair detected") {
  // z1 + z2 = 1 and z1 + z2 = 3 cannot both hold.
  Mat h = Mat::identity(2);
  Mat ae(2, 2);
  ae(0, 0) = 1.0;
  ae(0, 1) = 1.0;
  ae(1, 0) = 1.0;
  ae(1, 1) = 1.0;
  QpProblem qp;
  qp.h = h;
  qp.c = {0.0, 0.0};
  qp.a_eq = dense_rows(ae);
  qp.b_eq = {1.0, 3.0};
  qp.a_in = empty_rows(2);

  QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::PrimalInfeasible);
}

TEST_CASE("warm start reuses the previous solution") {
  std::mt19937_64 rng(31);
  int n = 20;
  Mat h = random_spd(rng, n, 1.0);
  Vec c = random_vec(rng, n, -1.0, 1.0);
  Mat a(n, n);
  for (int j = 0; j < n; ++j) a(j, j) = 1.0;
  QpProblem qp;
  qp.h = h;
  qp.c = c;
  qp.a_eq = empty_rows(n);
  qp.a_in = dense_rows(a);
  qp.b_in.assign(n, 0.4);

  QpSolution cold = solve_qp(qp);
  REQUIRE(cold.status == QpStatus::Optimal);
  QpSolution hot = solve_qp(qp, {}, &cold);
  REQUIRE(hot.status == QpStatus::Optimal);
  CHECK(hot.iterations <= cold.iterations);
  for (int j = 0; j < n; ++j) CHECK(std::fabs(hot.delta_z[j] - cold.delta_z[j]) < 1e-6);

  // A nearby problem also converges from the stale warm start.
  Vec c2 = c;
  c2[0] += 0.05;
  QpProblem qp2 = qp;
  qp2.c = c2;
  QpSolution near = solve_qp(qp2, {}, &cold);
  CHECK(near.status == QpStatus::Optimal);
}

TEST_CASE("settings without polish still meet tolerances") {
  Mat h = Mat::identity(2);
  Mat a = Mat::identity(2);
  QpProblem qp;
  qp.h = h;
  qp.c = {-2.0, 1.0};
  qp.a_eq = empty_rows(2);
  qp.a_in = dense_rows(a);
  qp.b_in = {1.0, 5.0};
  QpSettings st;
  st.polish = false;
  QpSolution sol = solve_qp(qp, st);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(!sol.polished);
  CHECK(std::fabs(sol.delta_z[0] - 1.0) < 1e-6);
  CHECK(kkt_stationarity(qp, sol) < 1e-5);
}
