// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "conmpc/linalg.hpp"
#include "testutil.hpp"

using namespace conmpc;

TEST_CASE("cholesky solves a random spd system") {
  std::mt19937_64 rng(7);
  for (int n : {1, 2, 5, 23, 80}) {
    const Mat a = testutil::random_spd(rng, n, 1.0);
    const Vec x_true = testutil::random_vec(rng, n);
    Vec b(n);
    matvec(a, x_true.data(), b.data());
    Cholesky chol;
    REQUIRE(chol.factor(a));
    chol.solve(b);
    for (int i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(x_true[i]).epsilon(1e-8));
  }
}

TEST_CASE("cholesky rejects an indefinite matrix") {
  Mat a(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -1.0;
  Cholesky chol;
  CHECK_FALSE(chol.factor(a));
}

TEST_CASE("quasidefinite ldlt solves a saddle system") {
  // [ H  G^T ] with H spd, lower-right block negated regularization
  // [ G  -dI ]
  std::mt19937_64 rng(9);
  const int n = 12, m = 5;
  const Mat h = testutil::random_spd(rng, n, 1.0);
  Mat k(n + m, n + m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) k(i, j) = h(i, j);
  }
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) {
      const double v = d(rng);
      k(n + r, c) = v;
      k(c, n + r) = v;
    }
    k(n + r, n + r) = -1e-9;
  }
  const Vec x_true = testutil::random_vec(rng, n + m);
  Vec b(n + m);
  matvec(k, x_true.data(), b.data());
  LdltQuasidef ldlt;
  REQUIRE(ldlt.factor(k));
  ldlt.solve(b);
  for (int i = 0; i < n + m; ++i) CHECK(b[i] == doctest::Approx(x_true[i]).epsilon(1e-6));
}

TEST_CASE("jacobi eigensolver diagonalizes known matrices") {
  SUBCASE("diagonal input") {
    Mat a(3, 3);
    a(0, 0) = 3.0;
    a(1, 1) = 1.0;
    a(2, 2) = 2.0;
    const EigResult e = jacobi_eig(a);
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(e.eigenvalues[1] == doctest::Approx(2.0));
    CHECK(e.eigenvalues[2] == doctest::Approx(3.0));
    CHECK(std::fabs(e.vectors(1, 0)) == doctest::Approx(1.0));
  }

  SUBCASE("2x2 closed form") {
    Mat a(2, 2);
    a(0, 0) = 2.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 2.0;
    const EigResult e = jacobi_eig(a);
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(e.eigenvalues[1] == doctest::Approx(3.0));
  }

  SUBCASE("random symmetric reconstruction") {
    std::mt19937_64 rng(21);
    for (int n : {2, 6, 33, 64}) {
      Mat a(n, n);
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
          const double v = d(rng);
          a(i, j) = v;
          a(j, i) = v;
        }
      }
      const EigResult e = jacobi_eig(a);
      // reconstruction residual ||V diag(l) V^T - A||_max
      Mat rec(n, n);
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) rec(i, j) += e.eigenvalues[k] * e.vectors(i, k) * e.vectors(j, k);
        }
      }
      double resid = 0.0;
      double ortho = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          resid = std::max(resid, std::fabs(rec(i, j) - a(i, j)));
          double g = 0.0;
          for (int k = 0; k < n; ++k) g += e.vectors(k, i) * e.vectors(k, j);
          ortho = std::max(ortho, std::fabs(g - (i == j ? 1.0 : 0.0)));
        }
      }
      CHECK(resid <= 1e-9);
      CHECK(ortho <= 1e-11);
      for (int k = 0; k + 1 < n; ++k) CHECK(e.eigenvalues[k] <= e.eigenvalues[k + 1]);
    }
  }
}

TEST_CASE("jacobi eigensolver rejects asymmetric input") {
  Mat a(2, 2);
  a(0, 1) = 1.0;
  a(1, 0) = 0.5;
  CHECK_THROWS_AS(jacobi_eig(a), NotSymmetric);
}

TEST_CASE("eig_clamp lifts the spectrum floor and keeps psd directions") {
  Mat a(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -2.0;
  double min_eig = 0.0;
  const Mat c = eig_clamp(a, 1e-6, &min_eig);
  CHECK(min_eig == doctest::Approx(-2.0));
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(1, 1) == doctest::Approx(1e-6));

  std::mt19937_64 rng(3);
  const Mat spd = testutil::random_spd(rng, 8, 1.0);
  const Mat kept = eig_clamp(spd, 1e-6, &min_eig);
  CHECK(min_eig > 0.0);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(kept(i, j) == doctest::Approx(spd(i, j)).epsilon(1e-10));
  }
}

TEST_CASE("csr round trip and transpose") {
  Mat a(3, 4);
  a(0, 1) = 2.0;
  a(1, 0) = -1.0;
  a(1, 3) = 4.0;
  a(2, 2) = 5.0;
  const Csr s = Csr::from_dense(a);
  CHECK(s.nnz() == 4);
  const Mat back = s.to_dense();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(back(i, j) == a(i, j));
  }
  const Mat at = s.transposed().to_dense();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(at(j, i) == a(i, j));
  }
  const Vec x = {1.0, 2.0, 3.0, 4.0};
  Vec y(3);
  s.matvec(x.data(), y.data());
  CHECK(y[0] == 4.0);
  CHECK(y[1] == 15.0);
  CHECK(y[2] == 15.0);

  // duplicate triplets are summed
  const Csr dup = Csr::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.5}, {1, 1, 1.0}});
  CHECK(dup.to_dense()(0, 0) == 3.5);
}
