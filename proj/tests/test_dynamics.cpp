// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "conmpc/dynamics.hpp"
#include "conmpc/errors.hpp"
#include "testutil.hpp"

using namespace conmpc;

namespace {

/// Toy model whose heading rate depends on absolute position; used to show
/// the invariance check actually detects position-dependent dynamics.
struct PositionCoupledModel final : AgentModel {
  int state_dim() const override { return 4; }
  int input_dim() const override { return 2; }
  void step(const double* x, const double* u, double* x_next) const override {
    x_next[0] = x[0] + 0.1 * u[0];
    x_next[1] = x[1] + 0.1 * u[1];
    x_next[2] = x[2] + 0.1 * x[0];  // depends on absolute px
    x_next[3] = x[3];
  }
  void jacobians(const double*, const double*, Mat* A, Mat* B) const override {
    if (A != nullptr) *A = Mat::identity(4);
    if (B != nullptr) *B = Mat(4, 2);
  }
};

}  // namespace

TEST_CASE("bicycle step matches the explicit update") {
  BicycleModel m;
  const double x[4] = {1.0, -2.0, 0.3, 0.01};
  const double u[2] = {2.5, -0.4};
  double y[4];
  m.step(x, u, y);
  CHECK(y[0] == doctest::Approx(1.0 + 0.1 * std::cos(0.3) * 2.5));
  CHECK(y[1] == doctest::Approx(-2.0 + 0.1 * std::sin(0.3) * 2.5));
  CHECK(y[2] == doctest::Approx(0.3 + 0.1 * (2.5 / 0.005) * std::tan(0.01)));
  CHECK(y[3] == doctest::Approx(0.01 + 0.1 * -0.4));
}

TEST_CASE("steady states are exactly the zero-input poses") {
  BicycleModel m;
  double y[4];
  const double x[4] = {3.0, 4.0, 1.2, 0.7};
  const double u0[2] = {0.0, 0.0};
  m.step(x, u0, y);
  for (int i = 0; i < 4; ++i) CHECK(y[i] == x[i]);

  // nonzero commanded speed always moves the pose
  const double u1[2] = {0.3, 0.0};
  m.step(x, u1, y);
  const double moved = std::hypot(y[0] - x[0], y[1] - x[1]);
  CHECK(moved == doctest::Approx(0.1 * 0.3));
}

TEST_CASE("step rejects a steering angle at the domain boundary") {
  BicycleModel m;
  const double x[4] = {0.0, 0.0, 0.0, M_PI_2};
  const double u[2] = {1.0, 0.0};
  double y[4];
  CHECK_THROWS_AS(m.step(x, u, y), NonFiniteState);
}

TEST_CASE("bicycle jacobians match finite differences") {
  BicycleModel m;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vec xu = testutil::random_vec(rng, 6, -1.2, 1.2);
    xu[3] *= 0.5;  // keep gamma well inside (-pi/2, pi/2)
    const auto f = [&](const Vec& q) {
      Vec out(4);
      m.step(&q[0], &q[4], out.data());
      return out;
    };
    const Mat fd = testutil::fd_jacobian(f, xu);
    Mat a, b;
    m.jacobians(&xu[0], &xu[4], &a, &b);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) CHECK(a(r, c) == doctest::Approx(fd(r, c)).epsilon(5e-6));
      for (int c = 0; c < 2; ++c) CHECK(b(r, c) == doctest::Approx(fd(r, 4 + c)).epsilon(5e-6));
    }
  }
}

TEST_CASE("jacobian closed forms at zero speed") {
  BicycleModel m;
  const double x[4] = {0.5, 0.5, 0.9, 0.2};
  const double u[2] = {0.0, 0.0};
  Mat a, b;
  m.jacobians(x, u, &a, &b);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) CHECK(a(r, c) == (r == c ? 1.0 : 0.0));
  }
  CHECK(b(3, 1) == doctest::Approx(0.1));
  CHECK(b(0, 0) == doctest::Approx(0.1 * std::cos(0.9)));
}

TEST_CASE("position invariance holds for the bicycle and fails for a coupled model") {
  BicycleModel m;
  const Vec x = {0.2, -0.4, 0.7, 0.05};
  const Vec u = {1.5, 0.2};
  const Vec offsets = {1.0, 0.0, 0.0, 1.0, -3.5, 2.25, 100.0, -250.0};
  CHECK(check_position_invariance(m, x, u, offsets) <= 1e-12);

  PositionCoupledModel bad;
  CHECK(check_position_invariance(bad, x, u, offsets) > 1e-3);
}
