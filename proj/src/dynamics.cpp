// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include "conmpc/dynamics.hpp"

#include <cmath>

#include "conmpc/errors.hpp"

namespace conmpc {

void BicycleModel::step(const double* x, const double* u, double* x_next) const {
  if (std::fabs(x[3]) >= M_PI_2) {
    throw NonFiniteState("bicycle step: |gamma| at or past pi/2");
  }
  const double c = std::cos(x[2]);
  const double s = std::sin(x[2]);
  x_next[0] = x[0] + p_.ts * c * u[0];
  x_next[1] = x[1] + p_.ts * s * u[0];
  x_next[2] = x[2] + p_.ts * (u[0] / p_.wheelbase) * std::tan(x[3]);
  x_next[3] = x[3] + p_.ts * u[1];
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(x_next[i])) {
      throw NonFiniteState("bicycle step: non-finite successor state");
    }
  }
}

void BicycleModel::jacobians(const double* x, const double* u, Mat* A, Mat* B) const {
  const double c = std::cos(x[2]);
  const double s = std::sin(x[2]);
  const double tg = std::tan(x[3]);
  const double sec2 = 1.0 + tg * tg;
  if (A != nullptr) {
    *A = Mat::identity(4);
    (*A)(0, 2) = -p_.ts * s * u[0];
    (*A)(1, 2) = p_.ts * c * u[0];
    (*A)(2, 3) = p_.ts * (u[0] / p_.wheelbase) * sec2;
  }
  if (B != nullptr) {
    *B = Mat(4, 2);
    (*B)(0, 0) = p_.ts * c;
    (*B)(1, 0) = p_.ts * s;
    (*B)(2, 0) = p_.ts * tg / p_.wheelbase;
    (*B)(3, 1) = p_.ts;
  }
}

double check_position_invariance(const AgentModel& model, const Vec& x, const Vec& u,
                                 const Vec& offsets) {
  const int n = model.state_dim();
  double worst = 0.0;
  Vec base(n), shifted_in(n), shifted_out(n);
  model.step(x.data(), u.data(), base.data());
  for (std::size_t k = 0; k + 1 < offsets.size(); k += 2) {
    shifted_in = x;
    shifted_in[0] += offsets[k];
    shifted_in[1] += offsets[k + 1];
    model.step(shifted_in.data(), u.data(), shifted_out.data());
    for (int i = 0; i < n; ++i) {
      const double want = base[i] + (i == 0 ? offsets[k] : (i == 1 ? offsets[k + 1] : 0.0));
      worst = std::max(worst, std::fabs(shifted_out[i] - want));
    }
  }
  return worst;
}

}  // namespace conmpc
