// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include "conmpc/graph.hpp"

#include <cmath>
#include <limits>

namespace conmpc {

namespace {

constexpr double kCoincident = 1e-12;  // below this distance, derivatives are taken as 0

double dist(const double* pi, const double* pj, double* delta) {
  delta[0] = pi[0] - pj[0];
  delta[1] = pi[1] - pj[1];
  return std::sqrt(delta[0] * delta[0] + delta[1] * delta[1]);
}

}  // namespace

double WeightKernel::sigma2() const {
  return comm_radius * comm_radius / (2.0 * std::log(1.0 / epsilon));
}

double weight(const WeightKernel& k, const double* pi, const double* pj) {
  double delta[2];
  const double d = dist(pi, pj, delta);
  switch (k.type) {
    case KernelType::Gaussian:
      return std::exp(-d * d / (2.0 * k.sigma2()));
    case KernelType::TanhCutoff:
      return -0.5 * std::tanh(k.gain * (d - k.comm_radius)) + 0.5;
    case KernelType::DiracTest:
      return d <= k.comm_radius ? 1.0 : 0.0;
  }
  return 0.0;
}

void weight_grad(const WeightKernel& k, const double* pi, const double* pj, double* g) {
  double delta[2];
  const double d = dist(pi, pj, delta);
  g[0] = 0.0;
  g[1] = 0.0;
  if (k.type == KernelType::DiracTest || d < kCoincident) return;
  if (k.type == KernelType::Gaussian) {
    const double s2 = k.sigma2();
    const double phi = std::exp(-d * d / (2.0 * s2));
    g[0] = -phi * delta[0] / s2;
    g[1] = -phi * delta[1] / s2;
    return;
  }
  // tanh: d phi / d pi = phi'(d) * delta / d, phi'(d) = -0.5 gain sech^2
  const double a = k.gain * (d - k.comm_radius);
  const double ch = std::cosh(a);
  const double sech2 = 1.0 / (ch * ch);
  const double dphi = -0.5 * k.gain * sech2;
  g[0] = dphi * delta[0] / d;
  g[1] = dphi * delta[1] / d;
}

void weight_hess(const WeightKernel& k, const double* pi, const double* pj, double* h) {
  double delta[2];
  const double d = dist(pi, pj, delta);
  double hii[4] = {0.0, 0.0, 0.0, 0.0};  // d2 phi / d pi^2, row-major 2x2
  if (k.type == KernelType::Gaussian) {
    const double s2 = k.sigma2();
    const double phi = std::exp(-d * d / (2.0 * s2));
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        hii[2 * r + c] = phi * (delta[r] * delta[c] / (s2 * s2) - (r == c ? 1.0 / s2 : 0.0));
      }
    }
  } else if (k.type == KernelType::TanhCutoff && d >= kCoincident) {
    // radial f(d): f' = -0.5 g sech^2, f'' = g^2 sech^2 tanh
    // hessian = f'' u u^T + (f'/d)(I - u u^T), u = delta / d
    const double a = k.gain * (d - k.comm_radius);
    const double ch = std::cosh(a);
    const double sech2 = 1.0 / (ch * ch);
    const double th = std::tanh(a);
    const double f1 = -0.5 * k.gain * sech2;
    const double f2 = k.gain * k.gain * sech2 * th;
    const double u[2] = {delta[0] / d, delta[1] / d};
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        hii[2 * r + c] = f2 * u[r] * u[c] + (f1 / d) * ((r == c ? 1.0 : 0.0) - u[r] * u[c]);
      }
    }
  }
  // tanh at coincident points: flat to machine precision for gain*radius >> 1
  // cross blocks are the negation of the diagonal blocks since phi = phi(pi - pj)
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double v = hii[2 * r + c];
      h[4 * r + c] = v;              // (pi, pi)
      h[4 * r + (c + 2)] = -v;       // (pi, pj)
      h[4 * (r + 2) + c] = -v;       // (pj, pi)
      h[4 * (r + 2) + (c + 2)] = v;  // (pj, pj)
    }
  }
}

std::vector<int> WeightedLaplacian::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < agents; ++j) {
    if (is_edge(i, j)) out.push_back(j);
  }
  return out;
}

WeightedLaplacian build_laplacian(const Vec& positions, const WeightKernel& k,
                                  double edge_threshold) {
  const int m = static_cast<int>(positions.size() / 2);
  WeightedLaplacian lap;
  lap.agents = m;
  lap.edge_threshold = edge_threshold;
  lap.adjacency = Mat(m, m);
  lap.matrix = Mat(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double w = weight(k, &positions[2 * i], &positions[2 * j]);
      lap.adjacency(i, j) = w;
      lap.adjacency(j, i) = w;
    }
  }
  for (int i = 0; i < m; ++i) {
    double deg = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      deg += lap.adjacency(i, j);
      lap.matrix(i, j) = -lap.adjacency(i, j);
    }
    lap.matrix(i, i) = deg;
  }
  return lap;
}

FiedlerData fiedler(const WeightedLaplacian& lap, double gap_tol) {
  const EigResult e = jacobi_eig(lap.matrix);
  const int m = lap.agents;
  FiedlerData fd;
  fd.gap_tol = gap_tol;
  fd.eigenvalues = e.eigenvalues;
  fd.vectors = e.vectors;
  fd.lambda2 = e.eigenvalues[1];
  fd.gap_low = e.eigenvalues[1] - e.eigenvalues[0];
  fd.gap = m > 2 ? e.eigenvalues[2] - e.eigenvalues[1] : std::numeric_limits<double>::infinity();
  if (fd.gap < gap_tol) {
    throw DegenerateEigenvalue("fiedler: lambda3 - lambda2 below gap tolerance", fd.gap);
  }
  fd.v2.resize(m);
  for (int i = 0; i < m; ++i) fd.v2[i] = e.vectors(i, 1);
  return fd;
}

namespace {

void require_simple(const FiedlerData& fd, const char* who) {
  if (fd.gap_low <= fd.gap_tol || fd.gap <= fd.gap_tol) {
    throw DegenerateEigenvalue(std::string(who) + ": fiedler eigenvalue is not numerically simple",
                               std::min(fd.gap_low, fd.gap));
  }
}

/// Columns of W: W[:, 2i+c] = (dL / d p_i[c]) v2, using the pair structure of L.
Mat dl_times_v2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd) {
  const int m = static_cast<int>(fd.v2.size());
  Mat w(m, 2 * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      double g[2];
      weight_grad(k, &positions[2 * i], &positions[2 * j], g);
      const double dv = fd.v2[i] - fd.v2[j];
      for (int c = 0; c < 2; ++c) {
        // (dL v)_i = sum_j g_c (v_i - v_j), (dL v)_j = -g_c (v_i - v_j)
        w(i, 2 * i + c) += g[c] * dv;
        w(j, 2 * i + c) -= g[c] * dv;
      }
    }
  }
  return w;
}

}  // namespace

Vec grad_lambda2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd) {
  require_simple(fd, "grad_lambda2");
  const int m = static_cast<int>(fd.v2.size());
  Vec g(2 * m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      double wg[2];
      weight_grad(k, &positions[2 * i], &positions[2 * j], wg);
      const double dv = fd.v2[i] - fd.v2[j];
      const double s = dv * dv;
      g[2 * i] += s * wg[0];
      g[2 * i + 1] += s * wg[1];
      g[2 * j] -= s * wg[0];
      g[2 * j + 1] -= s * wg[1];
    }
  }
  return g;
}

Mat pinv_shifted(const FiedlerData& fd) {
  const int m = static_cast<int>(fd.v2.size());
  for (int t = 0; t < m; ++t) {
    if (t == 1) continue;
    if (std::fabs(fd.lambda2 - fd.eigenvalues[t]) <= fd.gap_tol) {
      throw DegenerateEigenvalue("pinv_shifted: eigenvalue collision with lambda2",
                                 std::fabs(fd.lambda2 - fd.eigenvalues[t]));
    }
  }
  Mat p(m, m);
  for (int t = 0; t < m; ++t) {
    if (t == 1) continue;
    const double inv = 1.0 / (fd.lambda2 - fd.eigenvalues[t]);
    for (int i = 0; i < m; ++i) {
      const double w = inv * fd.vectors(i, t);
      for (int j = 0; j < m; ++j) p(i, j) += w * fd.vectors(j, t);
    }
  }
  return p;
}

Mat grad_v2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd) {
  require_simple(fd, "grad_v2");
  const Mat p = pinv_shifted(fd);
  const Mat w = dl_times_v2(positions, k, fd);
  return matmul(p, w);
}

Mat hess_lambda2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd) {
  require_simple(fd, "hess_lambda2");
  const int m = static_cast<int>(fd.v2.size());
  const Mat p = pinv_shifted(fd);
  const Mat w = dl_times_v2(positions, k, fd);
  const Mat pw = matmul(p, w);

  // first + third term: 2 W^T P W (P symmetric makes the two equal)
  Mat h(2 * m, 2 * m);
  for (int a = 0; a < 2 * m; ++a) {
    for (int b = 0; b < 2 * m; ++b) {
      double s = 0.0;
      for (int r = 0; r < m; ++r) s += w(r, a) * pw(r, b);
      h(a, b) = 2.0 * s;
    }
  }

  // curvature of L itself: v2^T (d2 L / da db) v2 = sum_{i<j} (v_i - v_j)^2 d2 A_ij
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      double hw[16];
      weight_hess(k, &positions[2 * i], &positions[2 * j], hw);
      const double dv = fd.v2[i] - fd.v2[j];
      const double s = dv * dv;
      const int bi = 2 * i, bj = 2 * j;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
          h(bi + r, bi + c) += s * hw[4 * r + c];
          h(bi + r, bj + c) += s * hw[4 * r + (c + 2)];
          h(bj + r, bi + c) += s * hw[4 * (r + 2) + c];
          h(bj + r, bj + c) += s * hw[4 * (r + 2) + (c + 2)];
        }
      }
    }
  }

  // symmetrize away rounding
  for (int a = 0; a < 2 * m; ++a) {
    for (int b = a + 1; b < 2 * m; ++b) {
      const double v = 0.5 * (h(a, b) + h(b, a));
      h(a, b) = v;
      h(b, a) = v;
    }
  }
  return h;
}

}  // namespace conmpc
