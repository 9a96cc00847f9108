// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <vector>

#include "conmpc/linalg.hpp"

namespace conmpc {

enum class KernelType {
  Gaussian,    // exp(-|d|^2 / (2 sigma^2)), sigma set so the weight at comm_radius is epsilon
  TanhCutoff,  // -0.5 tanh(gain (|d| - comm_radius)) + 0.5
  DiracTest,   // exact 0/1 weights at comm_radius; test support, not differentiable
};

/// Smooth map from a pair of 2-D positions to an edge weight in (0, 1].
struct WeightKernel {
  KernelType type = KernelType::TanhCutoff;
  double comm_radius = 2.0;  // rho_c
  double epsilon = 0.01;     // Gaussian weight at comm_radius
  double gain = 10.0;        // tanh steepness

  /// Gaussian length scale from exp(-rho_c^2 / (2 sigma^2)) = epsilon.
  double sigma2() const;
};

/// Edge weight phi(pi, pj); pi and pj point at 2 doubles each.
double weight(const WeightKernel& k, const double* pi, const double* pj);

/// d phi / d pi, written to g[0..1]; d phi / d pj is its negation.
/// Zero at pi == pj (the kernels are flat there to machine precision).
void weight_grad(const WeightKernel& k, const double* pi, const double* pj, double* g);

/// 4x4 second derivative over (pi, pj), row-major into h[0..15].
/// Layout: [d2/dpi2, d2/dpi dpj; d2/dpj dpi, d2/dpj2].
void weight_hess(const WeightKernel& k, const double* pi, const double* pj, double* h);

/// Weighted graph Laplacian L = D - A with A_ij = phi(p_i, p_j), i != j.
struct WeightedLaplacian {
  int agents = 0;
  Mat matrix;               // L, symmetric, zero row sums
  Mat adjacency;            // A, zero diagonal
  double edge_threshold = 1e-3;  // A_ij >= threshold defines the message topology

  bool is_edge(int i, int j) const { return i != j && adjacency(i, j) >= edge_threshold; }
  std::vector<int> neighbors(int i) const;
};

/// positions holds (x_0, y_0, x_1, y_1, ...), 2*agents entries.
WeightedLaplacian build_laplacian(const Vec& positions, const WeightKernel& k,
                                  double edge_threshold = 1e-3);

/// Fiedler pair of a weighted Laplacian.
struct FiedlerData {
  double lambda2 = 0.0;
  Vec v2;             // unit norm, first entry of meaningful magnitude positive
  double gap = 0.0;   // lambda3 - lambda2; +inf for two agents
  double gap_low = 0.0;  // lambda2 - lambda1
  double gap_tol = 1e-6;
  Vec eigenvalues;    // full ascending spectrum
  Mat vectors;        // column k is eigenvector k
};

/// throws DegenerateEigenvalue when lambda3 - lambda2 < gap_tol (the
/// eigenvalue is not numerically simple from above). A disconnected graph
/// reports lambda2 = 0 without error.
FiedlerData fiedler(const WeightedLaplacian& lap, double gap_tol = 1e-6);

/// Gradient of lambda2 with respect to every position coordinate, size 2M:
/// d lambda2 / d p_i = sum_{j != i} (v2_i - v2_j)^2 * d A_ij / d p_i.
/// pre: lambda2 simple on both sides (throws DegenerateEigenvalue otherwise).
Vec grad_lambda2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd);

/// Spectral pseudoinverse (lambda2 I - L)^+ = sum_{k != 2} (lambda2 - lambda_k)^-1 v_k v_k^T.
/// Annihilates v2; throws DegenerateEigenvalue when any |lambda2 - lambda_k| <= gap_tol.
Mat pinv_shifted(const FiedlerData& fd);

/// Eigenvector sensitivity, M x 2M: column t is
/// d v2 / d theta_t = (lambda2 I - L)^+ (d L / d theta_t) v2.
Mat grad_v2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd);

/// Second derivative of lambda2 over all position coordinates, 2M x 2M:
/// H_ab = 2 (dL/da v2)^T P (dL/db v2) + v2^T (d2L/da db) v2, symmetrized.
Mat hess_lambda2(const Vec& positions, const WeightKernel& k, const FiedlerData& fd);

}  // namespace conmpc
