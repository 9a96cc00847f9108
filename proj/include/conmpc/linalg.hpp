// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <cstddef>
#include <vector>

#include "conmpc/errors.hpp"

namespace conmpc {

using Vec = std::vector<double>;

/// Dense row-major matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

  static Mat identity(int n);
  Mat transposed() const;
};

// Basic dense ops. y/out buffers must not alias inputs.
void matvec(const Mat& A, const double* x, double* y);         // y = A x
void matvec_t(const Mat& A, const double* x, double* y);       // y = A^T x
Mat matmul(const Mat& A, const Mat& B);
double dot(const Vec& x, const Vec& y);
double norm_inf(const Vec& x);
double norm2(const Vec& x);
void axpy(double a, const Vec& x, Vec& y);  // y += a x

/// Maximum symmetry defect max_ij |A_ij - A_ji|.
double symmetry_defect(const Mat& A);

/// Compressed sparse row matrix; rows hold column-sorted unique entries.
struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> indptr;   // size rows+1
  std::vector<int> indices;  // column index per entry
  Vec data;

  struct Triplet {
    int r;
    int c;
    double v;
  };

  /// Duplicate (r,c) entries are summed.
  static Csr from_triplets(int rows, int cols, std::vector<Triplet> triplets);
  static Csr from_dense(const Mat& A, double drop_tol = 0.0);
  Mat to_dense() const;
  Csr transposed() const;
  void matvec(const double* x, double* y) const;    // y = A x
  void matvec_add(const double* x, double* y) const;  // y += A x
  std::size_t nnz() const { return data.size(); }
};

/// Dense Cholesky A = L L^T for symmetric positive definite A.
/// Keeps L and L^T so both triangular solves run on contiguous rows.
struct Cholesky {
  /// Factors A + shift*I. Returns false when a pivot falls below min_pivot.
  bool factor(const Mat& A, double shift = 0.0, double min_pivot = 1e-13);
  /// Solves (L L^T) x = b in place.
  void solve(Vec& b) const;
  int dim() const { return n_; }

 private:
  int n_ = 0;
  Mat l_;   // lower triangle, unit stride rows
  Mat lt_;  // transpose of l_
};

/// LDL^T factorization without pivoting for symmetric quasidefinite matrices
/// (KKT systems with a positive definite (1,1) block and negated regularized
/// (2,2) block). Diagonal D keeps its sign pattern; no pivot may vanish.
struct LdltQuasidef {
  bool factor(const Mat& K, double min_pivot = 1e-300);
  void solve(Vec& b) const;
  int dim() const { return n_; }

 private:
  int n_ = 0;
  Mat l_;   // unit lower triangle
  Mat lt_;  // transpose of l_
  Vec d_;
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
struct EigResult {
  Vec eigenvalues;  // ascending
  Mat vectors;      // column k is the eigenvector of eigenvalues[k]
};

/// pre: A symmetric to 1e-10 (absolute, relative to max |entry|).
/// throws NotSymmetric, NoConvergence (off-diagonal mass left after
/// max_sweeps sweeps).
EigResult jacobi_eig(const Mat& A, int max_sweeps = 100);

/// Reassembles A with eigenvalues clamped to >= floor.
/// Returns the clamped matrix; min_eig_out receives the unclamped minimum.
Mat eig_clamp(const Mat& A, double floor, double* min_eig_out = nullptr);

}  // namespace conmpc
