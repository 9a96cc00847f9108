// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors

#include "conmpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conmpc/simd/kernels.hpp"

namespace conmpc {

namespace {
const simd::Ops& ops() { return simd::active_ops(); }
}  // namespace

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols, rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

void matvec(const Mat& A, const double* x, double* y) {
  for (int i = 0; i < A.rows; ++i) y[i] = ops().dot(A.row(i), x, A.cols);
}

void matvec_t(const Mat& A, const double* x, double* y) {
  std::fill(y, y + A.cols, 0.0);
  for (int i = 0; i < A.rows; ++i) ops().axpy(x[i], A.row(i), y, A.cols);
}

Mat matmul(const Mat& A, const Mat& B) {
  Mat c(A.rows, B.cols);
  const Mat bt = B.transposed();
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < B.cols; ++j) c(i, j) = ops().dot(A.row(i), bt.row(j), A.cols);
  }
  return c;
}

double dot(const Vec& x, const Vec& y) { return ops().dot(x.data(), y.data(), x.size()); }

double norm_inf(const Vec& x) { return ops().norm_inf(x.data(), x.size()); }

double norm2(const Vec& x) { return std::sqrt(ops().dot(x.data(), x.data(), x.size())); }

void axpy(double a, const Vec& x, Vec& y) { ops().axpy(a, x.data(), y.data(), x.size()); }

double symmetry_defect(const Mat& A) {
  double d = 0.0;
  for (int i = 0; i < A.rows; ++i) {
    for (int j = i + 1; j < A.cols; ++j) d = std::max(d, std::fabs(A(i, j) - A(j, i)));
  }
  return d;
}

Csr Csr::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  Csr m;
  m.rows = rows;
  m.cols = cols;
  m.indptr.assign(rows + 1, 0);
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const Triplet& t = triplets[k];
    if (k > 0 && triplets[k - 1].r == t.r && triplets[k - 1].c == t.c) {
      m.data.back() += t.v;
      continue;
    }
    m.indices.push_back(t.c);
    m.data.push_back(t.v);
    ++m.indptr[t.r + 1];
  }
  for (int r = 0; r < rows; ++r) m.indptr[r + 1] += m.indptr[r];
  return m;
}

Csr Csr::from_dense(const Mat& A, double drop_tol) {
  std::vector<Triplet> t;
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) {
      if (std::fabs(A(i, j)) > drop_tol) t.push_back({i, j, A(i, j)});
    }
  }
  return from_triplets(A.rows, A.cols, std::move(t));
}

Mat Csr::to_dense() const {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int k = indptr[r]; k < indptr[r + 1]; ++k) m(r, indices[k]) += data[k];
  }
  return m;
}

Csr Csr::transposed() const {
  std::vector<Triplet> t;
  t.reserve(data.size());
  for (int r = 0; r < rows; ++r) {
    for (int k = indptr[r]; k < indptr[r + 1]; ++k) t.push_back({indices[k], r, data[k]});
  }
  return from_triplets(cols, rows, std::move(t));
}

void Csr::matvec(const double* x, double* y) const {
  std::fill(y, y + rows, 0.0);
  matvec_add(x, y);
}

void Csr::matvec_add(const double* x, double* y) const {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = indptr[r]; k < indptr[r + 1]; ++k) s += data[k] * x[indices[k]];
    y[r] += s;
  }
}

bool Cholesky::factor(const Mat& A, double shift, double min_pivot) {
  n_ = A.rows;
  l_ = Mat(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A(i, j) + (i == j ? shift : 0.0);
      s -= ops().dot(l_.row(i), l_.row(j), j);
      if (j < i) {
        l_(i, j) = s / l_(j, j);
      } else {
        if (s < min_pivot) return false;
        l_(i, i) = std::sqrt(s);
      }
    }
  }
  lt_ = l_.transposed();
  return true;
}

void Cholesky::solve(Vec& b) const {
  for (int i = 0; i < n_; ++i) {
    b[i] = (b[i] - ops().dot(l_.row(i), b.data(), i)) / l_(i, i);
  }
  for (int i = n_ - 1; i >= 0; --i) {
    const double s = ops().dot(lt_.row(i) + i + 1, b.data() + i + 1, n_ - i - 1);
    b[i] = (b[i] - s) / lt_(i, i);
  }
}

bool LdltQuasidef::factor(const Mat& K, double min_pivot) {
  n_ = K.rows;
  l_ = Mat(n_, n_);
  d_.assign(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < i; ++j) {
      const double s = K(i, j) - ops().wdot(l_.row(i), l_.row(j), d_.data(), j);
      l_(i, j) = s / d_[j];
    }
    const double di = K(i, i) - ops().wdot(l_.row(i), l_.row(i), d_.data(), i);
    if (std::fabs(di) < min_pivot) return false;
    d_[i] = di;
    l_(i, i) = 1.0;
  }
  lt_ = l_.transposed();
  return true;
}

void LdltQuasidef::solve(Vec& b) const {
  for (int i = 0; i < n_; ++i) b[i] -= ops().dot(l_.row(i), b.data(), i);
  for (int i = 0; i < n_; ++i) b[i] /= d_[i];
  for (int i = n_ - 1; i >= 0; --i) {
    b[i] -= ops().dot(lt_.row(i) + i + 1, b.data() + i + 1, n_ - i - 1);
  }
}

namespace {

double offdiag_norm(const Mat& B) {
  double s = 0.0;
  for (int i = 0; i < B.rows; ++i) {
    for (int j = i + 1; j < B.cols; ++j) s += 2.0 * B(i, j) * B(i, j);
  }
  return std::sqrt(s);
}

}  // namespace

EigResult jacobi_eig(const Mat& A, int max_sweeps) {
  const int n = A.rows;
  double max_abs = 0.0;
  for (double v : A.a) max_abs = std::max(max_abs, std::fabs(v));
  if (symmetry_defect(A) > 1e-10 * std::max(1.0, max_abs)) {
    throw NotSymmetric("jacobi_eig: input symmetry defect exceeds 1e-10");
  }

  Mat b = A;
  // enforce exact symmetry so rotations stay two-sided consistent
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double m = 0.5 * (b(i, j) + b(j, i));
      b(i, j) = m;
      b(j, i) = m;
    }
  }
  Mat vt = Mat::identity(n);  // rows are eigenvector candidates

  double norm_f = 0.0;
  for (double v : b.a) norm_f += v * v;
  norm_f = std::sqrt(norm_f);
  const double tol = 1e-13 * std::max(1.0, norm_f);

  bool converged = offdiag_norm(b) <= tol;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = b(p, q);
        if (std::fabs(apq) < 1e-2 * tol / std::max(1, n)) continue;
        const double app = b(p, p);
        const double aqq = b(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // B <- J^T B (row mix), rot maps (a,b) to (c a + s b, -s a + c b)
        ops().rot(b.row(q), b.row(p), c, s, n);
        // B <- B J (column mix)
        for (int k = 0; k < n; ++k) {
          const double bkp = b(k, p);
          const double bkq = b(k, q);
          b(k, p) = c * bkp - s * bkq;
          b(k, q) = s * bkp + c * bkq;
        }
        b(p, q) = 0.0;
        b(q, p) = 0.0;
        ops().rot(vt.row(q), vt.row(p), c, s, n);
      }
    }
    converged = offdiag_norm(b) <= tol;
  }
  if (!converged) {
    throw NoConvergence("jacobi_eig: sweep limit reached before off-diagonal decay");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return b(i, i) < b(j, j); });

  EigResult r;
  r.eigenvalues.resize(n);
  r.vectors = Mat(n, n);
  for (int k = 0; k < n; ++k) {
    const int src = order[k];
    r.eigenvalues[k] = b(src, src);
    // deterministic sign: first entry of meaningful magnitude is positive
    double flip = 1.0;
    for (int i = 0; i < n; ++i) {
      if (std::fabs(vt(src, i)) > 1e-12) {
        flip = vt(src, i) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (int i = 0; i < n; ++i) r.vectors(i, k) = flip * vt(src, i);
  }
  return r;
}

Mat eig_clamp(const Mat& A, double floor, double* min_eig_out) {
  const EigResult e = jacobi_eig(A);
  if (min_eig_out != nullptr) *min_eig_out = e.eigenvalues.front();
  const int n = A.rows;
  Mat out(n, n);
  // out = sum_k max(lambda_k, floor) v_k v_k^T
  for (int k = 0; k < n; ++k) {
    const double lam = std::max(e.eigenvalues[k], floor);
    for (int i = 0; i < n; ++i) {
      const double w = lam * e.vectors(i, k);
      for (int j = 0; j < n; ++j) out(i, j) += w * e.vectors(j, k);
    }
  }
  // symmetrize away rounding
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double m = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = m;
      out(j, i) = m;
    }
  }
  return out;
}

}  // namespace conmpc
