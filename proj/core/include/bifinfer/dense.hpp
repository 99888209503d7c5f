#pragma once

// Small dense linear algebra over arbitrary (dual) scalars.
//
// Eigen is used for the double-only paths; these routines exist so that
// determinants and linear solves can be pushed through nested perturbations.
// Pivot decisions are made on real values only, so the derivative parts are
// the derivatives of the factorization at fixed pivot order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bifinfer/dual.hpp"

namespace bifinfer::dense {

template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, T(0.0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  T& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> a_;
};

/// In-place LU with partial pivoting. `perm_sign` is +-1; `singular` is set
/// when a pivot column is exactly zero.
template <class T>
struct LU {
  Matrix<T> lu;
  std::vector<std::size_t> perm;
  double perm_sign = 1.0;
  bool singular = false;
  double max_pivot = 0.0;
  double min_pivot = 0.0;
};

template <class T>
LU<T> lu_factor(Matrix<T> a) {
  const std::size_t n = a.rows();
  LU<T> out;
  out.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.perm[i] = i;
  out.min_pivot = n == 0 ? 0.0 : INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(value_of(a(k, k)));
    for (std::size_t i = k + 1; i < n; ++i) {
      double cand = std::abs(value_of(a(i, k)));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    out.max_pivot = std::max(out.max_pivot, best);
    out.min_pivot = std::min(out.min_pivot, best);
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(out.perm[k], out.perm[piv]);
      out.perm_sign = -out.perm_sign;
    }
    if (best == 0.0) {
      out.singular = true;
      continue;
    }
    const T inv = 1.0 / a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      T m = a(i, k) * inv;
      a(i, k) = m;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
    }
  }
  out.lu = std::move(a);
  return out;
}

template <class T>
T determinant(const LU<T>& f) {
  T det(f.perm_sign);
  for (std::size_t i = 0; i < f.lu.rows(); ++i) det = det * f.lu(i, i);
  return det;
}

template <class T>
T determinant(Matrix<T> a);

namespace detail {

// Cofactor expansion of the trailing block a[k:, k:] along its first column.
template <class T>
T expand_first_column(const Matrix<T>& a, std::size_t k) {
  const std::size_t n = a.rows();
  T sum(0.0);
  for (std::size_t i = k; i < n; ++i) {
    if (exactly_zero(a(i, k))) continue;
    Matrix<T> minor(n - k - 1, n - k - 1);
    for (std::size_t r = k, mr = 0; r < n; ++r) {
      if (r == i) continue;
      for (std::size_t c = k + 1; c < n; ++c) minor(mr, c - k - 1) = a(r, c);
      ++mr;
    }
    const T term = a(i, k) * determinant(std::move(minor));
    sum = (i - k) % 2 == 0 ? sum + term : sum - term;
  }
  return sum;
}

}  // namespace detail

/// Partial-pivoting elimination. A pivot column whose real parts all vanish
/// may still carry perturbations, so that block is expanded by cofactors
/// instead of being dropped.
template <class T>
T determinant(Matrix<T> a) {
  const std::size_t n = a.rows();
  T det(1.0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(value_of(a(k, k)));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double cand = std::abs(value_of(a(i, k)));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (best == 0.0) return det * detail::expand_first_column(a, k);
    if (piv != k) {
      for (std::size_t j = k; j < n; ++j) std::swap(a(k, j), a(piv, j));
      det = -det;
    }
    det = det * a(k, k);
    const T inv = 1.0 / a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const T m = a(i, k) * inv;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
    }
  }
  return det;
}

/// Solve A X = B for X given a factorization of A. Caller checks `singular`.
template <class T>
Matrix<T> lu_solve(const LU<T>& f, const Matrix<T>& b) {
  const std::size_t n = f.lu.rows();
  const std::size_t m = b.cols();
  Matrix<T> x(n, m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      T s = b(f.perm[i], c);
      for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x(j, c);
      x(i, c) = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      T s = x(ii, c);
      for (std::size_t j = ii + 1; j < n; ++j) s -= f.lu(ii, j) * x(j, c);
      x(ii, c) = s / f.lu(ii, ii);
    }
  }
  return x;
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace bifinfer::dense
