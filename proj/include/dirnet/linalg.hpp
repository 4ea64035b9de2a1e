#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dirnet/error.hpp"
#include "dirnet/matrix.hpp"

namespace dirnet {

// Cholesky factorization of a symmetric positive-definite matrix; returns
// false (leaving *chol unspecified) when a non-positive pivot appears.
inline bool cholesky(const DenseMatrix& a, DenseMatrix* chol) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("cholesky: matrix not square");
  DenseMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  *chol = std::move(l);
  return true;
}

// Solves A X = B for SPD A via Cholesky; adds `ridge` to the diagonal and
// retries if the factorization fails.
inline DenseMatrix spd_solve(const DenseMatrix& a, const DenseMatrix& b,
                             double ridge = 1e-8) {
  const std::size_t n = a.rows();
  if (b.rows() != n) throw ShapeError("spd_solve: rhs rows mismatch");
  DenseMatrix l;
  if (!cholesky(a, &l)) {
    DenseMatrix ar = a;
    for (std::size_t i = 0; i < n; ++i) ar(i, i) += ridge;
    if (!cholesky(ar, &l))
      throw DomainError("spd_solve: matrix not positive definite");
  }
  DenseMatrix x(n, b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  }
  return x;
}

}  // namespace dirnet
