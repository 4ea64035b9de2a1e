#pragma once

// Dense and CSR matrix containers plus the elementary kernels the rest of
// the library is built on. Row-major dense storage; CSR (not CSC) for codes
// because inference multiplies code matrices by activation vectors row-wise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirnet/error.hpp"

namespace dirnet {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw ShapeError("DenseMatrix: empty shape");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::vector<double> col(std::size_t c) const {
    std::vector<double> v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = data_[r * cols_ + c];
    return v;
  }

  void set_col(std::size_t c, const std::vector<double>& v) {
    if (v.size() != rows_) throw ShapeError("set_col: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) data_[r * cols_ + c] = v[r];
  }

  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const DenseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // length rows+1
  std::vector<std::uint32_t> col_idx;
  std::vector<double> vals;

  std::size_t nnz() const { return vals.size(); }

  void validate() const {
    if (row_ptr.size() != rows + 1 || row_ptr.front() != 0 ||
        row_ptr.back() != vals.size() || col_idx.size() != vals.size())
      throw IntegrityError("CsrMatrix: row_ptr/nnz inconsistency");
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_ptr[r] > row_ptr[r + 1])
        throw IntegrityError("CsrMatrix: row_ptr not non-decreasing");
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        if (col_idx[k] >= cols)
          throw IntegrityError("CsrMatrix: column index out of range");
        if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1])
          throw IntegrityError("CsrMatrix: columns not strictly increasing");
        if (vals[k] == 0.0)
          throw IntegrityError("CsrMatrix: explicitly stored zero");
      }
    }
  }
};

// -- elementary kernels ------------------------------------------------------

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* oi = out.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) oi[j] += aik * bk[j];
    }
  }
  return out;
}

inline std::vector<double> matvec(const DenseMatrix& a,
                                  const std::vector<double>& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += ai[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y = A^T x
inline std::vector<double> matvec_t(const DenseMatrix& a,
                                    const std::vector<double>& x) {
  if (a.rows() != x.size()) throw ShapeError("matvec_t: dimension mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_ptr(i);
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * xi;
  }
  return y;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline std::vector<double> csr_matvec(const CsrMatrix& z,
                                      const std::vector<double>& x) {
  if (z.cols != x.size()) throw ShapeError("csr_matvec: dimension mismatch");
  std::vector<double> y(z.rows, 0.0);
  for (std::size_t r = 0; r < z.rows; ++r) {
    double acc = 0.0;
    for (std::size_t k = z.row_ptr[r]; k < z.row_ptr[r + 1]; ++k)
      acc += z.vals[k] * x[z.col_idx[k]];
    y[r] = acc;
  }
  return y;
}

inline double soft_threshold(double b, double lam) {
  if (lam < 0.0) throw DomainError("soft_threshold: negative threshold");
  if (b > lam) return b - lam;
  if (b < -lam) return b + lam;
  return 0.0;
}

inline double frob_norm_sq(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

inline CsrMatrix to_csr(const DenseMatrix& a, double eps) {
  if (eps < 0.0) throw DomainError("to_csr: negative eps");
  CsrMatrix z;
  z.rows = a.rows();
  z.cols = a.cols();
  z.row_ptr.assign(a.rows() + 1, 0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      double v = a(r, c);
      if (std::fabs(v) > eps) {
        z.col_idx.push_back(static_cast<std::uint32_t>(c));
        z.vals.push_back(v);
      }
    }
    z.row_ptr[r + 1] = z.vals.size();
  }
  return z;
}

inline DenseMatrix to_dense(const CsrMatrix& z) {
  DenseMatrix a(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r)
    for (std::size_t k = z.row_ptr[r]; k < z.row_ptr[r + 1]; ++k)
      a(r, z.col_idx[k]) = z.vals[k];
  return a;
}

// -- small vector helpers ----------------------------------------------------

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2_sq(const std::vector<double>& a) { return dot(a, a); }

inline double norm2(const std::vector<double>& a) {
  return std::sqrt(norm2_sq(a));
}

inline void axpy(double alpha, const std::vector<double>& x,
                 std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace dirnet
