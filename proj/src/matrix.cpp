#include "nsp/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "nsp/error.hpp"
#include "nsp/kernels.hpp"

namespace nsp {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "matrix data size does not match rows*cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

static void require_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "elementwise operands differ in shape");
  }
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other);
  kernels::axpy(1.0, other.data(), data());
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other);
  kernels::axpy(-1.0, other.data(), data());
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s != 0.0) kernels::axpy(s, b.row(k), out);
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "matmul_tn row counts");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto brow = b.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s != 0.0) kernels::axpy(s, brow, c.row(k));
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::ShapeMismatch, "matmul_nt column counts");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = kernels::dot(a.row(i), b.row(j));
  return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const noexcept {
  const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return val[static_cast<std::size_t>(it - col.begin())];
}

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  if (dense.rows() != n) throw Error(ErrorCode::ShapeMismatch, "spmm row count");
  Matrix out(n, dense.cols());
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r);
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e)
      kernels::axpy(val[e], dense.row(col[e]), dst);
  }
  return out;
}

Matrix SparseMatrix::multiply_row_scaled(const Matrix& dense,
                                         std::span<const double> row_scale) const {
  if (dense.rows() != n || row_scale.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "row-scaled spmm shapes");
  }
  Matrix out(n, dense.cols());
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r);
    const double s = row_scale[r];
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e)
      kernels::axpy(s * val[e], dense.row(col[e]), dst);
  }
  return out;
}

Matrix SparseMatrix::multiply_col_scaled(const Matrix& dense,
                                         std::span<const double> row_scale) const {
  if (dense.rows() != n || row_scale.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "col-scaled spmm shapes");
  }
  Matrix out(n, dense.cols());
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r);
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e)
      kernels::axpy(val[e] * row_scale[col[e]], dense.row(col[e]), dst);
  }
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) d(r, col[e]) = val[e];
  return d;
}

}  // namespace nsp
