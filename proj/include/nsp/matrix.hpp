#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nsp {

// Dense row-major float64 matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double v);
  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);

// Square sparse matrix in CSR form with real values.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;  // n + 1 entries
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const noexcept { return col.size(); }

  // Value at (r, c), zero when absent. Columns are sorted so this is a
  // binary search.
  double at(std::size_t r, std::size_t c) const noexcept;

  // this * dense
  Matrix multiply(const Matrix& dense) const;
  // this * dense with row i of the result scaled by row_scale[i].
  Matrix multiply_row_scaled(const Matrix& dense, std::span<const double> row_scale) const;
  // this * (diag(row_scale) * dense)
  Matrix multiply_col_scaled(const Matrix& dense, std::span<const double> row_scale) const;

  Matrix to_dense() const;
};

}  // namespace nsp
