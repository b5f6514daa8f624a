#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vigor::nn {

/// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::vector<double> column_copy(std::size_t c) const;
  Matrix select_rows(std::span<const std::size_t> indices) const;

  /// "RxC" for error messages.
  std::string shape_string() const;

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);

/// Horizontal concatenation; all blocks must have the same row count.
Matrix hconcat(std::initializer_list<const Matrix*> blocks);

/// Columns [first, first + count) of m.
Matrix column_slice(const Matrix& m, std::size_t first, std::size_t count);

} // namespace vigor::nn
