#include "vigor/nn/matrix.hpp"

#include "vigor/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace vigor::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())}; }
MutMap view(Matrix& m) { return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())}; }

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_)
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " does not match " + shape_string());
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::column_copy(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::string Matrix::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_bt", a, b);
  Matrix out(a.rows(), b.rows());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_at", a, b);
  Matrix out(a.cols(), b.cols());
  if (out.empty() || a.rows() == 0) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Matrix hconcat(std::initializer_list<const Matrix*> blocks) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool first = true;
  for (const Matrix* m : blocks) {
    if (first) {
      rows = m->rows();
      first = false;
    } else if (m->rows() != rows) {
      throw ShapeError("hconcat: row count " + std::to_string(m->rows()) + " differs from " + std::to_string(rows));
    }
    cols += m->cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Matrix* m : blocks) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = m->row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += m->cols();
  }
  return out;
}

Matrix column_slice(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols())
    throw ShapeError("column_slice: columns [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + m.shape_string());
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto src = m.row(r).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

} // namespace vigor::nn
