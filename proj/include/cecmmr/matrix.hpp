#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "cecmmr/errors.hpp"

namespace cecmmr {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

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

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Rows of `source` listed in `indices`, in that order.
inline Matrix gather_rows(const Matrix& source, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), source.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= source.rows()) throw DimensionError("gather_rows: row index out of range");
    auto src = source.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

inline Vector gather(std::span<const double> source, std::span<const std::size_t> indices) {
  Vector out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= source.size()) throw DimensionError("gather: index out of range");
    out[i] = source[indices[i]];
  }
  return out;
}

}  // namespace cecmmr
