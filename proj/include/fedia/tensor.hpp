#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedia {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out = a * b, with b given as a row-major [a.cols x out_cols] block.
Matrix matmul(const Matrix& a, std::span<const double> b, std::size_t out_cols);

/// out += a^T * g, accumulated into a row-major [a.cols x g.cols] block.
void accumulate_at_b(const Matrix& a, const Matrix& g, std::span<double> out);

/// out = g * b^T, with b given as a row-major [out_cols x g.cols] block.
Matrix matmul_bt(const Matrix& g, std::span<const double> b, std::size_t out_cols);

}  // namespace fedia
