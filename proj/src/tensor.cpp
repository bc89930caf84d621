#include "fedia/tensor.hpp"

#include <cassert>
#include <stdexcept>
#include <utility>

namespace fedia {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data size does not match shape");
  }
}

Matrix matmul(const Matrix& a, std::span<const double> b, std::size_t out_cols) {
  assert(b.size() == a.cols() * out_cols);
  Matrix out(a.rows(), out_cols);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    const auto a_row = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a_row[k];
      if (aik == 0.0) continue;
      const double* b_row = b.data() + k * out_cols;
      for (std::size_t j = 0; j < out_cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

void accumulate_at_b(const Matrix& a, const Matrix& g, std::span<double> out) {
  assert(a.rows() == g.rows());
  assert(out.size() == a.cols() * g.cols());
  const std::size_t n = g.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto a_row = a.row(i);
    const auto g_row = g.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a_row[k];
      if (aik == 0.0) continue;
      double* out_row = out.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * g_row[j];
    }
  }
}

Matrix matmul_bt(const Matrix& g, std::span<const double> b, std::size_t out_cols) {
  assert(b.size() == out_cols * g.cols());
  Matrix out(g.rows(), out_cols);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const auto g_row = g.row(i);
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < out_cols; ++k) {
      const double* b_row = b.data() + k * g.cols();
      double acc = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) acc += g_row[j] * b_row[j];
      out_row[k] = acc;
    }
  }
  return out;
}

}  // namespace fedia
