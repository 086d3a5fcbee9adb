#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace nscl {

/// Dense row-major matrix of doubles.
///
/// All free functions below are pure and use a fixed summation order, so
/// repeated calls on identical inputs give bit-identical results.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
double frobenius_norm(const Matrix& a);
/// α·a + β·b.
Matrix scale_add(const Matrix& a, double alpha, const Matrix& b, double beta);

/// Frobenius inner product Σ a_ij b_ij.
double dot(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a) noexcept;

/// (a + aᵀ)/2.
Matrix symmetrize(const Matrix& a);
double symmetry_residual(const Matrix& a);

/// Appends a constant-1 column (bias feature).
Matrix append_ones_column(const Matrix& a);
/// Drops the trailing column.
Matrix drop_last_column(const Matrix& a);
Matrix select_rows(const Matrix& a, std::span<const std::size_t> indices);
Matrix vstack(std::span<const Matrix> parts);

}  // namespace nscl
