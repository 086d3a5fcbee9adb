#include "nscl/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "nscl/errors.hpp"

namespace nscl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

}  // namespace

// The i-k-j loop order accumulates every output cell over k in ascending order.
Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a) + " x " + shape_string(b));
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_string(a) + "^T x " + shape_string(b));
  }
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* arow = a.row(k).data();
    const double* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      double* out = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a) + " x " + shape_string(b) + "^T");
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += arow[k] * brow[k];
      c(i, j) = sum;
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(dot(a, a)); }

Matrix scale_add(const Matrix& a, double alpha, const Matrix& b, double beta) {
  require_same_shape(a, b, "scale_add");
  Matrix c(a.rows(), a.cols());
  auto av = a.values();
  auto bv = b.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = alpha * av[i] + beta * bv[i];
  return c;
}

double dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "dot");
  double sum = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) sum += av[i] * bv[i];
  return sum;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

bool all_finite(const Matrix& a) noexcept {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetrize: non-square " + shape_string(a));
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    s(i, i) = a(i, i);
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

double symmetry_residual(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetry_residual: non-square " + shape_string(a));
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - a(j, i)));
  return m;
}

Matrix append_ones_column(const Matrix& a) {
  Matrix out(a.rows(), a.cols() + 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst.back() = 1.0;
  }
  return out;
}

Matrix drop_last_column(const Matrix& a) {
  if (a.cols() == 0) throw ShapeError("drop_last_column: matrix has no columns");
  Matrix out(a.rows(), a.cols() - 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i);
    std::copy(src.begin(), src.end() - 1, out.row(i).begin());
  }
  return out;
}

Matrix select_rows(const Matrix& a, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) throw ShapeError("select_rows: index out of range");
    auto src = a.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix vstack(std::span<const Matrix> parts) {
  if (parts.empty()) return {};
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts.front().cols()) throw ShapeError("vstack: column mismatch");
    rows += p.rows();
  }
  std::vector<double> values;
  values.reserve(rows * parts.front().cols());
  for (const auto& p : parts) values.insert(values.end(), p.values().begin(), p.values().end());
  return Matrix(rows, parts.front().cols(), std::move(values));
}

}  // namespace nscl
