#include "nscl/sym_eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nscl/errors.hpp"

namespace nscl {

namespace {

constexpr double kSymmetryTolerance = 1e-8;
constexpr double kNegativeClamp = 1e-10;
constexpr double kSignTolerance = 1e-12;

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

// Applies the rotation that zeroes a(p, q) to both `a` (two-sided) and the
// accumulated eigenvector matrix `v` (right side).
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();

  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

SymEigResult sym_eig(const Matrix& input, const SymEigOptions& options) {
  if (input.rows() != input.cols()) {
    throw ShapeError("sym_eig: non-square matrix " + shape_string(input));
  }
  const std::size_t n = input.rows();
  const double norm = frobenius_norm(input);
  if (symmetry_residual(input) > kSymmetryTolerance * std::max(1.0, norm)) {
    throw ShapeError("sym_eig: matrix is not symmetric");
  }
  if (!all_finite(input)) throw NumericError("sym_eig: non-finite entry");

  Matrix a = symmetrize(input);
  Matrix v = Matrix::identity(n);
  SymEigResult result;

  const double target = options.tolerance * norm;
  double off = off_diagonal_norm(a);
  while (off > target) {
    if (result.sweeps >= options.max_sweeps) {
      throw NumericError("sym_eig: no convergence after " + std::to_string(options.max_sweeps) +
                         " sweeps, off-diagonal residual " + std::to_string(off));
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (a(p, q) != 0.0) rotate(a, v, p, q);
    ++result.sweeps;
    off = off_diagonal_norm(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  const double clamp = kNegativeClamp * std::max(1.0, norm);
  result.eigenvalues.resize(n);
  result.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    double lambda = a(src, src);
    if (lambda < 0.0 && lambda >= -clamp) lambda = 0.0;
    result.eigenvalues[j] = lambda;

    double sign = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(v(k, src)) > kSignTolerance) {
        sign = v(k, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t k = 0; k < n; ++k) result.eigenvectors(k, j) = sign * v(k, src);
  }
  return result;
}

}  // namespace nscl
