#include <doctest.h>

#include <cmath>
#include <limits>

#include "nscl/errors.hpp"
#include "nscl/sym_eig.hpp"
#include "../support/oracles.hpp"

using namespace nscl;

namespace {

double reconstruction_residual(const Matrix& a, const SymEigResult& r) {
  const Matrix vl = matmul(r.eigenvectors, Matrix::diagonal(r.eigenvalues));
  return frobenius_norm(scale_add(matmul_nt(vl, r.eigenvectors), 1.0, a, -1.0));
}

}  // namespace

TEST_CASE("3x3 eigenvalues match the characteristic polynomial roots") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_symmetric(3, rng);
    const auto expected = oracle::cubic_eigenvalues(a);
    const SymEigResult r = sym_eig(a);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r.eigenvalues[i] - expected[i]) <= 1e-8);
    CHECK(reconstruction_residual(a, r) <= 1e-9);
  }
}

TEST_CASE("larger matrices reconstruct and have orthonormal eigenvectors") {
  Rng rng(12);
  for (std::size_t n : {1u, 2u, 8u, 33u}) {
    const Matrix a = oracle::random_symmetric(n, rng);
    const SymEigResult r = sym_eig(a);
    CHECK(reconstruction_residual(a, r) <= 1e-9 * std::max(1.0, frobenius_norm(a)));
    CHECK(max_abs_diff(matmul_tn(r.eigenvectors, r.eigenvectors), Matrix::identity(n)) <= 1e-10);
    for (std::size_t i = 1; i < n; ++i) CHECK(r.eigenvalues[i - 1] >= r.eigenvalues[i]);
  }
}

TEST_CASE("diagonal input and sign convention") {
  const Matrix a{{1, 0, 0}, {0, 3, 0}, {0, 0, 2}};
  const SymEigResult r = sym_eig(a);
  CHECK(r.eigenvalues == std::vector<double>{3, 2, 1});
  CHECK(r.sweeps == 0);
  // First significant component of each eigenvector is positive.
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (std::abs(r.eigenvectors(i, j)) > 1e-12) {
        CHECK(r.eigenvectors(i, j) > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("repeated eigenvalues") {
  const SymEigResult r = sym_eig(Matrix::identity(4));
  for (double v : r.eigenvalues) CHECK(v == 1.0);
  CHECK(max_abs_diff(r.eigenvectors, Matrix::identity(4)) == 0.0);
}

TEST_CASE("rank-deficient PSD input has no negative eigenvalues") {
  Rng rng(5);
  const Matrix x = oracle::random_matrix(3, 10, rng);
  const Matrix cov = symmetrize(matmul_tn(x, x));
  const SymEigResult r = sym_eig(cov);
  for (double v : r.eigenvalues) CHECK(v >= 0.0);
  for (std::size_t i = 3; i < 10; ++i) CHECK(r.eigenvalues[i] <= 1e-10 * r.eigenvalues[0]);
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(sym_eig(Matrix{{1, 2}, {3, 1}}), ShapeError);
  CHECK_THROWS_AS(sym_eig(Matrix{{1, std::numeric_limits<double>::infinity()},
                                 {std::numeric_limits<double>::infinity(), 1}}),
                  NumericError);
  SymEigOptions none;
  none.max_sweeps = 0;
  CHECK_THROWS_AS(sym_eig(Matrix{{1, 1}, {1, 1}}, none), NumericError);
}
