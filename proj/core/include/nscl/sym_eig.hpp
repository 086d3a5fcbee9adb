#pragma once

#include <vector>

#include "nscl/matrix.hpp"

namespace nscl {

struct SymEigResult {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
  int sweeps = 0;
};

struct SymEigOptions {
  // Converged once the off-diagonal Frobenius mass is ≤ tolerance·‖A‖_F.
  double tolerance = 1e-12;
  int max_sweeps = 100;
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized first and must be symmetric within 1e-8. Each
/// eigenvector's first nonzero component is made positive. Negative
/// eigenvalues no larger in magnitude than 1e-10·max(1, ‖A‖_F) are rounding
/// noise and are returned as 0.
///
/// Throws ShapeError for non-square or asymmetric input and NumericError
/// (reporting the off-diagonal residual) when the sweep cap is hit.
SymEigResult sym_eig(const Matrix& a, const SymEigOptions& options = {});

}  // namespace nscl
