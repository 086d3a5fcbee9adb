#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "nscl/covariance.hpp"
#include "nscl/matrix.hpp"

namespace nscl {

/// Approximate null space of one layer's feature covariance.
struct NullSpaceEntry {
  Matrix u2;                         // h x k, orthonormal columns
  std::vector<double> eigenvalues;   // full spectrum, descending, noise floor applied
  std::vector<bool> retained;        // retained[i] <=> eigenvalues[i] <= cutoff
  std::vector<double> lambda2;       // retained eigenvalues, descending
  double lambda_min = 0.0;
  double cutoff = 0.0;               // a·λ_min
  double r_proportion = 1.0;         // Σλ2 / Σλ

  std::size_t dim() const noexcept { return u2.rows(); }
  std::size_t k() const noexcept { return u2.cols(); }
};

/// One entry per linear layer.
using NullSpaceBasis = std::vector<NullSpaceEntry>;

/// Eigenvalues at or below this fraction of λ_max are treated as exactly zero.
inline constexpr double kEigenFloor = 1e-12;

/// Retains the eigenvectors of `cov` whose eigenvalues satisfy λ ≤ a·λ_min.
///
/// Throws ConfigError for a < 1 and NumericError when the covariance has an
/// eigenvalue below the PSD rounding tolerance.
NullSpaceEntry compute_null_basis(const Matrix& cov, double a);
NullSpaceBasis compute_null_bases(const CovarianceState& state, double a);

/// U₂·(U₂ᵀ·g); the h×h projector is never formed.
Matrix project_update(const NullSpaceEntry& basis, const Matrix& g);

/// Σ retained / Σ all, or 1 when the total is 0. `retained` must be a
/// sub-multiset of `all` (exact matches), otherwise std::logic_error.
double explained_proportion(std::span<const double> all, std::span<const double> retained);

/// CSV with header `index,eigenvalue,retained`.
void write_spectrum_csv(std::ostream& out, const NullSpaceEntry& entry);
/// CSV with header `task,layer,h,k,lambda_min,cutoff,r_proportion`, one row
/// per (task, layer). `per_task[t]` is the basis computed after task t+1.
void write_spectrum_summary_csv(std::ostream& out, std::span<const NullSpaceBasis> per_task);

}  // namespace nscl
