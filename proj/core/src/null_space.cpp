#include "nscl/null_space.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "csv_format.hpp"
#include "nscl/errors.hpp"
#include "nscl/sym_eig.hpp"

namespace nscl {

NullSpaceEntry compute_null_basis(const Matrix& cov, double a) {
  if (!(a >= 1.0)) {
    throw ConfigError("null space threshold a must be >= 1, got " + std::to_string(a));
  }
  const SymEigResult eig = sym_eig(cov);
  const std::size_t h = eig.eigenvalues.size();

  NullSpaceEntry entry;
  entry.eigenvalues = eig.eigenvalues;
  if (h == 0) return entry;
  if (entry.eigenvalues.back() < 0.0) {
    throw NumericError("covariance is not positive semidefinite: eigenvalue " +
                       std::to_string(entry.eigenvalues.back()));
  }

  const double floor = kEigenFloor * entry.eigenvalues.front();
  for (double& lambda : entry.eigenvalues)
    if (lambda <= floor) lambda = 0.0;

  entry.lambda_min = entry.eigenvalues.back();
  entry.cutoff = a * entry.lambda_min;
  entry.retained.resize(h);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < h; ++i) {
    entry.retained[i] = entry.eigenvalues[i] <= entry.cutoff;
    if (entry.retained[i]) {
      keep.push_back(i);
      entry.lambda2.push_back(entry.eigenvalues[i]);
    }
  }
  entry.u2 = Matrix(h, keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j)
    for (std::size_t r = 0; r < h; ++r) entry.u2(r, j) = eig.eigenvectors(r, keep[j]);
  entry.r_proportion = explained_proportion(entry.eigenvalues, entry.lambda2);
  return entry;
}

NullSpaceBasis compute_null_bases(const CovarianceState& state, double a) {
  NullSpaceBasis basis;
  basis.reserve(state.layers.size());
  for (const auto& layer : state.layers) basis.push_back(compute_null_basis(layer.cov, a));
  return basis;
}

Matrix project_update(const NullSpaceEntry& basis, const Matrix& g) {
  if (g.rows() != basis.dim()) {
    throw ShapeError("project_update: update has " + std::to_string(g.rows()) +
                     " rows, basis dimension is " + std::to_string(basis.dim()));
  }
  return matmul(basis.u2, matmul_tn(basis.u2, g));
}

double explained_proportion(std::span<const double> all, std::span<const double> retained) {
  std::vector<double> pool(all.begin(), all.end());
  double retained_sum = 0.0;
  for (double r : retained) {
    auto it = std::find(pool.begin(), pool.end(), r);
    if (it == pool.end()) {
      throw std::logic_error("explained_proportion: retained eigenvalue " + std::to_string(r) +
                             " not in spectrum");
    }
    pool.erase(it);
    retained_sum += r;
  }
  double total = 0.0;
  for (double v : all) total += v;
  if (total == 0.0) return 1.0;
  return retained_sum / total;
}

void write_spectrum_csv(std::ostream& out, const NullSpaceEntry& entry) {
  out << "index,eigenvalue,retained\n";
  for (std::size_t i = 0; i < entry.eigenvalues.size(); ++i) {
    out << i << ',' << detail::format_double(entry.eigenvalues[i]) << ','
        << (entry.retained[i] ? 1 : 0) << '\n';
  }
}

void write_spectrum_summary_csv(std::ostream& out, std::span<const NullSpaceBasis> per_task) {
  out << "task,layer,h,k,lambda_min,cutoff,r_proportion\n";
  for (std::size_t t = 0; t < per_task.size(); ++t) {
    for (std::size_t l = 0; l < per_task[t].size(); ++l) {
      const auto& e = per_task[t][l];
      out << t + 1 << ',' << l + 1 << ',' << e.dim() << ',' << e.k() << ','
          << detail::format_double(e.lambda_min) << ',' << detail::format_double(e.cutoff) << ','
          << detail::format_double(e.r_proportion) << '\n';
    }
  }
}

}  // namespace nscl
