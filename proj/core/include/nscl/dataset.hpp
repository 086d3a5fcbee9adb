#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nscl/matrix.hpp"
#include "nscl/network.hpp"

namespace nscl {

/// Train/test split of one task. Labels are local to the task, in [0, classes).
struct TaskDataset {
  TaskId id{};
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  std::size_t classes = 0;

  /// Throws DataError unless both splits are non-empty, widths agree and every
  /// label is in range.
  void validate() const;
};

/// Gaussian-cluster classification stream. Each task draws a random
/// `subspace_dim`-dimensional subspace of the input space, mixed toward a
/// subspace common to all tasks by `shared_fraction`; class means live in
/// that subspace and samples add isotropic noise in the full space.
struct GaussianStreamConfig {
  std::size_t tasks = 5;
  std::size_t dim = 32;
  std::size_t subspace_dim = 8;
  double shared_fraction = 0.8;
  double separation = 1.5;
  double noise = 0.3;
  std::size_t classes = 4;
  std::size_t train_per_task = 256;
  std::size_t test_per_task = 256;
  std::uint64_t seed = 1;
};

std::vector<TaskDataset> make_gaussian_stream(const GaussianStreamConfig& config);

/// Single-channel square images: every class of every task has a smoothed
/// random prototype, samples add pixel noise.
struct ImageStreamConfig {
  std::size_t tasks = 3;
  std::size_t side = 8;
  std::size_t classes = 3;
  double noise = 0.5;
  std::size_t train_per_task = 96;
  std::size_t test_per_task = 96;
  std::uint64_t seed = 1;
};

std::vector<TaskDataset> make_image_stream(const ImageStreamConfig& config);

/// Orthonormalizes the columns of `a` (modified Gram-Schmidt). Throws
/// NumericError if the columns are numerically dependent.
Matrix orthonormalize_columns(const Matrix& a);

}  // namespace nscl
