#include "nscl/dataset.hpp"

#include <cmath>

#include "nscl/errors.hpp"
#include "nscl/rng.hpp"

namespace nscl {

void TaskDataset::validate() const {
  const std::string where = "task " + to_string(id) + ": ";
  if (classes < 2) throw DataError(where + "needs at least 2 classes");
  if (train_x.rows() == 0 || test_x.rows() == 0) throw DataError(where + "empty train or test split");
  if (train_x.cols() != test_x.cols()) throw DataError(where + "train/test feature widths differ");
  if (train_y.size() != train_x.rows() || test_y.size() != test_x.rows()) {
    throw DataError(where + "label count does not match sample count");
  }
  auto check = [&](const std::vector<int>& labels) {
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= classes)
        throw DataError(where + "label " + std::to_string(y) + " outside [0, " +
                        std::to_string(classes) + ")");
  };
  check(train_y);
  check(test_y);
}

Matrix orthonormalize_columns(const Matrix& a) {
  Matrix q = a;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      double proj = 0.0;
      for (std::size_t r = 0; r < q.rows(); ++r) proj += q(r, i) * q(r, j);
      for (std::size_t r = 0; r < q.rows(); ++r) q(r, j) -= proj * q(r, i);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < q.rows(); ++r) norm += q(r, j) * q(r, j);
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw NumericError("orthonormalize_columns: dependent columns");
    for (std::size_t r = 0; r < q.rows(); ++r) q(r, j) /= norm;
  }
  return q;
}

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

}  // namespace

std::vector<TaskDataset> make_gaussian_stream(const GaussianStreamConfig& config) {
  if (config.subspace_dim == 0 || config.subspace_dim > config.dim) {
    throw ConfigError("gaussian stream: subspace_dim must be in [1, dim]");
  }
  if (config.classes < 2) throw ConfigError("gaussian stream: need at least 2 classes");
  Rng rng(config.seed);
  const std::size_t sub = config.subspace_dim;
  const Matrix common = orthonormalize_columns(gaussian_matrix(config.dim, sub, 1.0, rng));
  const double private_scale = (1.0 - config.shared_fraction) / std::sqrt(double(config.dim));

  std::vector<TaskDataset> tasks;
  for (std::size_t t = 0; t < config.tasks; ++t) {
    Matrix mix = gaussian_matrix(config.dim, sub, private_scale, rng);
    for (std::size_t r = 0; r < config.dim; ++r)
      for (std::size_t c = 0; c < sub; ++c) mix(r, c) += config.shared_fraction * common(r, c);
    const Matrix basis = orthonormalize_columns(mix);
    const Matrix means = gaussian_matrix(config.classes, sub, config.separation, rng);

    auto sample = [&](std::size_t n, Matrix& x, std::vector<int>& y) {
      x = Matrix(n, config.dim);
      y.resize(n);
      std::vector<double> z(sub);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % config.classes;
        y[i] = static_cast<int>(label);
        for (std::size_t c = 0; c < sub; ++c) z[c] = means(label, c) + rng.normal();
        for (std::size_t r = 0; r < config.dim; ++r) {
          double v = config.noise * rng.normal();
          for (std::size_t c = 0; c < sub; ++c) v += basis(r, c) * z[c];
          x(i, r) = v;
        }
      }
    };

    TaskDataset task;
    task.id = TaskId{static_cast<std::uint32_t>(t)};
    task.classes = config.classes;
    sample(config.train_per_task, task.train_x, task.train_y);
    sample(config.test_per_task, task.test_x, task.test_y);
    task.validate();
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<TaskDataset> make_image_stream(const ImageStreamConfig& config) {
  if (config.side < 2 || config.classes < 2) throw ConfigError("image stream: invalid geometry");
  Rng rng(config.seed);
  const std::size_t side = config.side;
  const std::size_t pixels = side * side;

  std::vector<TaskDataset> tasks;
  for (std::size_t t = 0; t < config.tasks; ++t) {
    std::vector<Matrix> prototypes;
    for (std::size_t c = 0; c < config.classes; ++c) {
      const Matrix raw = gaussian_matrix(side, side, 1.0, rng);
      Matrix smooth(side, side);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          double sum = 0.0;
          int count = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
              const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
              if (yy < 0 || xx < 0 || yy >= std::ptrdiff_t(side) || xx >= std::ptrdiff_t(side))
                continue;
              sum += raw(std::size_t(yy), std::size_t(xx));
              ++count;
            }
          smooth(y, x) = 2.0 * sum / count;
        }
      prototypes.push_back(std::move(smooth));
    }

    auto sample = [&](std::size_t n, Matrix& x, std::vector<int>& y) {
      x = Matrix(n, pixels);
      y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % config.classes;
        y[i] = static_cast<int>(label);
        auto proto = prototypes[label].values();
        for (std::size_t p = 0; p < pixels; ++p) x(i, p) = proto[p] + config.noise * rng.normal();
      }
    };

    TaskDataset task;
    task.id = TaskId{static_cast<std::uint32_t>(t)};
    task.classes = config.classes;
    sample(config.train_per_task, task.train_x, task.train_y);
    sample(config.test_per_task, task.test_x, task.test_y);
    task.validate();
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace nscl
