#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nscl/matrix.hpp"
#include "nscl/rng.hpp"

namespace nscl {

enum class TaskId : std::uint32_t {};

inline std::uint32_t to_index(TaskId id) noexcept { return static_cast<std::uint32_t>(id); }
inline std::string to_string(TaskId id) { return std::to_string(to_index(id)); }

enum class LayerKind { dense, conv2d, relu };

/// `augmented` folds the bias into the weight matrix through a constant-1
/// feature column, so bias updates are projected like every other weight.
enum class BiasMode { augmented, none };

/// Activation layout: each sample is one row of channels·height·width values
/// in channel-major (CHW) order. Dense features are {n, 1, 1}.
struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t features() const noexcept { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  BiasMode bias = BiasMode::augmented;

  static LayerSpec dense(std::size_t in, std::size_t out, BiasMode bias = BiasMode::augmented);
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                          std::size_t kernel_w, std::size_t stride = 1,
                          BiasMode bias = BiasMode::augmented);
  static LayerSpec relu();

  bool is_linear() const noexcept { return kind != LayerKind::relu; }
  bool augmented() const noexcept { return bias == BiasMode::augmented; }
};

struct NetworkSpec {
  Shape3 input;
  std::vector<LayerSpec> layers;
  BiasMode head_bias = BiasMode::augmented;
};

/// Output shape of a conv layer on `in`; throws ShapeError when the kernel does
/// not fit or channels disagree.
Shape3 conv_output_shape(const Shape3& in, const LayerSpec& spec);

/// Rows of the feature matrix fed to a linear layer for a single sample
/// (patch positions for conv, 1 for dense).
std::size_t rows_per_sample(const Shape3& in, const LayerSpec& spec);

/// Columns of the feature matrix fed to a linear layer (h^l).
std::size_t feature_width(const LayerSpec& spec);

/// Patch matrix of a batch: one row per (sample, out_y, out_x), columns
/// ordered (channel, ky, kx) plus a trailing 1 when the layer is augmented.
Matrix im2col(const Matrix& input, const Shape3& in, const LayerSpec& spec);

/// Adjoint of im2col: scatters patch-row gradients back onto the input layout.
/// `cols` excludes the augmentation column.
Matrix col2im(const Matrix& cols, std::size_t batch, const Shape3& in, const LayerSpec& spec);

/// Feed-forward network of dense/conv/relu layers shared across tasks, plus
/// one linear classifier head per task.
class Network {
 public:
  /// Validates the layer chain and initializes weights uniformly in
  /// ±1/√fan_in from `seed`.
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }

  std::size_t linear_layer_count() const noexcept { return weights_.size(); }
  /// Index into spec().layers of the l-th linear layer.
  std::size_t layer_index(std::size_t linear) const { return linear_to_layer_.at(linear); }
  const LayerSpec& linear_spec(std::size_t linear) const;
  /// Input shape seen by spec().layers[i].
  const Shape3& layer_input_shape(std::size_t i) const { return shapes_.at(i); }
  const Shape3& output_shape() const noexcept { return shapes_.back(); }

  std::vector<Matrix>& weights() noexcept { return weights_; }
  const std::vector<Matrix>& weights() const noexcept { return weights_; }

  /// Adds a fresh head for `task` drawn from `rng`; throws if one exists.
  void add_head(TaskId task, std::size_t classes, Rng& rng);
  bool has_head(TaskId task) const { return heads_.contains(task); }
  Matrix& head(TaskId task);
  const Matrix& head(TaskId task) const;
  std::size_t head_classes(TaskId task) const { return head(task).cols(); }
  const std::map<TaskId, Matrix>& heads() const noexcept { return heads_; }

  void freeze_head(TaskId task);
  bool is_frozen(TaskId task) const { return frozen_.contains(task); }

 private:
  NetworkSpec spec_;
  std::vector<Shape3> shapes_;  // shapes_[i] = input of layer i; back() = network output
  std::vector<std::size_t> linear_to_layer_;
  std::vector<Matrix> weights_;
  std::map<TaskId, Matrix> heads_;
  std::set<TaskId> frozen_;
};

/// Everything a backward pass or a feature capture needs from one forward pass.
struct ForwardTrace {
  std::size_t batch = 0;
  // activations[i] is the input to spec.layers[i]; activations.back() feeds the head.
  std::vector<Matrix> activations;
  // Per linear layer: X^l (augmented when the layer has a bias) and O^l = X^l·w^l.
  std::vector<Matrix> features;
  std::vector<Matrix> outputs;
  Matrix head_input;
  Matrix logits;
  bool has_logits = false;
};

/// Forward pass through the shared layers only (no head required).
ForwardTrace forward_features(const Network& net, const Matrix& x);

/// Forward pass including the head of `task`; throws LookupError for an
/// unknown task and ShapeError when x does not match the input width.
ForwardTrace forward(const Network& net, const Matrix& x, TaskId task);

struct Gradients {
  std::vector<Matrix> layers;  // one per linear layer, shaped like its weights
  Matrix head;
  double loss = 0.0;
};

/// Mean softmax cross-entropy over the batch.
double cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Reverse-mode gradients of the mean cross-entropy for a traced batch.
/// Throws DataError for labels outside the head's class range.
Gradients backward(const Network& net, const ForwardTrace& trace, std::span<const int> labels,
                   TaskId task);

/// Fraction of rows whose argmax logit equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels);

}  // namespace nscl
