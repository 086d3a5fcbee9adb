#include "nscl/network.hpp"

#include <algorithm>
#include <cmath>

#include "nscl/errors.hpp"

namespace nscl {

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, BiasMode bias) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in;
  s.out_dim = out;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
                            BiasMode bias) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel_h = kernel_h;
  s.kernel_w = kernel_w;
  s.stride = stride;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

Shape3 conv_output_shape(const Shape3& in, const LayerSpec& spec) {
  if (spec.kind != LayerKind::conv2d) throw ShapeError("conv_output_shape: not a conv layer");
  if (spec.kernel_h == 0 || spec.kernel_w == 0 || spec.stride == 0 || spec.out_channels == 0) {
    throw ShapeError("conv2d: kernel, stride and out_channels must be positive");
  }
  if (in.channels != spec.in_channels) {
    throw ShapeError("conv2d: expected " + std::to_string(spec.in_channels) +
                     " input channels, got " + std::to_string(in.channels));
  }
  if (in.height < spec.kernel_h || in.width < spec.kernel_w) {
    throw ShapeError("conv2d: input " + std::to_string(in.height) + "x" +
                     std::to_string(in.width) + " smaller than kernel " +
                     std::to_string(spec.kernel_h) + "x" + std::to_string(spec.kernel_w));
  }
  return {spec.out_channels, (in.height - spec.kernel_h) / spec.stride + 1,
          (in.width - spec.kernel_w) / spec.stride + 1};
}

std::size_t rows_per_sample(const Shape3& in, const LayerSpec& spec) {
  if (spec.kind == LayerKind::conv2d) {
    const Shape3 out = conv_output_shape(in, spec);
    return out.height * out.width;
  }
  return 1;
}

std::size_t feature_width(const LayerSpec& spec) {
  const std::size_t base = spec.kind == LayerKind::conv2d
                               ? spec.in_channels * spec.kernel_h * spec.kernel_w
                               : spec.in_dim;
  return base + (spec.augmented() ? 1 : 0);
}

Matrix im2col(const Matrix& input, const Shape3& in, const LayerSpec& spec) {
  const Shape3 out = conv_output_shape(in, spec);
  if (input.cols() != in.features()) {
    throw ShapeError("im2col: input width " + std::to_string(input.cols()) + " != C*H*W " +
                     std::to_string(in.features()));
  }
  const std::size_t positions = out.height * out.width;
  Matrix cols(input.rows() * positions, feature_width(spec));
  for (std::size_t n = 0; n < input.rows(); ++n) {
    auto sample = input.row(n);
    for (std::size_t oy = 0; oy < out.height; ++oy) {
      for (std::size_t ox = 0; ox < out.width; ++ox) {
        auto dst = cols.row(n * positions + oy * out.width + ox);
        std::size_t c = 0;
        for (std::size_t ch = 0; ch < in.channels; ++ch)
          for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
              const std::size_t y = oy * spec.stride + ky;
              const std::size_t x = ox * spec.stride + kx;
              dst[c++] = sample[(ch * in.height + y) * in.width + x];
            }
        if (spec.augmented()) dst[c] = 1.0;
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, std::size_t batch, const Shape3& in, const LayerSpec& spec) {
  const Shape3 out = conv_output_shape(in, spec);
  const std::size_t positions = out.height * out.width;
  if (cols.rows() != batch * positions ||
      cols.cols() != spec.in_channels * spec.kernel_h * spec.kernel_w) {
    throw ShapeError("col2im: unexpected patch matrix " + shape_string(cols));
  }
  Matrix image(batch, in.features());
  for (std::size_t n = 0; n < batch; ++n) {
    auto sample = image.row(n);
    for (std::size_t oy = 0; oy < out.height; ++oy) {
      for (std::size_t ox = 0; ox < out.width; ++ox) {
        auto src = cols.row(n * positions + oy * out.width + ox);
        std::size_t c = 0;
        for (std::size_t ch = 0; ch < in.channels; ++ch)
          for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
              const std::size_t y = oy * spec.stride + ky;
              const std::size_t x = ox * spec.stride + kx;
              sample[(ch * in.height + y) * in.width + x] += src[c++];
            }
      }
    }
  }
  return image;
}

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

// (B·P) x C patch-major outputs -> B x (C·P) channel-major activations.
Matrix patches_to_activation(const Matrix& o, std::size_t batch, std::size_t positions) {
  const std::size_t channels = o.cols();
  Matrix act(batch, channels * positions);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t c = 0; c < channels; ++c) act(n, c * positions + p) = o(n * positions + p, c);
  return act;
}

Matrix activation_to_patches(const Matrix& act, std::size_t positions, std::size_t channels) {
  const std::size_t batch = act.rows();
  Matrix o(batch * positions, channels);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t c = 0; c < channels; ++c) o(n * positions + p, c) = act(n, c * positions + p);
  return o;
}

}  // namespace

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.input.features() == 0) throw ShapeError("network input has no features");
  Rng rng(seed);
  Shape3 shape = spec_.input;
  shapes_.push_back(shape);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    switch (layer.kind) {
      case LayerKind::relu:
        break;
      case LayerKind::dense: {
        if (layer.in_dim != shape.features() || layer.out_dim == 0) {
          throw ShapeError("layer " + std::to_string(i) + ": dense expects " +
                           std::to_string(layer.in_dim) + " inputs, previous layer gives " +
                           std::to_string(shape.features()));
        }
        linear_to_layer_.push_back(i);
        weights_.push_back(uniform_matrix(feature_width(layer), layer.out_dim, layer.in_dim, rng));
        shape = {layer.out_dim, 1, 1};
        break;
      }
      case LayerKind::conv2d: {
        const Shape3 out = conv_output_shape(shape, layer);
        linear_to_layer_.push_back(i);
        const std::size_t fan_in = layer.in_channels * layer.kernel_h * layer.kernel_w;
        weights_.push_back(uniform_matrix(feature_width(layer), layer.out_channels, fan_in, rng));
        shape = out;
        break;
      }
    }
    shapes_.push_back(shape);
  }
}

const LayerSpec& Network::linear_spec(std::size_t linear) const {
  return spec_.layers.at(linear_to_layer_.at(linear));
}

void Network::add_head(TaskId task, std::size_t classes, Rng& rng) {
  if (heads_.contains(task)) throw LookupError("head for task " + to_string(task) + " exists");
  if (classes < 2) throw DataError("a task head needs at least 2 classes");
  const std::size_t in = output_shape().features();
  const std::size_t rows = in + (spec_.head_bias == BiasMode::augmented ? 1 : 0);
  heads_.emplace(task, uniform_matrix(rows, classes, in, rng));
}

Matrix& Network::head(TaskId task) {
  auto it = heads_.find(task);
  if (it == heads_.end()) throw LookupError("no head for task " + to_string(task));
  return it->second;
}

const Matrix& Network::head(TaskId task) const {
  auto it = heads_.find(task);
  if (it == heads_.end()) throw LookupError("no head for task " + to_string(task));
  return it->second;
}

void Network::freeze_head(TaskId task) {
  head(task);
  frozen_.insert(task);
}

ForwardTrace forward_features(const Network& net, const Matrix& x) {
  const auto& spec = net.spec();
  if (x.cols() != spec.input.features()) {
    throw ShapeError("forward: input width " + std::to_string(x.cols()) + " != " +
                     std::to_string(spec.input.features()));
  }
  ForwardTrace trace;
  trace.batch = x.rows();
  trace.activations.reserve(spec.layers.size() + 1);
  trace.activations.push_back(x);

  std::size_t linear = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const Matrix& a = trace.activations.back();
    switch (layer.kind) {
      case LayerKind::relu: {
        Matrix next = a;
        for (double& v : next.values()) v = v > 0.0 ? v : 0.0;
        trace.activations.push_back(std::move(next));
        break;
      }
      case LayerKind::dense: {
        Matrix features = layer.augmented() ? append_ones_column(a) : a;
        Matrix out = matmul(features, net.weights()[linear]);
        trace.activations.push_back(out);
        trace.features.push_back(std::move(features));
        trace.outputs.push_back(std::move(out));
        ++linear;
        break;
      }
      case LayerKind::conv2d: {
        const Shape3& in = net.layer_input_shape(i);
        Matrix features = im2col(a, in, layer);
        Matrix out = matmul(features, net.weights()[linear]);
        trace.activations.push_back(
            patches_to_activation(out, trace.batch, rows_per_sample(in, layer)));
        trace.features.push_back(std::move(features));
        trace.outputs.push_back(std::move(out));
        ++linear;
        break;
      }
    }
  }
  return trace;
}

ForwardTrace forward(const Network& net, const Matrix& x, TaskId task) {
  const Matrix& head = net.head(task);
  ForwardTrace trace = forward_features(net, x);
  trace.head_input = net.spec().head_bias == BiasMode::augmented
                         ? append_ones_column(trace.activations.back())
                         : trace.activations.back();
  trace.logits = matmul(trace.head_input, head);
  trace.has_logits = true;
  return trace;
}

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw DataError("label count " + std::to_string(labels.size()) + " != batch " +
                    std::to_string(rows));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) +
                      ")");
    }
  }
}

// Row-wise softmax probabilities; also returns the mean cross-entropy.
Matrix softmax(const Matrix& logits, std::span<const int> labels, double& loss) {
  Matrix p(logits.rows(), logits.cols());
  loss = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      p(i, j) = std::exp(z[j] - m);
      sum += p(i, j);
    }
    for (std::size_t j = 0; j < z.size(); ++j) p(i, j) /= sum;
    loss += std::log(sum) + m - z[static_cast<std::size_t>(labels[i])];
  }
  loss /= static_cast<double>(logits.rows());
  return p;
}

}  // namespace

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  check_labels(labels, logits.rows(), logits.cols());
  double loss = 0.0;
  softmax(logits, labels, loss);
  return loss;
}

Gradients backward(const Network& net, const ForwardTrace& trace, std::span<const int> labels,
                   TaskId task) {
  if (!trace.has_logits) throw ShapeError("backward: trace has no logits");
  const Matrix& head = net.head(task);
  check_labels(labels, trace.logits.rows(), trace.logits.cols());

  Gradients grads;
  Matrix d = softmax(trace.logits, labels, grads.loss);
  const double inv_batch = 1.0 / static_cast<double>(trace.batch);
  for (std::size_t i = 0; i < d.rows(); ++i) d(i, static_cast<std::size_t>(labels[i])) -= 1.0;
  for (double& v : d.values()) v *= inv_batch;

  grads.head = matmul_tn(trace.head_input, d);
  Matrix d_act = matmul_nt(d, head);
  if (net.spec().head_bias == BiasMode::augmented) d_act = drop_last_column(d_act);

  const auto& layers = net.spec().layers;
  grads.layers.resize(net.linear_layer_count());
  std::size_t linear = net.linear_layer_count();
  for (std::size_t i = layers.size(); i-- > 0;) {
    const LayerSpec& layer = layers[i];
    if (layer.kind == LayerKind::relu) {
      const Matrix& in = trace.activations[i];
      auto dv = d_act.values();
      auto iv = in.values();
      for (std::size_t k = 0; k < dv.size(); ++k)
        if (!(iv[k] > 0.0)) dv[k] = 0.0;
      continue;
    }
    --linear;
    const Matrix& w = net.weights()[linear];
    const Shape3& in_shape = net.layer_input_shape(i);
    Matrix d_out = layer.kind == LayerKind::conv2d
                       ? activation_to_patches(d_act, rows_per_sample(in_shape, layer),
                                               layer.out_channels)
                       : std::move(d_act);
    grads.layers[linear] = matmul_tn(trace.features[linear], d_out);
    if (i == 0) break;
    Matrix d_in = matmul_nt(d_out, w);
    if (layer.augmented()) d_in = drop_last_column(d_in);
    d_act = layer.kind == LayerKind::conv2d ? col2im(d_in, trace.batch, in_shape, layer)
                                            : std::move(d_in);
  }
  return grads;
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw DataError("accuracy: label count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace nscl
