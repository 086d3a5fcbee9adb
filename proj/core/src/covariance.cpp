#include "nscl/covariance.hpp"

#include <algorithm>
#include <fstream>

#include "binary_io.hpp"
#include "nscl/errors.hpp"

namespace nscl {

namespace {

constexpr char kMagic[] = "NSCLCOV1";
constexpr std::uint32_t kVersion = 1;

void add_into(Matrix& acc, const Matrix& term) {
  auto a = acc.values();
  auto t = term.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += t[i];
}

}  // namespace

CovarianceState CovarianceState::empty_for(const Network& net) {
  CovarianceState state;
  for (std::size_t l = 0; l < net.linear_layer_count(); ++l) {
    const std::size_t h = net.weights()[l].rows();
    state.layers.push_back({Matrix(h, h), 0});
  }
  return state;
}

LayerCovariance accumulate_covariance(std::span<const Matrix> feature_batches) {
  LayerCovariance out;
  for (const Matrix& x : feature_batches) {
    if (out.cov.empty()) out.cov = Matrix(x.cols(), x.cols());
    if (x.cols() != out.cov.cols()) throw ShapeError("accumulate_covariance: width changed");
    add_into(out.cov, matmul_tn(x, x));
    out.n_seen += x.rows();
  }
  if (out.n_seen == 0) throw DataError("accumulate_covariance: no feature rows");
  const double inv = 1.0 / static_cast<double>(out.n_seen);
  for (double& v : out.cov.values()) v *= inv;
  out.cov = symmetrize(out.cov);
  return out;
}

std::vector<LayerCovariance> accumulate_task_covariance(const Network& net, const Matrix& inputs,
                                                        std::size_t batch_size) {
  if (inputs.rows() == 0) throw DataError("accumulate_task_covariance: empty dataset");
  if (batch_size == 0) throw ConfigError("accumulate_task_covariance: batch size must be >= 1");

  const std::size_t layers = net.linear_layer_count();
  std::vector<LayerCovariance> sums(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t h = net.weights()[l].rows();
    sums[l].cov = Matrix(h, h);
  }

  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.rows(); start += batch_size) {
    const std::size_t end = std::min(inputs.rows(), start + batch_size);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const ForwardTrace trace = forward_features(net, select_rows(inputs, idx));
    for (std::size_t l = 0; l < layers; ++l) {
      add_into(sums[l].cov, matmul_tn(trace.features[l], trace.features[l]));
      sums[l].n_seen += trace.features[l].rows();
    }
  }
  for (auto& layer : sums) {
    const double inv = 1.0 / static_cast<double>(layer.n_seen);
    for (double& v : layer.cov.values()) v *= inv;
    layer.cov = symmetrize(layer.cov);
  }
  return sums;
}

LayerCovariance merge_covariance(const LayerCovariance& state, const LayerCovariance& task) {
  if (state.cov.rows() != task.cov.rows() || state.cov.cols() != task.cov.cols()) {
    throw ShapeError("merge_covariance: " + shape_string(state.cov) + " vs " +
                     shape_string(task.cov));
  }
  LayerCovariance merged;
  merged.n_seen = state.n_seen + task.n_seen;
  if (merged.n_seen == 0) {
    merged.cov = state.cov;
    return merged;
  }
  if (state.n_seen == 0) {
    merged.cov = symmetrize(task.cov);
    return merged;
  }
  const double total = static_cast<double>(merged.n_seen);
  merged.cov = symmetrize(scale_add(state.cov, static_cast<double>(state.n_seen) / total,
                                    task.cov, static_cast<double>(task.n_seen) / total));
  return merged;
}

CovarianceState merge_covariance(const CovarianceState& state,
                                 std::span<const LayerCovariance> task) {
  if (state.layers.size() != task.size()) {
    throw ShapeError("merge_covariance: layer count " + std::to_string(state.layers.size()) +
                     " vs " + std::to_string(task.size()));
  }
  CovarianceState merged;
  merged.layers.reserve(task.size());
  for (std::size_t l = 0; l < task.size(); ++l)
    merged.layers.push_back(merge_covariance(state.layers[l], task[l]));
  return merged;
}

void write_checkpoint(std::ostream& out, const CovarianceState& state) {
  out.write(kMagic, 8);
  detail::write_le<std::uint32_t>(out, kVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(state.layers.size()));
  for (const auto& layer : state.layers) {
    detail::write_le<std::uint64_t>(out, layer.cov.rows());
    detail::write_le<std::uint64_t>(out, layer.n_seen);
  }
  for (const auto& layer : state.layers)
    for (double v : layer.cov.values()) detail::write_f64(out, v);
}

CovarianceState read_checkpoint(std::istream& in) {
  detail::LeReader reader(in);
  if (reader.read_bytes(8, "magic") != std::string(kMagic, 8)) {
    throw ParseError("not a covariance checkpoint (bad magic)", 0);
  }
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  const auto count = reader.read<std::uint32_t>("layer count");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> dims;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto offset = reader.offset();
    const auto dim = reader.read<std::uint64_t>("layer dim");
    const auto n = reader.read<std::uint64_t>("layer n_seen");
    if (dim == 0 || dim > (1u << 16)) {
      throw ParseError("implausible layer dimension " + std::to_string(dim), offset);
    }
    dims.emplace_back(dim, n);
  }
  CovarianceState state;
  for (const auto& [dim, n] : dims) {
    LayerCovariance layer{Matrix(dim, dim), n};
    for (double& v : layer.cov.values()) v = reader.read_f64("covariance entry");
    state.layers.push_back(std::move(layer));
  }
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const CovarianceState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, state);
  if (!out) throw DataError("failed writing " + path.string());
}

CovarianceState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace nscl
