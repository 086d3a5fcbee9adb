#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "nscl/matrix.hpp"
#include "nscl/network.hpp"

namespace nscl {

/// Uncentered feature covariance of one linear layer together with the number
/// of feature rows behind it (samples for dense layers, patches for conv).
struct LayerCovariance {
  Matrix cov;
  std::uint64_t n_seen = 0;
};

/// Running covariance of all previous tasks' layer inputs. Its size depends
/// only on the layer widths, never on the number of tasks or samples.
struct CovarianceState {
  std::vector<LayerCovariance> layers;

  /// Zero covariance (n̄ = 0) sized for every linear layer of `net`.
  static CovarianceState empty_for(const Network& net);
};

/// (1/n)·Σ_batches XᵀX over feature batches taken in order. Throws DataError
/// when there are no rows.
LayerCovariance accumulate_covariance(std::span<const Matrix> feature_batches);

/// Runs `inputs` through the shared layers of `net` in fixed batches (no
/// parameter updates) and accumulates each linear layer's input covariance.
std::vector<LayerCovariance> accumulate_task_covariance(const Network& net, const Matrix& inputs,
                                                        std::size_t batch_size);

/// Weighted merge: cov ← (n̄/(n̄+n))·cov + (n/(n̄+n))·task, re-symmetrized.
LayerCovariance merge_covariance(const LayerCovariance& state, const LayerCovariance& task);
CovarianceState merge_covariance(const CovarianceState& state,
                                 std::span<const LayerCovariance> task);

/// Binary checkpoint, all integers and floats little-endian:
///   8 bytes magic "NSCLCOV1", u32 version (1), u32 layer count L,
///   L × (u64 dim, u64 n_seen), then each layer's dim² f64 row-major.
void write_checkpoint(std::ostream& out, const CovarianceState& state);
CovarianceState read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const CovarianceState& state);
CovarianceState load_checkpoint(const std::filesystem::path& path);

}  // namespace nscl
