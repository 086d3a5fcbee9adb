#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nscl/matrix.hpp"
#include "nscl/network.hpp"
#include "nscl/null_space.hpp"

namespace nscl {

struct AdamHyperparams {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments for an ordered list of tensors.
class AdamState {
 public:
  AdamState(std::span<const Matrix> params, AdamHyperparams hyper = {});

  const AdamHyperparams& hyper() const noexcept { return hyper_; }
  std::uint64_t step() const noexcept { return step_; }
  const std::vector<Matrix>& first_moment() const noexcept { return m_; }
  const std::vector<Matrix>& second_moment() const noexcept { return v_; }

  /// Advances the moments with `grads` and returns the bias-corrected
  /// direction m̂/(√v̂ + ε) per tensor. The learning rate is not applied.
  /// Throws ShapeError on mismatched tensors and NumericError (leaving the
  /// state untouched) on a non-finite gradient.
  std::vector<Matrix> candidate(std::span<const Matrix> grads);

 private:
  AdamHyperparams hyper_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t step_ = 0;
};

inline std::vector<Matrix> adam_candidate(AdamState& state, std::span<const Matrix> grads) {
  return state.candidate(grads);
}

/// Candidate update for one training step: shared layers plus the active head.
struct ParameterUpdate {
  std::vector<Matrix> layers;
  Matrix head;
};

struct StepRecord {
  std::vector<Matrix> layer_deltas;  // Δw per shared layer (before scaling by α)
  Matrix head_delta;
  double inner_product = 0.0;        // ⟨Δw, g⟩ over the shared layers
  double candidate_norm = 0.0;       // ‖g‖ over the shared layers
  double delta_norm = 0.0;           // ‖Δw‖ over the shared layers
  std::vector<std::size_t> empty_layers;  // layers whose basis had k = 0
};

/// Computes Δw for a candidate without touching the network. Same rules and
/// errors as projected_step.
StepRecord project_candidate(const Network& net, TaskId active, const ParameterUpdate& candidate,
                             const NullSpaceBasis* basis);

/// w ← w − α·Δw for the shared layers and the active head.
void apply_step(Network& net, TaskId active, const StepRecord& record, double learning_rate);

/// Applies w ← w − α·Δw. With a basis, each shared layer's Δw is the
/// projection of its candidate onto the retained null space; without one,
/// Δw = g. The active head always takes its candidate unprojected. Throws
/// LookupError if the head is frozen, ShapeError on basis/layer mismatch.
StepRecord projected_step(Network& net, TaskId active, const ParameterUpdate& candidate,
                          const NullSpaceBasis* basis, double learning_rate);

}  // namespace nscl
