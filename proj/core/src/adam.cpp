#include "nscl/adam.hpp"

#include <cmath>

#include "nscl/errors.hpp"

namespace nscl {

AdamState::AdamState(std::span<const Matrix> params, AdamHyperparams hyper) : hyper_(hyper) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Matrix& p : params) {
    m_.emplace_back(p.rows(), p.cols());
    v_.emplace_back(p.rows(), p.cols());
  }
}

std::vector<Matrix> AdamState::candidate(std::span<const Matrix> grads) {
  if (grads.size() != m_.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " tensors, got " +
                     std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != m_[i].rows() || grads[i].cols() != m_[i].cols()) {
      throw ShapeError("adam: tensor " + std::to_string(i) + " is " + shape_string(grads[i]) +
                       ", expected " + shape_string(m_[i]));
    }
    if (!all_finite(grads[i])) {
      throw NumericError("adam: non-finite gradient in tensor " + std::to_string(i));
    }
  }

  ++step_;
  const double b1 = hyper_.beta1;
  const double b2 = hyper_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));

  std::vector<Matrix> out;
  out.reserve(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto g = grads[i].values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    Matrix dir(grads[i].rows(), grads[i].cols());
    auto d = dir.values();
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      d[k] = m_hat / (std::sqrt(v_hat) + hyper_.epsilon);
    }
    out.push_back(std::move(dir));
  }
  return out;
}

StepRecord project_candidate(const Network& net, TaskId active, const ParameterUpdate& candidate,
                             const NullSpaceBasis* basis) {
  const auto& weights = net.weights();
  if (candidate.layers.size() != weights.size()) {
    throw ShapeError("projected_step: " + std::to_string(candidate.layers.size()) +
                     " layer updates for " + std::to_string(weights.size()) + " layers");
  }
  if (basis != nullptr && basis->size() != weights.size()) {
    throw ShapeError("projected_step: basis has " + std::to_string(basis->size()) +
                     " layers, network has " + std::to_string(weights.size()));
  }
  if (net.is_frozen(active)) {
    throw LookupError("projected_step: head of task " + to_string(active) + " is frozen");
  }
  const Matrix& head = net.head(active);
  if (candidate.head.rows() != head.rows() || candidate.head.cols() != head.cols()) {
    throw ShapeError("projected_step: head update " + shape_string(candidate.head) +
                     " for head " + shape_string(head));
  }

  StepRecord record;
  record.layer_deltas.reserve(weights.size());
  double g_sq = 0.0;
  double d_sq = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Matrix& g = candidate.layers[l];
    if (g.rows() != weights[l].rows() || g.cols() != weights[l].cols()) {
      throw ShapeError("projected_step: layer " + std::to_string(l) + " update " +
                       shape_string(g) + " for weights " + shape_string(weights[l]));
    }
    Matrix delta = g;
    if (basis != nullptr) {
      const NullSpaceEntry& entry = (*basis)[l];
      if (entry.dim() != g.rows()) {
        throw ShapeError("projected_step: layer " + std::to_string(l) + " basis has dimension " +
                         std::to_string(entry.dim()) + ", weights have " +
                         std::to_string(g.rows()) + " rows");
      }
      if (entry.k() == 0) record.empty_layers.push_back(l);
      // A full-rank basis projects onto the whole space: U₂U₂ᵀ = I.
      if (entry.k() != entry.dim()) delta = project_update(entry, g);
    }
    record.inner_product += dot(delta, g);
    g_sq += dot(g, g);
    d_sq += dot(delta, delta);
    record.layer_deltas.push_back(std::move(delta));
  }
  record.candidate_norm = std::sqrt(g_sq);
  record.delta_norm = std::sqrt(d_sq);
  record.head_delta = candidate.head;
  return record;
}

void apply_step(Network& net, TaskId active, const StepRecord& record, double learning_rate) {
  if (net.is_frozen(active)) {
    throw LookupError("apply_step: head of task " + to_string(active) + " is frozen");
  }
  auto& weights = net.weights();
  if (record.layer_deltas.size() != weights.size()) {
    throw ShapeError("apply_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < weights.size(); ++l)
    weights[l] = scale_add(weights[l], 1.0, record.layer_deltas[l], -learning_rate);
  Matrix& head = net.head(active);
  head = scale_add(head, 1.0, record.head_delta, -learning_rate);
}

StepRecord projected_step(Network& net, TaskId active, const ParameterUpdate& candidate,
                          const NullSpaceBasis* basis, double learning_rate) {
  StepRecord record = project_candidate(net, active, candidate, basis);
  apply_step(net, active, record, learning_rate);
  return record;
}

}  // namespace nscl
