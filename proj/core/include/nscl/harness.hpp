#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nscl/adam.hpp"
#include "nscl/covariance.hpp"
#include "nscl/dataset.hpp"
#include "nscl/network.hpp"
#include "nscl/null_space.hpp"

namespace nscl {

enum class TrainingMode { nscl, plain_adam };

/// Step size that is multiplied by `factor` at each listed epoch (0-based).
struct LrSchedule {
  double base = 5e-5;
  std::vector<std::size_t> decay_epochs{30, 60};
  double factor = 0.5;

  double at(std::size_t epoch) const;
};

struct TrainConfig {
  TrainingMode mode = TrainingMode::nscl;
  double a = 10.0;
  LrSchedule lr;
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t covariance_batch = 256;
  bool record_steps = true;
  // When > 0, every step is also trialled at this step size to check that
  // the projected update descends the batch loss.
  double descent_probe_lr = 0.0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Lower-triangular T×T table indexed by (after task t, evaluated task i),
/// 0-based, i ≤ t. Reading a cell above the diagonal or one never written
/// throws std::out_of_range.
class TaskMatrix {
 public:
  TaskMatrix() = default;
  explicit TaskMatrix(std::size_t tasks);

  std::size_t tasks() const noexcept { return tasks_; }
  void set(std::size_t after, std::size_t task, double value);
  double at(std::size_t after, std::size_t task) const;
  bool has(std::size_t after, std::size_t task) const;

  bool operator==(const TaskMatrix&) const = default;

 private:
  std::size_t tasks_ = 0;
  std::vector<double> values_;
  std::vector<bool> set_;
};

using AccuracyMatrix = TaskMatrix;

/// Mean accuracy over tasks 0..upto after finishing task `upto` (default: last).
double compute_acc(const AccuracyMatrix& m, std::optional<std::size_t> upto = {});

struct BwtResult {
  double value = 0.0;
  bool defined = false;  // false when fewer than 2 tasks have been seen
};

/// Mean of R[upto][i] − R[i][i] over i < upto (default: last task).
BwtResult compute_bwt(const AccuracyMatrix& m, std::optional<std::size_t> upto = {});

struct StepDiagnostic {
  TaskId task{};
  std::size_t step = 0;
  double loss = 0.0;
  double inner_product = 0.0;
  double candidate_norm = 0.0;
  double delta_norm = 0.0;
};

struct TaskTrainingSummary {
  TaskId task{};
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t steps = 0;
  std::size_t nonpositive_inner_steps = 0;
  double min_inner_product = 0.0;
  std::size_t empty_basis_steps = 0;
  // Filled when descent probing is on.
  std::size_t positive_raw_inner_steps = 0;
  std::size_t descending_steps = 0;
};

/// Trains one network over a task stream: projected Adam steps during each
/// task, then feature capture, covariance merge and basis recomputation.
class ContinualTrainer {
 public:
  ContinualTrainer(NetworkSpec spec, TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  const Network& network() const noexcept { return net_; }
  Network& network() noexcept { return net_; }
  const CovarianceState& covariance() const noexcept { return cov_; }
  std::size_t tasks_absorbed() const noexcept { return absorbed_; }

  /// Basis applied to the next task's steps, or nullptr (first task, or plain
  /// Adam mode).
  const NullSpaceBasis* active_basis() const noexcept;
  /// Basis computed after the most recent absorb_task (also in plain mode).
  const NullSpaceBasis& latest_basis() const noexcept { return basis_; }

  /// Adds a head for the task, trains it for the configured epochs (or until
  /// `max_steps`), then freezes the head.
  TaskTrainingSummary train_task(const TaskDataset& task,
                                 std::vector<StepDiagnostic>* diagnostics = nullptr,
                                 std::optional<std::size_t> max_steps = {});

  /// Captures the task's layer inputs with the current weights, merges them
  /// into the running covariance and recomputes every layer's basis.
  void absorb_task(const TaskDataset& task);

  double test_accuracy(const TaskDataset& task) const;
  double train_loss(const TaskDataset& task) const;

 private:
  TrainConfig config_;
  Network net_;
  Rng rng_;
  CovarianceState cov_;
  NullSpaceBasis basis_;
  std::size_t absorbed_ = 0;
};

struct RunReport {
  AccuracyMatrix accuracy;
  TaskMatrix train_loss;  // training loss of task i after finishing task t
  double acc = 0.0;
  BwtResult bwt;
  std::vector<TaskTrainingSummary> tasks;
  std::vector<NullSpaceBasis> spectra;  // spectra[t]: bases after task t
  std::vector<StepDiagnostic> steps;
  std::vector<std::string> warnings;
  CovarianceState covariance;
};

/// Sequential training over `tasks` in order; tasks must have distinct ids.
RunReport run_sequence(std::span<const TaskDataset> tasks, const NetworkSpec& spec,
                       const TrainConfig& config);

struct Lemma1Config {
  std::uint64_t seed = 1;
  bool relu = false;
  std::size_t input_dim = 8;
  std::size_t hidden = 8;
  std::size_t rank = 4;
  // 0 picks a default: enough samples to span the subspace, but few enough
  // that ReLU features of every layer stay rank deficient.
  std::size_t task1_samples = 0;
  std::size_t task2_samples = 64;
  std::size_t task2_steps = 600;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
};

struct Lemma1Report {
  double output_drift = 0.0;
  std::vector<double> feature_drift;  // per linear layer, max-abs
  double max_feature_drift = 0.0;
  std::vector<std::size_t> null_dims;  // exact null-space dimension per layer
  double task2_initial_loss = 0.0;
  double task2_final_loss = 0.0;
  std::size_t task2_steps = 0;
};

/// Trains task 1 on data confined to a `rank`-dimensional subspace, then
/// trains task 2 in the exact null space of task 1's features and measures
/// how far task 1's layer inputs and logits moved. Throws VerificationError
/// if some layer's covariance after task 1 has no exact null space.
Lemma1Report verify_lemma1(const Lemma1Config& config);

struct LossRetentionReport {
  TaskMatrix train_loss;
  // Per task p: max over later tasks t of (L[t][p] − L[p][p]) / L[p][p].
  std::vector<double> max_relative_increase;
};

LossRetentionReport verify_loss_retention(std::span<const TaskDataset> tasks,
                                          const NetworkSpec& spec, const TrainConfig& config);

struct SweepPoint {
  double a = 0.0;
  double acc = 0.0;
  double bwt = 0.0;
  double task1_loss_drift = 0.0;  // relative increase of task 1's training loss by the end
};

std::vector<SweepPoint> sweep_threshold(std::span<const TaskDataset> tasks,
                                        const NetworkSpec& spec, const TrainConfig& config,
                                        std::span<const double> a_values);

/// Desk-scale benchmark: 5 Gaussian-cluster tasks of 4 classes in 32
/// dimensions.
GaussianStreamConfig desk_stream_config(std::uint64_t seed);
/// Two shared dense layers of `hidden` units with ReLU.
NetworkSpec desk_mlp_spec(std::size_t input_dim = 32, std::size_t hidden = 64);
/// 1→4 channel 3×3 conv, ReLU, dense to 32, ReLU, on side×side images.
NetworkSpec desk_conv_spec(std::size_t side = 8);
/// a = 10, 20 epochs/task, batch 32, step size 3e-2 halved at epochs 8 and 15.
TrainConfig desk_train_config(std::uint64_t seed);

}  // namespace nscl
