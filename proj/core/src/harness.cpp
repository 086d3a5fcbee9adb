#include "nscl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "nscl/errors.hpp"

namespace nscl {

double LrSchedule::at(std::size_t epoch) const {
  double lr = base;
  for (std::size_t e : decay_epochs)
    if (epoch >= e) lr *= factor;
  return lr;
}

void TrainConfig::validate() const {
  if (!(a >= 1.0) || !std::isfinite(a)) throw ConfigError("a must be a finite value >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(lr.base > 0.0) || !std::isfinite(lr.base)) throw ConfigError("lr must be positive");
  if (!(lr.factor > 0.0) || !std::isfinite(lr.factor)) {
    throw ConfigError("lr_decay_factor must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (covariance_batch == 0) throw ConfigError("covariance_batch must be >= 1");
  if (descent_probe_lr < 0.0) throw ConfigError("descent_probe_lr must be >= 0");
}

// ---------------------------------------------------------------------------
// TaskMatrix and metrics

TaskMatrix::TaskMatrix(std::size_t tasks)
    : tasks_(tasks), values_(tasks * tasks, 0.0), set_(tasks * tasks, false) {}

void TaskMatrix::set(std::size_t after, std::size_t task, double value) {
  if (after >= tasks_ || task > after) throw std::out_of_range("TaskMatrix::set: bad cell");
  values_[after * tasks_ + task] = value;
  set_[after * tasks_ + task] = true;
}

bool TaskMatrix::has(std::size_t after, std::size_t task) const {
  return after < tasks_ && task <= after && set_[after * tasks_ + task];
}

double TaskMatrix::at(std::size_t after, std::size_t task) const {
  if (!has(after, task)) {
    throw std::out_of_range("TaskMatrix: cell (" + std::to_string(after) + ", " +
                            std::to_string(task) + ") is undefined");
  }
  return values_[after * tasks_ + task];
}

double compute_acc(const AccuracyMatrix& m, std::optional<std::size_t> upto) {
  if (m.tasks() == 0) throw DataError("compute_acc: empty accuracy matrix");
  const std::size_t t = upto.value_or(m.tasks() - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i <= t; ++i) sum += m.at(t, i);
  return sum / static_cast<double>(t + 1);
}

BwtResult compute_bwt(const AccuracyMatrix& m, std::optional<std::size_t> upto) {
  if (m.tasks() == 0) throw DataError("compute_bwt: empty accuracy matrix");
  const std::size_t t = upto.value_or(m.tasks() - 1);
  if (t == 0) return {0.0, false};
  double sum = 0.0;
  for (std::size_t i = 0; i < t; ++i) sum += m.at(t, i) - m.at(i, i);
  return {sum / static_cast<double>(t), true};
}

// ---------------------------------------------------------------------------
// ContinualTrainer

namespace {

constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ULL;
constexpr std::size_t kEvalChunk = 512;

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const Network& net, const Matrix& x, const std::vector<int>& y, TaskId task) {
  Evaluation out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows(); start += kEvalChunk) {
    const std::size_t end = std::min(x.rows(), start + kEvalChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const ForwardTrace trace = forward(net, select_rows(x, idx), task);
    std::span<const int> labels(y.data() + start, end - start);
    const double weight = static_cast<double>(end - start);
    out.loss += cross_entropy(trace.logits, labels) * weight;
    out.accuracy += accuracy(trace.logits, labels) * weight;
  }
  out.loss /= static_cast<double>(x.rows());
  out.accuracy /= static_cast<double>(x.rows());
  return out;
}

}  // namespace

ContinualTrainer::ContinualTrainer(NetworkSpec spec, TrainConfig config)
    : config_(std::move(config)),
      net_((config_.validate(), std::move(spec)), config_.seed),
      rng_(config_.seed ^ kShuffleSalt),
      cov_(CovarianceState::empty_for(net_)) {}

const NullSpaceBasis* ContinualTrainer::active_basis() const noexcept {
  if (config_.mode != TrainingMode::nscl || absorbed_ == 0) return nullptr;
  return &basis_;
}

TaskTrainingSummary ContinualTrainer::train_task(const TaskDataset& task,
                                                 std::vector<StepDiagnostic>* diagnostics,
                                                 std::optional<std::size_t> max_steps) {
  task.validate();
  if (task.train_x.cols() != net_.spec().input.features()) {
    throw ShapeError("task " + to_string(task.id) + ": feature width " +
                     std::to_string(task.train_x.cols()) + " does not match network input " +
                     std::to_string(net_.spec().input.features()));
  }
  if (net_.has_head(task.id)) throw DataError("task " + to_string(task.id) + " already trained");
  net_.add_head(task.id, task.classes, rng_);

  std::vector<Matrix> params = net_.weights();
  params.push_back(net_.head(task.id));
  AdamState adam(params, {config_.lr.base, config_.beta1, config_.beta2, config_.epsilon});
  const std::size_t layers = net_.linear_layer_count();
  const NullSpaceBasis* basis = active_basis();

  TaskTrainingSummary summary;
  summary.task = task.id;
  summary.initial_loss = train_loss(task);
  summary.min_inner_product = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(task.train_x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> batch;
  std::vector<int> labels;

  bool done = max_steps.has_value() && *max_steps == 0;
  for (std::size_t epoch = 0; epoch < config_.epochs && !done; ++epoch) {
    const double lr = config_.lr.at(epoch);
    rng_.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      if (max_steps && summary.steps >= *max_steps) {
        done = true;
        break;
      }
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      labels.clear();
      for (std::size_t i : batch) labels.push_back(task.train_y[i]);

      try {
        const Matrix x = select_rows(task.train_x, batch);
        const ForwardTrace trace = forward(net_, x, task.id);
        Gradients grads = backward(net_, trace, labels, task.id);

        std::vector<Matrix> raw = grads.layers;
        raw.push_back(grads.head);
        std::vector<Matrix> cand = adam.candidate(raw);
        ParameterUpdate update;
        update.head = std::move(cand.back());
        cand.pop_back();
        update.layers = std::move(cand);

        const StepRecord record = project_candidate(net_, task.id, update, basis);

        if (config_.descent_probe_lr > 0.0) {
          double raw_inner = dot(record.head_delta, grads.head);
          for (std::size_t l = 0; l < layers; ++l)
            raw_inner += dot(record.layer_deltas[l], grads.layers[l]);
          if (raw_inner > 0.0) {
            ++summary.positive_raw_inner_steps;
            Network trial = net_;
            apply_step(trial, task.id, record, config_.descent_probe_lr);
            if (cross_entropy(forward(trial, x, task.id).logits, labels) < grads.loss) {
              ++summary.descending_steps;
            }
          }
        }

        apply_step(net_, task.id, record, lr);

        ++summary.steps;
        if (!record.empty_layers.empty()) ++summary.empty_basis_steps;
        if (record.inner_product <= 0.0) ++summary.nonpositive_inner_steps;
        summary.min_inner_product = std::min(summary.min_inner_product, record.inner_product);
        if (diagnostics != nullptr && config_.record_steps) {
          diagnostics->push_back({task.id, summary.steps, grads.loss, record.inner_product,
                                  record.candidate_norm, record.delta_norm});
        }
      } catch (const Error& e) {
        rethrow_with_context(e, "task " + to_string(task.id) + " step " +
                                    std::to_string(summary.steps + 1));
      }
    }
  }
  if (summary.steps == 0) summary.min_inner_product = 0.0;

  net_.freeze_head(task.id);
  summary.final_loss = train_loss(task);
  return summary;
}

void ContinualTrainer::absorb_task(const TaskDataset& task) {
  const auto task_cov = accumulate_task_covariance(net_, task.train_x, config_.covariance_batch);
  cov_ = merge_covariance(cov_, task_cov);
  basis_ = compute_null_bases(cov_, config_.a);
  ++absorbed_;
}

double ContinualTrainer::test_accuracy(const TaskDataset& task) const {
  return evaluate(net_, task.test_x, task.test_y, task.id).accuracy;
}

double ContinualTrainer::train_loss(const TaskDataset& task) const {
  return evaluate(net_, task.train_x, task.train_y, task.id).loss;
}

// ---------------------------------------------------------------------------
// Sequences

RunReport run_sequence(std::span<const TaskDataset> tasks, const NetworkSpec& spec,
                       const TrainConfig& config) {
  config.validate();
  if (tasks.empty()) throw DataError("run_sequence: no tasks");
  std::set<TaskId> ids;
  for (const auto& t : tasks)
    if (!ids.insert(t.id).second) throw DataError("duplicate task id " + to_string(t.id));

  ContinualTrainer trainer(spec, config);
  const std::size_t count = tasks.size();
  RunReport report;
  report.accuracy = AccuracyMatrix(count);
  report.train_loss = TaskMatrix(count);

  for (std::size_t t = 0; t < count; ++t) {
    TaskTrainingSummary summary = trainer.train_task(tasks[t], &report.steps);
    if (summary.empty_basis_steps > 0) {
      report.warnings.push_back("task " + to_string(tasks[t].id) + ": " +
                                std::to_string(summary.empty_basis_steps) +
                                " steps had a layer with an empty null space (k = 0)");
    }
    report.tasks.push_back(summary);
    try {
      trainer.absorb_task(tasks[t]);
    } catch (const Error& e) {
      rethrow_with_context(e, "task " + to_string(tasks[t].id) + " covariance update");
    }
    report.spectra.push_back(trainer.latest_basis());
    for (std::size_t i = 0; i <= t; ++i) {
      report.accuracy.set(t, i, trainer.test_accuracy(tasks[i]));
      report.train_loss.set(t, i, trainer.train_loss(tasks[i]));
    }
  }
  report.acc = compute_acc(report.accuracy);
  report.bwt = compute_bwt(report.accuracy);
  report.covariance = trainer.covariance();
  return report;
}

LossRetentionReport verify_loss_retention(std::span<const TaskDataset> tasks,
                                          const NetworkSpec& spec, const TrainConfig& config) {
  TrainConfig quiet = config;
  quiet.record_steps = false;
  const RunReport run = run_sequence(tasks, spec, quiet);
  LossRetentionReport out;
  out.train_loss = run.train_loss;
  const std::size_t count = tasks.size();
  for (std::size_t p = 0; p < count; ++p) {
    const double base = run.train_loss.at(p, p);
    double worst = 0.0;
    for (std::size_t t = p + 1; t < count; ++t)
      worst = std::max(worst, (run.train_loss.at(t, p) - base) / base);
    out.max_relative_increase.push_back(worst);
  }
  return out;
}

std::vector<SweepPoint> sweep_threshold(std::span<const TaskDataset> tasks,
                                        const NetworkSpec& spec, const TrainConfig& config,
                                        std::span<const double> a_values) {
  std::vector<SweepPoint> points;
  for (double a : a_values) {
    TrainConfig cfg = config;
    cfg.a = a;
    cfg.mode = TrainingMode::nscl;
    cfg.record_steps = false;
    const RunReport run = run_sequence(tasks, spec, cfg);
    const std::size_t last = tasks.size() - 1;
    const double base = run.train_loss.at(0, 0);
    points.push_back({a, run.acc, run.bwt.value, (run.train_loss.at(last, 0) - base) / base});
  }
  return points;
}

// ---------------------------------------------------------------------------
// Stability verifier

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace

Lemma1Report verify_lemma1(const Lemma1Config& config) {
  if (config.rank == 0 || config.rank >= config.input_dim) {
    throw ConfigError("lemma1: rank must be in [1, input_dim)");
  }
  NetworkSpec spec;
  spec.input = {config.input_dim, 1, 1};
  spec.layers.push_back(LayerSpec::dense(config.input_dim, config.hidden));
  if (config.relu) spec.layers.push_back(LayerSpec::relu());
  spec.layers.push_back(LayerSpec::dense(config.hidden, config.hidden));
  if (config.relu) spec.layers.push_back(LayerSpec::relu());

  TrainConfig train;
  train.mode = TrainingMode::nscl;
  train.a = 1.0;
  train.lr = {config.learning_rate, {}, 1.0};
  train.epochs = std::numeric_limits<std::size_t>::max();
  train.batch_size = config.batch_size;
  train.seed = config.seed;
  train.record_steps = false;

  Rng rng(config.seed * 2654435761ULL + 17);
  const Matrix subspace = orthonormalize_columns(gaussian(config.input_dim, config.rank, rng));

  // Task 1: points x = B·z on a rank-dimensional subspace; the class sets
  // the sign of z₀ so the task is learnable.
  const std::size_t n1 =
      config.task1_samples != 0 ? config.task1_samples : (config.relu ? config.rank + 2 : 64);
  TaskDataset task1;
  task1.id = TaskId{0};
  task1.classes = 2;
  Matrix z = gaussian(n1, config.rank, rng);
  task1.train_y.resize(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    task1.train_y[i] = static_cast<int>(i % 2);
    z(i, 0) = (task1.train_y[i] == 1 ? 1.0 : -1.0) * (0.5 + std::abs(z(i, 0)));
  }
  task1.train_x = matmul_nt(z, subspace);
  task1.test_x = task1.train_x;
  task1.test_y = task1.train_y;

  // Task 2: full-rank inputs, class shifts the first coordinate.
  TaskDataset task2;
  task2.id = TaskId{1};
  task2.classes = 2;
  task2.train_x = gaussian(config.task2_samples, config.input_dim, rng);
  task2.train_y.resize(config.task2_samples);
  for (std::size_t i = 0; i < config.task2_samples; ++i) {
    task2.train_y[i] = static_cast<int>(i % 2);
    task2.train_x(i, 0) += task2.train_y[i] == 1 ? 1.5 : -1.5;
  }
  task2.test_x = task2.train_x;
  task2.test_y = task2.train_y;

  ContinualTrainer trainer(spec, train);
  trainer.train_task(task1, nullptr, config.task2_steps);
  trainer.absorb_task(task1);

  Lemma1Report report;
  const NullSpaceBasis& basis = trainer.latest_basis();
  for (std::size_t l = 0; l < basis.size(); ++l) {
    const auto& entry = basis[l];
    if (entry.lambda_min != 0.0) {
      throw VerificationError("lemma1 setup: layer " + std::to_string(l + 1) +
                              " covariance has no exact null space (lambda_min = " +
                              std::to_string(entry.lambda_min) + ")");
    }
    report.null_dims.push_back(entry.k());
  }

  const ForwardTrace before = forward(trainer.network(), task1.train_x, task1.id);
  const TaskTrainingSummary summary = trainer.train_task(task2, nullptr, config.task2_steps);
  const ForwardTrace after = forward(trainer.network(), task1.train_x, task1.id);

  report.task2_initial_loss = summary.initial_loss;
  report.task2_final_loss = summary.final_loss;
  report.task2_steps = summary.steps;
  report.output_drift = max_abs_diff(before.logits, after.logits);
  for (std::size_t l = 0; l < before.features.size(); ++l) {
    const double drift = max_abs_diff(before.features[l], after.features[l]);
    report.feature_drift.push_back(drift);
    report.max_feature_drift = std::max(report.max_feature_drift, drift);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Desk-scale presets

GaussianStreamConfig desk_stream_config(std::uint64_t seed) {
  GaussianStreamConfig c;
  c.seed = seed;
  return c;
}

NetworkSpec desk_mlp_spec(std::size_t input_dim, std::size_t hidden) {
  NetworkSpec spec;
  spec.input = {input_dim, 1, 1};
  spec.layers = {LayerSpec::dense(input_dim, hidden), LayerSpec::relu(),
                 LayerSpec::dense(hidden, hidden), LayerSpec::relu()};
  return spec;
}

NetworkSpec desk_conv_spec(std::size_t side) {
  NetworkSpec spec;
  spec.input = {1, side, side};
  const std::size_t out = side - 2;
  spec.layers = {LayerSpec::conv2d(1, 4, 3, 3, 1), LayerSpec::relu(),
                 LayerSpec::dense(4 * out * out, 32), LayerSpec::relu()};
  return spec;
}

TrainConfig desk_train_config(std::uint64_t seed) {
  TrainConfig c;
  c.mode = TrainingMode::nscl;
  c.a = 10.0;
  c.lr = {3e-2, {8, 15}, 0.5};
  c.epochs = 20;
  c.batch_size = 32;
  c.seed = seed;
  return c;
}

}  // namespace nscl
