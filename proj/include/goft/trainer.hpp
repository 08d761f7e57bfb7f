#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "goft/adapter.hpp"
#include "goft/chain.hpp"

namespace goft {

enum class TaskKind { kRotationRecovery, kScaledRotationRecovery, kRegressionCsv };

std::string_view to_string(TaskKind k) noexcept;
TaskKind parse_task_kind(std::string_view name);

/// Desk-scale synthetic task. The seed fully determines W, the inputs and
/// the ground-truth transform.
struct TaskSpec {
  TaskKind kind = TaskKind::kRotationRecovery;
  std::size_t d = 32;
  std::size_t n = 16;
  std::size_t samples = 2000;
  double noise = 0.0;
  std::uint64_t seed = 0;
  /// Ground-truth angles are drawn uniformly from [-angle_range, angle_range].
  double angle_range = 0.5;
  /// Scaled task: D_kk = 2^u with u uniform in [-1, 1] times this factor.
  double log2_scale_range = 1.0;
  /// regression-csv only: rows of d inputs followed by n targets.
  std::string csv_path;
};

/// One sample per column: x is d x N, y is n x N.
struct Dataset {
  Matrix x;
  Matrix y;
  std::size_t size() const noexcept { return static_cast<std::size_t>(x.cols()); }
};

struct Task {
  FrozenWeight weight;
  Dataset data;
  /// Ground truth for the synthetic kinds: y = (D R* W)^T x (+ noise).
  std::optional<GivensChain> target_rotation;
  std::optional<Vector> target_scale;
};

/// Throws ConfigError for an invalid spec (d < 2, n == 0, no samples,
/// negative noise, unreadable or malformed CSV).
Task make_task(const TaskSpec& spec);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// One adaptive-moment update of `params` in place; no weight decay.
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double learning_rate, const AdamConfig& cfg);

enum class LrSchedule { kConstant, kCosine };

std::string_view to_string(LrSchedule s) noexcept;
LrSchedule parse_lr_schedule(std::string_view name);

struct TrainConfig {
  Method method = Method::kGoft;
  double lambda = 0.0;
  double learning_rate = 0.01;
  std::size_t steps = 1000;
  /// Cosine decays the rate from learning_rate to min_lr_fraction * learning_rate.
  LrSchedule schedule = LrSchedule::kCosine;
  double min_lr_fraction = 0.0;
  /// 0 means full-batch.
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// oft-cayley block size; 0 means full d.
  std::size_t cayley_block = 0;
};

struct TrainReport {
  std::vector<double> step_loss;
  std::vector<double> step_penalty;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  double final_penalty = 0.0;
  double final_max_abs_inner = 0.0;
  std::size_t param_count = 0;
  std::size_t steps = 0;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> warnings;
};

/// Mean squared error over every output entry of the whole dataset.
double dataset_mse(const Adapter& adapter, const Dataset& data);

/// Mini-batch training of the adapter's transform parameters, following the
/// fine-tune-then-merge loop: loss = MSE + lambda * sum <alpha, beta>^2.
///
/// The frozen weight is never touched. State (parameters, moments, sampler
/// RNG, loss history) can be captured and restored, so a resumed run
/// reproduces the uninterrupted loss curve bit for bit.
class Trainer {
 public:
  Trainer(Adapter adapter, const Dataset& data, TrainConfig config);

  /// Runs until `step() == min(until, config.steps)`. Throws DivergenceError
  /// on a non-finite loss.
  void run_until(std::size_t until);
  void run() { run_until(config_.steps); }

  TrainReport report() const;

  const Adapter& adapter() const noexcept { return adapter_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::size_t step() const noexcept { return step_; }
  const AdamState& optimizer() const noexcept { return adam_; }
  const std::vector<double>& loss_history() const noexcept { return loss_; }
  const std::vector<double>& penalty_history() const noexcept { return penalty_; }
  double initial_mse() const noexcept { return initial_mse_; }

  /// Text form of the sampler RNG state.
  std::string rng_state() const;

  struct Snapshot {
    std::vector<double> parameters;
    AdamState optimizer;
    std::string rng_state;
    std::size_t step = 0;
    std::vector<double> loss_history;
    std::vector<double> penalty_history;
    double initial_mse = 0.0;
  };
  Snapshot snapshot() const;
  /// Restores a snapshot taken from a trainer with the same adapter layout.
  void restore(const Snapshot& snap);

 private:
  /// Batch loss and its gradient with respect to the flat parameters.
  double loss_and_gradient(const Matrix& x, const Matrix& y, std::vector<double>& grad) const;

  Adapter adapter_;
  const Dataset* data_;
  TrainConfig config_;
  AdamState adam_;
  std::mt19937_64 rng_;
  std::size_t step_ = 0;
  std::vector<double> loss_;
  std::vector<double> penalty_;
  double initial_mse_ = 0.0;
  double elapsed_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Convenience wrapper: trains `adapter` in place for config.steps steps.
TrainReport train(Adapter& adapter, const Dataset& data, const TrainConfig& config);

/// Regularization strengths of the published qGOFT sweep.
inline constexpr std::array<double, 5> kLambdaGrid{0.001, 0.01, 0.05, 0.1, 0.5};

struct SweepCell {
  Method method = Method::kGoft;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  TrainReport report;
};

struct SweepRow {
  Method method = Method::kGoft;
  double lambda = 0.0;
  std::size_t param_count = 0;
  double mean_mse = 0.0;
  double min_mse = 0.0;
  double max_mse = 0.0;
  double mean_penalty = 0.0;
  double mean_max_abs_inner = 0.0;
};

struct SweepTable {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
};

/// Trains every (method, lambda, seed) cell. The lambda grid applies to
/// qgoft only; other methods get a single lambda = 0 row. For each seed the
/// task is regenerated with that seed and the same seed drives training.
/// Cells run on up to `threads` worker threads; results do not depend on it.
SweepTable ablation_sweep(const TaskSpec& task, const std::vector<Method>& methods,
                          const std::vector<double>& lambdas,
                          const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
                          unsigned threads = 1);

/// Learning rate used at `step` (0-based) under the config's schedule.
double scheduled_learning_rate(const TrainConfig& config, std::size_t step) noexcept;

}  // namespace goft
