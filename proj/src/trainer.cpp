#include "goft/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "goft/autodiff.hpp"
#include "goft/error.hpp"

namespace goft {
namespace {

Matrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  return m;
}

Dataset read_csv(const std::string& path, std::size_t d, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (row.size() != d + n) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(d + n) + " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("CSV '" + path + "' has no data rows");
  Dataset data{Matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size())),
               Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const auto c = static_cast<Eigen::Index>(s);
    for (std::size_t k = 0; k < d; ++k) data.x(static_cast<Eigen::Index>(k), c) = rows[s][k];
    for (std::size_t k = 0; k < n; ++k) data.y(static_cast<Eigen::Index>(k), c) = rows[s][d + k];
  }
  return data;
}

double batch_mse(const Adapter& adapter, const Matrix& x, const Matrix& y) {
  const Matrix diff = forward(adapter, x) - y;
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

}  // namespace

std::string_view to_string(TaskKind k) noexcept {
  switch (k) {
    case TaskKind::kRotationRecovery:
      return "rotation-recovery";
    case TaskKind::kScaledRotationRecovery:
      return "scaled-rotation-recovery";
    case TaskKind::kRegressionCsv:
      return "regression-csv";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::kRotationRecovery, TaskKind::kScaledRotationRecovery,
                     TaskKind::kRegressionCsv}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

std::string_view to_string(LrSchedule s) noexcept {
  return s == LrSchedule::kCosine ? "cosine" : "constant";
}

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "cosine") return LrSchedule::kCosine;
  throw ConfigError("unknown schedule '" + std::string(name) + "' (expected constant or cosine)");
}

double scheduled_learning_rate(const TrainConfig& config, std::size_t step) noexcept {
  if (config.schedule == LrSchedule::kConstant || config.steps <= 1) return config.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(config.steps - 1);
  const double floor = config.min_lr_fraction * config.learning_rate;
  return floor + 0.5 * (config.learning_rate - floor) * (1.0 + std::cos(M_PI * progress));
}

Task make_task(const TaskSpec& spec) {
  if (spec.d < 2) throw ConfigError("task: d must be >= 2");
  if (spec.n == 0) throw ConfigError("task: n must be >= 1");
  if (spec.noise < 0.0 || !std::isfinite(spec.noise)) throw ConfigError("task: noise must be >= 0");
  if (spec.angle_range < 0.0) throw ConfigError("task: angle_range must be >= 0");
  if (spec.log2_scale_range < 0.0) throw ConfigError("task: log2_scale_range must be >= 0");
  if (spec.kind != TaskKind::kRegressionCsv && spec.samples == 0) {
    throw ConfigError("task: samples must be >= 1");
  }

  std::mt19937_64 rng(spec.seed);
  Task task;
  task.weight.w = gaussian(rng, spec.d, spec.n, 1.0 / std::sqrt(static_cast<double>(spec.d)));

  if (spec.kind == TaskKind::kRegressionCsv) {
    if (spec.csv_path.empty()) throw ConfigError("task: regression-csv needs csv_path");
    task.data = read_csv(spec.csv_path, spec.d, spec.n);
    return task;
  }

  std::uniform_real_distribution<double> angle(-spec.angle_range, spec.angle_range);
  std::vector<double> angles(spec.d - 1);
  for (auto& a : angles) a = spec.angle_range > 0.0 ? angle(rng) : 0.0;
  task.target_rotation = GivensChain(build_plan(spec.d), std::move(angles));

  Matrix target_w = apply_chain_matrix(*task.target_rotation, task.weight.w);
  if (spec.kind == TaskKind::kScaledRotationRecovery) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector scale(static_cast<Eigen::Index>(spec.d));
    for (Eigen::Index k = 0; k < scale.size(); ++k) {
      scale[k] = spec.log2_scale_range > 0.0 ? std::exp2(spec.log2_scale_range * u(rng)) : 1.0;
    }
    target_w = scale.asDiagonal() * target_w;
    task.target_scale = scale;
  }

  task.data.x = gaussian(rng, spec.d, spec.samples, 1.0);
  task.data.y = target_w.transpose() * task.data.x;
  if (spec.noise > 0.0) task.data.y += gaussian(rng, spec.n, spec.samples, spec.noise);
  return task;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double learning_rate, const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (grad.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter/gradient/state size mismatch");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grad[k];
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

double dataset_mse(const Adapter& adapter, const Dataset& data) {
  return batch_mse(adapter, data.x, data.y);
}

Trainer::Trainer(Adapter adapter, const Dataset& data, TrainConfig config)
    : adapter_(std::move(adapter)), data_(&data), config_(config), rng_(config.seed) {
  if (static_cast<std::size_t>(data.x.rows()) != adapter_.input_dim() ||
      static_cast<std::size_t>(data.y.rows()) != adapter_.output_dim() ||
      data.x.cols() != data.y.cols()) {
    throw ShapeError("trainer: dataset shape does not match the adapter");
  }
  if (data.size() == 0) throw ConfigError("trainer: empty dataset");
  if (config_.lambda < 0.0) throw ConfigError("trainer: lambda must be >= 0");
  if (!(config_.learning_rate > 0.0)) throw ConfigError("trainer: learning_rate must be > 0");
  if (config_.min_lr_fraction < 0.0 || config_.min_lr_fraction > 1.0) {
    throw ConfigError("trainer: min_lr_fraction must lie in [0, 1]");
  }
  if (adapter_.method() != config_.method) {
    throw ConfigError("trainer: adapter method does not match config.method");
  }
  if (config_.lambda > 0.0 && config_.method != Method::kQGoft) {
    warnings_.push_back("lambda = " + std::to_string(config_.lambda) + " is ignored for method " +
                        std::string(to_string(config_.method)));
  }
  initial_mse_ = dataset_mse(adapter_, data);
}

double Trainer::loss_and_gradient(const Matrix& x, const Matrix& y,
                                  std::vector<double>& grad) const {
  const double scale = 1.0 / static_cast<double>(y.size());
  const auto& w = adapter_.weight();

  if (const auto* cayley = std::get_if<CayleyTransform>(&adapter_.transform())) {
    // Baseline: central differences on the batch loss.
    const double loss = batch_mse(adapter_, x, y);
    std::vector<double> p = parameters(*cayley);
    grad.assign(p.size(), 0.0);
    Adapter probe = adapter_;
    const double h = kFiniteDifferenceStep;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double base = p[k];
      p[k] = base + h;
      probe.set_parameters(p);
      const double plus = batch_mse(probe, x, y);
      p[k] = base - h;
      probe.set_parameters(p);
      const double minus = batch_mse(probe, x, y);
      p[k] = base;
      grad[k] = (plus - minus) / (2.0 * h);
    }
    return loss;
  }

  return std::visit(
      [&](const auto& chain) -> double {
        using Chain = std::decay_t<decltype(chain)>;
        if constexpr (std::is_same_v<Chain, CayleyTransform>) {
          return 0.0;
        } else {
          const auto taped = forward_with_tape(chain, w.w);
          Matrix pred = taped.output.transpose() * x;
          if (w.bias) pred.colwise() += *w.bias;
          const Matrix residual = pred - y;
          const double loss = residual.squaredNorm() * scale;
          const Matrix d_pred = (2.0 * scale) * residual;
          const Matrix d_transformed = x * d_pred.transpose();
          grad = backward(chain, taped.tape, d_transformed).grad.flat();
          return loss;
        }
      },
      adapter_.transform());
}

void Trainer::run_until(std::size_t until) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t target = std::min(until, config_.steps);
  const std::size_t n_data = data_->size();
  const std::size_t batch = config_.batch_size == 0 ? n_data : config_.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, n_data - 1);

  Matrix xb(data_->x.rows(), static_cast<Eigen::Index>(batch));
  Matrix yb(data_->y.rows(), static_cast<Eigen::Index>(batch));
  std::vector<double> grad;
  while (step_ < target) {
    if (config_.batch_size == 0) {
      xb = data_->x;
      yb = data_->y;
    } else {
      for (std::size_t b = 0; b < batch; ++b) {
        const auto idx = static_cast<Eigen::Index>(pick(rng_));
        xb.col(static_cast<Eigen::Index>(b)) = data_->x.col(idx);
        yb.col(static_cast<Eigen::Index>(b)) = data_->y.col(idx);
      }
    }

    const double loss = loss_and_gradient(xb, yb, grad);
    double penalty = 0.0;
    if (const auto* q = std::get_if<QuasiChain>(&adapter_.transform())) {
      penalty = ortho_penalty(*q);
      if (config_.lambda > 0.0) {
        const auto pg = ortho_penalty_gradient(*q);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += config_.lambda * pg[k];
      }
    }
    if (!std::isfinite(loss) || !std::isfinite(penalty)) {
      throw DivergenceError("non-finite loss at step " + std::to_string(step_), step_);
    }
    loss_.push_back(loss);
    penalty_.push_back(penalty);

    std::vector<double> params = adapter_.parameters();
    adam_step(params, grad, adam_, scheduled_learning_rate(config_, step_), config_.adam);
    adapter_.set_parameters(params);
    ++step_;
  }
  elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TrainReport Trainer::report() const {
  TrainReport r;
  r.step_loss = loss_;
  r.step_penalty = penalty_;
  r.initial_mse = initial_mse_;
  r.final_mse = step_ == 0 ? initial_mse_ : dataset_mse(adapter_, *data_);
  if (const auto* q = std::get_if<QuasiChain>(&adapter_.transform())) {
    r.final_penalty = ortho_penalty(*q);
    r.final_max_abs_inner = max_abs_inner(*q);
  }
  r.param_count = param_count(adapter_);
  r.steps = step_;
  r.wall_clock_seconds = elapsed_;
  r.warnings = warnings_;
  if (!std::isfinite(r.final_mse)) {
    throw DivergenceError("non-finite final MSE", step_);
  }
  return r;
}

std::string Trainer::rng_state() const {
  std::ostringstream os;
  os << rng_;
  return os.str();
}

Trainer::Snapshot Trainer::snapshot() const {
  return Snapshot{adapter_.parameters(), adam_, rng_state(), step_, loss_, penalty_, initial_mse_};
}

void Trainer::restore(const Snapshot& snap) {
  if (snap.parameters.size() != adapter_.parameters().size()) {
    throw ConfigError("checkpoint parameter count does not match the adapter");
  }
  if (!snap.optimizer.m.empty() && (snap.optimizer.m.size() != snap.parameters.size() ||
                                    snap.optimizer.v.size() != snap.parameters.size())) {
    throw ConfigError("checkpoint optimizer state does not match the parameter count");
  }
  if (snap.loss_history.size() != snap.step || snap.penalty_history.size() != snap.step) {
    throw ConfigError("checkpoint history length does not match its step counter");
  }
  adapter_.set_parameters(snap.parameters);
  adam_ = snap.optimizer;
  std::istringstream is(snap.rng_state);
  is >> rng_;
  if (!is) throw ConfigError("checkpoint RNG state is malformed");
  step_ = snap.step;
  loss_ = snap.loss_history;
  penalty_ = snap.penalty_history;
  initial_mse_ = snap.initial_mse;
}

TrainReport train(Adapter& adapter, const Dataset& data, const TrainConfig& config) {
  Trainer trainer(adapter, data, config);
  trainer.run();
  adapter = trainer.adapter();
  return trainer.report();
}

SweepTable ablation_sweep(const TaskSpec& task, const std::vector<Method>& methods,
                          const std::vector<double>& lambdas,
                          const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
                          unsigned threads) {
  struct Job {
    Method method;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Method m : methods) {
    const std::vector<double> grid =
        m == Method::kQGoft && !lambdas.empty() ? lambdas : std::vector<double>{0.0};
    for (double l : grid)
      for (std::uint64_t s : seeds) jobs.push_back({m, l, s});
  }

  SweepTable table;
  table.cells.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t j;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= jobs.size()) return;
        j = next++;
      }
      try {
        TaskSpec spec = task;
        spec.seed = jobs[j].seed;
        const Task t = make_task(spec);
        TrainConfig cfg = base;
        cfg.method = jobs[j].method;
        cfg.lambda = jobs[j].lambda;
        cfg.seed = jobs[j].seed;
        Adapter adapter(t.weight, cfg.method, cfg.cayley_block);
        table.cells[j] = SweepCell{jobs[j].method, jobs[j].lambda, jobs[j].seed,
                                   train(adapter, t.data, cfg)};
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Rows in job order, one per (method, lambda).
  for (std::size_t j = 0; j < jobs.size();) {
    SweepRow row;
    row.method = jobs[j].method;
    row.lambda = jobs[j].lambda;
    row.param_count = table.cells[j].report.param_count;
    row.min_mse = table.cells[j].report.final_mse;
    row.max_mse = row.min_mse;
    std::size_t count = 0;
    std::size_t k = j;
    for (; k < jobs.size() && jobs[k].method == row.method && jobs[k].lambda == row.lambda; ++k) {
      const auto& rep = table.cells[k].report;
      row.mean_mse += rep.final_mse;
      row.min_mse = std::min(row.min_mse, rep.final_mse);
      row.max_mse = std::max(row.max_mse, rep.final_mse);
      row.mean_penalty += rep.final_penalty;
      row.mean_max_abs_inner += rep.final_max_abs_inner;
      ++count;
    }
    row.mean_mse /= static_cast<double>(count);
    row.mean_penalty /= static_cast<double>(count);
    row.mean_max_abs_inner /= static_cast<double>(count);
    table.rows.push_back(row);
    j = k;
  }
  return table;
}

}  // namespace goft
