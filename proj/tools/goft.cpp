// goft: command-line front end for alignment demos, training, merging,
// verification, benchmarks and ablation sweeps.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or config error,
// 3 numeric divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "goft/align.hpp"
#include "goft/bench.hpp"
#include "goft/error.hpp"
#include "goft/io.hpp"
#include "goft/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kDiverged = 3 };

constexpr double kAlignTolerance = 1e-9;
constexpr double kMergeTolerance = 1e-10;

bool g_json = false;

void emit(const json& record) { std::cout << record.dump() << '\n'; }

std::vector<double> to_std(const goft::Vector& v) { return {v.data(), v.data() + v.size()}; }

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("GOFT_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw goft::ConfigError(std::string("GOFT_SEED is not an unsigned integer: '") + s + "'");
  }
}

// A literal list of numbers, or the path of a file holding one.
goft::Vector parse_vector(const std::string& input) {
  std::string text = input;
  if (fs::is_regular_file(input)) {
    std::ifstream in(input);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  for (char& c : text)
    if (c == ',' || c == '[' || c == ']') c = ' ';
  std::istringstream is(text);
  std::vector<double> values;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw goft::ConfigError("not a number in --input: '" + tok + "'");
    }
  }
  goft::Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) v[static_cast<Eigen::Index>(k)] = values[k];
  return v;
}

std::string format_vector(const goft::Vector& v) {
  std::ostringstream os;
  os << std::setprecision(6) << '[';
  for (Eigen::Index k = 0; k < v.size(); ++k) os << (k ? " " : "") << v[k];
  os << ']';
  return os.str();
}

struct AlignArgs {
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::string input;
  bool sequential = false;
};

int cmd_align(const AlignArgs& a) {
  goft::Vector x;
  if (!a.input.empty()) {
    x = parse_vector(a.input);
    if (a.dim != 0 && static_cast<std::size_t>(x.size()) != a.dim) {
      throw goft::ConfigError("--input has " + std::to_string(x.size()) + " entries but --dim is " +
                              std::to_string(a.dim));
    }
  } else {
    if (a.dim == 0) throw goft::ConfigError("align needs --dim or --input");
    std::mt19937_64 rng(env_seed().value_or(a.seed));
    std::normal_distribution<double> n01(0.0, 1.0);
    x.resize(static_cast<Eigen::Index>(a.dim));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = n01(rng);
  }
  if (x.size() < 2) throw goft::InvalidDimension("align needs at least 2 entries");

  const auto d = static_cast<std::size_t>(x.size());
  const goft::AlignmentResult r =
      a.sequential ? goft::align_sequential(x) : goft::align_parallel(x, goft::build_plan(d));
  const auto trace = goft::alignment_trace(r, x);
  const bool ok = r.residual <= kAlignTolerance;

  if (g_json) {
    for (std::size_t k = 0; k < trace.size(); ++k) {
      emit({{"record", "align_stage"}, {"index", k + 1}, {"vector", to_std(trace[k])}});
    }
    emit({{"record", "align"},
          {"d", d},
          {"pairing", a.sequential ? "sequential" : "tree"},
          {"pairs", r.pairs},
          {"angles", r.angles},
          {"residual", r.residual},
          {"passed", ok}});
  } else {
    std::cout << "input    " << format_vector(x) << '\n';
    std::cout << (a.sequential ? "rotations" : "stages") << '\n';
    for (std::size_t k = 0; k < trace.size(); ++k) {
      std::cout << "  " << std::setw(3) << k + 1 << "  " << format_vector(trace[k]) << '\n';
    }
    std::cout << "angles\n" << std::setprecision(10);
    for (std::size_t k = 0; k < r.angles.size(); ++k) {
      std::cout << "  (" << r.pairs[k].first << ", " << r.pairs[k].second << ")  " << r.angles[k]
                << '\n';
    }
    std::cout << "residual " << std::setprecision(3) << r.residual << (ok ? "  ok" : "  FAILED")
              << '\n';
  }
  return ok ? kOk : kVerifyFailed;
}

struct TrainArgs {
  std::string config;
  std::string out = "goft-run";
  std::string resume;
  std::size_t max_steps = 0;
  std::size_t log_every = 100;
};

json step_record(std::size_t step, double loss, double penalty) {
  return {{"record", "step"}, {"step", step}, {"loss", loss}, {"penalty", penalty}};
}

json report_record(const goft::TrainReport& r, const goft::ExperimentConfig& cfg, bool complete) {
  return {{"record", "report"},
          {"method", goft::to_string(cfg.train.method)},
          {"lambda", cfg.train.lambda},
          {"steps", r.steps},
          {"complete", complete},
          {"initial_mse", r.initial_mse},
          {"final_mse", r.final_mse},
          {"final_penalty", r.final_penalty},
          {"final_max_abs_inner", r.final_max_abs_inner},
          {"param_count", r.param_count},
          {"wall_clock_seconds", r.wall_clock_seconds},
          {"warnings", r.warnings}};
}

int cmd_train(const TrainArgs& a) {
  goft::ExperimentConfig cfg;
  std::optional<goft::Checkpoint> ckpt;
  if (!a.resume.empty()) {
    ckpt = goft::load_checkpoint(a.resume);
    cfg = ckpt->config;
    if (!a.config.empty()) std::cerr << "note: --config is ignored when resuming\n";
    if (env_seed()) std::cerr << "note: GOFT_SEED is ignored when resuming\n";
  } else {
    if (a.config.empty()) throw goft::ConfigError("train needs --config or --resume");
    cfg = goft::load_config(a.config);
    if (const auto s = env_seed()) {
      cfg.seed = *s;
      cfg.task.seed = cfg.train.seed = *s;
    }
  }

  const goft::Task task = goft::make_task(cfg.task);
  goft::Adapter adapter(task.weight, cfg.train.method, cfg.train.cayley_block);
  goft::Trainer trainer(std::move(adapter), task.data, cfg.train);
  if (ckpt) {
    if (ckpt->d != cfg.task.d) throw goft::ConfigError("checkpoint d does not match its config");
    trainer.restore(ckpt->state);
  }

  const std::size_t until = a.max_steps ? std::min(a.max_steps, cfg.train.steps) : cfg.train.steps;
  const std::size_t first = trainer.step();
  try {
    trainer.run_until(until);
  } catch (const goft::DivergenceError&) {
    fs::create_directories(a.out);
    goft::save_checkpoint(fs::path(a.out) / "diverged.json", goft::make_checkpoint(trainer, cfg));
    throw;
  }

  const goft::TrainReport report = trainer.report();
  const bool complete = trainer.step() == cfg.train.steps;
  fs::create_directories(a.out);
  const fs::path out(a.out);
  goft::save_checkpoint(out / "checkpoint.json", goft::make_checkpoint(trainer, cfg));
  goft::write_weights(out / "weights.goftw", task.weight.w);
  goft::write_weights(out / "merged.goftw", goft::merge(trainer.adapter()).w);
  {
    std::ofstream jl(out / "report.jsonl");
    for (std::size_t s = 0; s < report.step_loss.size(); ++s) {
      jl << step_record(s, report.step_loss[s], report.step_penalty[s]).dump() << '\n';
    }
    jl << report_record(report, cfg, complete).dump() << '\n';
  }

  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  if (g_json) {
    for (std::size_t s = first; s < report.step_loss.size(); ++s) {
      emit(step_record(s, report.step_loss[s], report.step_penalty[s]));
    }
    emit(report_record(report, cfg, complete));
  } else {
    std::cout << std::setprecision(4);
    for (std::size_t s = first; s < report.step_loss.size(); ++s) {
      if (a.log_every && (s % a.log_every == 0 || s + 1 == report.step_loss.size())) {
        std::cout << "step " << std::setw(6) << s << "  loss " << std::setw(11)
                  << report.step_loss[s] << "  penalty " << report.step_penalty[s] << '\n';
      }
    }
    std::cout << goft::to_string(cfg.train.method) << " on " << goft::to_string(cfg.task.kind)
              << " d=" << cfg.task.d << " n=" << cfg.task.n << (complete ? "" : " (partial)")
              << "\n  steps        " << report.steps << "\n  params       " << report.param_count
              << "\n  initial mse  " << report.initial_mse << "\n  final mse    "
              << report.final_mse << "\n  penalty      " << report.final_penalty
              << "\n  max |<a,b>|  " << report.final_max_abs_inner << "\n  wall clock   "
              << report.wall_clock_seconds << " s\n  written to   " << out.string() << '\n';
  }
  return kOk;
}

struct MergeArgs {
  std::string checkpoint;
  std::string weights;
  std::string out;
  std::uint64_t probe_seed = 0;
};

int cmd_merge(const MergeArgs& a) {
  const goft::Checkpoint ckpt = goft::load_checkpoint(a.checkpoint);
  const goft::FrozenWeight w{goft::read_weights(a.weights), std::nullopt};
  if (static_cast<std::size_t>(w.w.rows()) != ckpt.d) {
    throw goft::ShapeError("weights have d = " + std::to_string(w.w.rows()) +
                           ", checkpoint expects d = " + std::to_string(ckpt.d));
  }
  const goft::Adapter adapter = goft::adapter_from_checkpoint(ckpt, w);
  const goft::FrozenWeight merged = goft::merge(adapter);
  goft::write_weights(a.out, merged.w);

  std::mt19937_64 rng(a.probe_seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  goft::Matrix probe(w.w.rows(), 64);
  for (Eigen::Index c = 0; c < probe.cols(); ++c)
    for (Eigen::Index r = 0; r < probe.rows(); ++r) probe(r, c) = n01(rng);
  const goft::Matrix gap =
      goft::plain_forward(merged, probe) - goft::forward_input_side(adapter, probe);
  const double dev = gap.cwiseAbs().maxCoeff();
  const bool ok = dev <= kMergeTolerance;

  if (g_json) {
    emit({{"record", "merge"},
          {"method", goft::to_string(ckpt.method)},
          {"d", w.w.rows()},
          {"n", w.w.cols()},
          {"out", a.out},
          {"probe_max_abs_deviation", dev},
          {"passed", ok}});
  } else {
    std::cout << "merged " << goft::to_string(ckpt.method) << " (d=" << w.w.rows()
              << ", n=" << w.w.cols() << ") into " << a.out << '\n'
              << "probe max |deviation| " << std::setprecision(3) << dev
              << (ok ? "  ok" : "  FAILED") << '\n';
  }
  return ok ? kOk : kVerifyFailed;
}

int cmd_verify(bool corrupt) {
  goft::VerifyOptions opt;
  opt.corrupt_angles = corrupt;
  const goft::VerifyReport r = goft::run_verify(opt);
  for (const auto& p : r.properties) {
    if (g_json) {
      emit({{"record", "property"},
            {"name", p.name},
            {"passed", p.passed},
            {"worst", p.worst},
            {"tolerance", p.tolerance},
            {"detail", p.detail}});
    } else {
      std::cout << (p.passed ? "PASS " : "FAIL ") << std::left << std::setw(22) << p.name
                << std::right << " worst " << std::setprecision(3) << std::setw(10) << p.worst
                << " tol " << p.tolerance << "  (" << p.detail << ")\n";
    }
  }
  if (g_json) {
    emit({{"record", "verify"}, {"passed", r.passed()}});
  } else {
    std::cout << (r.passed() ? "all properties hold" : "verification FAILED") << '\n';
  }
  return r.passed() ? kOk : kVerifyFailed;
}

struct BenchArgs {
  std::vector<std::size_t> dims{64, 128, 256, 512, 768, 1024};
  std::size_t cols = 1;
  std::size_t reps = 5;
};

int cmd_bench(const BenchArgs& a) {
  for (std::size_t d : a.dims) {
    if (d < 2) throw goft::ConfigError("bench: every dimension must be >= 2");
  }
  const auto rows = goft::run_bench(a.dims, a.cols, a.reps, env_seed().value_or(0));
  if (!g_json) {
    std::cout << std::setw(6) << "d" << std::setw(6) << "n" << std::setw(8) << "stages"
              << std::setw(14) << "staged_flops" << std::setw(14) << "dense_flops" << std::setw(9)
              << "ratio" << std::setw(13) << "staged_s" << std::setw(13) << "dense_s" << '\n';
  }
  for (const auto& r : rows) {
    const double ratio = static_cast<double>(r.dense_flops) / static_cast<double>(r.staged_flops);
    if (g_json) {
      emit({{"record", "bench"},
            {"d", r.d},
            {"cols", r.cols},
            {"stages", r.stages},
            {"staged_flops", r.staged_flops},
            {"dense_flops", r.dense_flops},
            {"flop_ratio", ratio},
            {"staged_seconds", r.staged_seconds},
            {"dense_seconds", r.dense_seconds},
            {"max_abs_diff", r.max_abs_diff}});
    } else {
      std::cout << std::setw(6) << r.d << std::setw(6) << r.cols << std::setw(8) << r.stages
                << std::setw(14) << r.staged_flops << std::setw(14) << r.dense_flops
                << std::setw(9) << std::setprecision(4) << ratio << std::setw(13)
                << std::setprecision(3) << r.staged_seconds << std::setw(13) << r.dense_seconds
                << '\n';
    }
  }
  return kOk;
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> methods{"goft", "goft-star", "qgoft"};
  std::vector<double> lambdas{goft::kLambdaGrid.begin(), goft::kLambdaGrid.end()};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  unsigned threads = 0;
};

int cmd_sweep(const SweepArgs& a) {
  const goft::ExperimentConfig cfg = goft::load_config(a.config);
  std::vector<goft::Method> methods;
  for (const auto& m : a.methods) methods.push_back(goft::parse_method(m));
  for (double l : a.lambdas) {
    if (l < 0.0) throw goft::ConfigError("sweep: lambdas must be >= 0");
  }
  std::vector<std::uint64_t> seeds = a.seeds;
  if (const auto s = env_seed()) {
    for (auto& v : seeds) v += *s;
  }
  const unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  const goft::SweepTable table =
      goft::ablation_sweep(cfg.task, methods, a.lambdas, seeds, cfg.train, threads);

  if (g_json) {
    for (const auto& c : table.cells) {
      emit({{"record", "sweep_cell"},
            {"method", goft::to_string(c.method)},
            {"lambda", c.lambda},
            {"seed", c.seed},
            {"final_mse", c.report.final_mse},
            {"final_penalty", c.report.final_penalty},
            {"final_max_abs_inner", c.report.final_max_abs_inner},
            {"param_count", c.report.param_count}});
    }
    for (const auto& r : table.rows) {
      emit({{"record", "sweep_row"},
            {"method", goft::to_string(r.method)},
            {"lambda", r.lambda},
            {"param_count", r.param_count},
            {"mean_mse", r.mean_mse},
            {"min_mse", r.min_mse},
            {"max_mse", r.max_mse},
            {"mean_penalty", r.mean_penalty},
            {"mean_max_abs_inner", r.mean_max_abs_inner}});
    }
  } else {
    std::cout << goft::to_string(cfg.task.kind) << " d=" << cfg.task.d << " n=" << cfg.task.n
              << ", " << seeds.size() << " seeds, " << cfg.train.steps << " steps\n"
              << std::left << std::setw(11) << "method" << std::right << std::setw(8) << "lambda"
              << std::setw(8) << "params" << std::setw(12) << "mean_mse" << std::setw(12)
              << "max_mse" << std::setw(12) << "penalty" << std::setw(12) << "max|<a,b>|" << '\n';
    for (const auto& r : table.rows) {
      std::cout << std::left << std::setw(11) << goft::to_string(r.method) << std::right
                << std::setw(8) << r.lambda << std::setw(8) << r.param_count
                << std::setprecision(3) << std::setw(12) << r.mean_mse << std::setw(12)
                << r.max_mse << std::setw(12) << r.mean_penalty << std::setw(12)
                << r.mean_max_abs_inner << '\n';
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Givens-rotation orthogonal fine-tuning toolkit"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json, "Emit line-delimited JSON records");

  AlignArgs align_args;
  auto* align = app.add_subcommand("align", "Align a vector onto the first axis");
  align->add_option("--dim", align_args.dim, "Dimension of a random input");
  align->add_option("--seed", align_args.seed, "Seed for the random input");
  align->add_option("--input", align_args.input, "Numbers, or a file containing them");
  align->add_flag("--sequential", align_args.sequential, "Use adjacent-pair sweeping");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train an adapter from a JSON config");
  train->add_option("--config", train_args.config, "Experiment config (JSON)");
  train->add_option("--out", train_args.out, "Output directory")->capture_default_str();
  train->add_option("--resume", train_args.resume, "Checkpoint to continue from");
  train->add_option("--max-steps", train_args.max_steps, "Stop after this many total steps");
  train->add_option("--log-every", train_args.log_every, "Text log interval")
      ->capture_default_str();

  MergeArgs merge_args;
  auto* merge = app.add_subcommand("merge", "Fold a checkpoint into a weight file");
  merge->add_option("--checkpoint", merge_args.checkpoint)->required();
  merge->add_option("--weights", merge_args.weights, "Frozen weights (GOFTW)")->required();
  merge->add_option("--out", merge_args.out, "Merged weights (GOFTW)")->required();
  merge->add_option("--probe-seed", merge_args.probe_seed)->capture_default_str();

  bool corrupt = false;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_flag("--inject-angle-corruption", corrupt, "Test mode: poison one angle per chain");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Staged vs dense application");
  bench->add_option("--dims", bench_args.dims)->delimiter(',')->capture_default_str();
  bench->add_option("--cols", bench_args.cols)->capture_default_str();
  bench->add_option("--reps", bench_args.reps)->capture_default_str();

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Ablation sweep over methods and lambda");
  sweep->add_option("--config", sweep_args.config, "Task and base training config")->required();
  sweep->add_option("--methods", sweep_args.methods)->delimiter(',')->capture_default_str();
  sweep->add_option("--lambdas", sweep_args.lambdas)->delimiter(',')->capture_default_str();
  sweep->add_option("--seeds", sweep_args.seeds)->delimiter(',')->capture_default_str();
  sweep->add_option("--threads", sweep_args.threads, "0 = hardware concurrency");

  for (auto* sub : {align, train, merge, verify, bench, sweep}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*align) return cmd_align(align_args);
    if (*train) return cmd_train(train_args);
    if (*merge) return cmd_merge(merge_args);
    if (*verify) return cmd_verify(corrupt);
    if (*bench) return cmd_bench(bench_args);
    if (*sweep) return cmd_sweep(sweep_args);
  } catch (const goft::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const goft::DegenerateInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const goft::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kVerifyFailed;
  } catch (const goft::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kVerifyFailed;
  }
  return kUsage;
}
