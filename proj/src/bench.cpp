#include "goft/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "goft/error.hpp"

namespace goft {
namespace {

template <class Fn>
double median_seconds(std::size_t reps, Fn&& fn) {
  std::vector<double> t(reps);
  for (auto& s : t) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(reps / 2), t.end());
  return t[reps / 2];
}

}  // namespace

Matrix counted_staged_apply(const GivensChain& chain, const Matrix& w, std::uint64_t& flops) {
  Matrix out = w;
  kernel::apply_matrix(chain.plan(), chain.blocks(), out, &flops);
  return out;
}

Matrix counted_dense_apply(const Matrix& r, const Matrix& w, std::uint64_t& flops) {
  if (r.cols() != w.rows()) throw ShapeError("counted_dense_apply: inner dimensions differ");
  Matrix out = Matrix::Zero(r.rows(), w.cols());
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < r.cols(); ++k) acc += r(i, k) * w(k, c);
      out(i, c) = acc;
    }
    flops += 2 * static_cast<std::uint64_t>(r.rows()) * static_cast<std::uint64_t>(r.cols());
  }
  return out;
}

std::vector<BenchRow> run_bench(const std::vector<std::size_t>& dims, std::size_t cols,
                                std::size_t reps, std::uint64_t seed) {
  if (cols == 0) throw ConfigError("bench: cols must be >= 1");
  if (reps == 0) throw ConfigError("bench: reps must be >= 1");
  std::vector<BenchRow> rows;
  for (std::size_t d : dims) {
    const RotationPlan plan = build_plan(d);
    std::mt19937_64 rng(seed + d);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> angles(plan.total_pairs());
    for (auto& a : angles) a = angle(rng);
    const GivensChain chain(plan, std::move(angles));
    const Matrix r = dense_matrix(chain);
    Matrix w(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index k = 0; k < w.rows(); ++k) w(k, c) = n01(rng);

    BenchRow row;
    row.d = d;
    row.cols = cols;
    row.stages = plan.stage_count();
    const Matrix staged = counted_staged_apply(chain, w, row.staged_flops);
    const Matrix dense = counted_dense_apply(r, w, row.dense_flops);
    row.max_abs_diff = (staged - dense).cwiseAbs().maxCoeff();

    std::uint64_t sink = 0;
    volatile double keep = 0.0;
    row.staged_seconds =
        median_seconds(reps, [&] { keep = counted_staged_apply(chain, w, sink)(0, 0); });
    row.dense_seconds = median_seconds(reps, [&] { keep = counted_dense_apply(r, w, sink)(0, 0); });
    rows.push_back(row);
  }
  return rows;
}

}  // namespace goft
