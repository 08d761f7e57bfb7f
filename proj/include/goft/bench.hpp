#pragma once

#include <cstdint>
#include <vector>

#include "goft/chain.hpp"

namespace goft {

/// Staged application with instrumented arithmetic. Returns R W and adds the
/// number of floating-point multiplies to `flops` (4 per pair per column).
Matrix counted_staged_apply(const GivensChain& chain, const Matrix& w, std::uint64_t& flops);

/// Textbook triple loop for dense R W. Adds one multiply and one add per
/// inner term to `flops`, i.e. 2 n d^2.
Matrix counted_dense_apply(const Matrix& r, const Matrix& w, std::uint64_t& flops);

struct BenchRow {
  std::size_t d = 0;
  std::size_t cols = 0;
  std::size_t stages = 0;
  std::uint64_t staged_flops = 0;
  std::uint64_t dense_flops = 0;
  /// Median over reps, seconds per application.
  double staged_seconds = 0.0;
  double dense_seconds = 0.0;
  /// Max |staged - dense| on the benchmarked input.
  double max_abs_diff = 0.0;
};

/// One row per d. Throws InvalidDimension for d < 2 and ConfigError for
/// cols == 0 or reps == 0.
std::vector<BenchRow> run_bench(const std::vector<std::size_t>& dims, std::size_t cols,
                                std::size_t reps, std::uint64_t seed = 0);

}  // namespace goft
