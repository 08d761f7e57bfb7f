#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "goft/chain.hpp"

namespace goft {

enum class ChainKind { kGivens, kQuasi, kNormOnly };

/// Saved forward state for one staged application to a d x n input.
///
/// `stages[r - 1]` holds, for every column and every pair of stage r, the
/// (v_i, v_j) values consumed by that pair, laid out [column][slot][2].
/// The blocks used in the forward pass are kept so a backward call against a
/// chain whose parameters have since changed is rejected.
struct ChainTape {
  ChainKind kind = ChainKind::kGivens;
  std::size_t dim = 0;
  std::size_t cols = 0;
  std::vector<Block2> blocks;
  std::vector<double> scale;
  std::vector<std::vector<double>> stages;
  Matrix rotated;  // GOFT* only: R V before the diagonal scaling.

  std::size_t depth() const noexcept { return stages.size(); }
};

/// Gradient in the owning chain's parameter layout. Only the fields that
/// belong to the chain kind are populated.
struct ChainGradient {
  ChainKind kind = ChainKind::kGivens;
  std::vector<double> d_angles;
  std::vector<QuasiBlock> d_blocks;
  std::vector<double> d_scale;

  /// Same ordering as parameters(chain).
  std::vector<double> flat() const;
};

struct TapedOutput {
  Matrix output;
  ChainTape tape;
};

struct Pullback {
  ChainGradient grad;
  Matrix d_input;
};

// Output is bit-identical to apply_chain_matrix (same kernel, same order).
TapedOutput forward_with_tape(const GivensChain& chain, const Matrix& input);
TapedOutput forward_with_tape(const QuasiChain& chain, const Matrix& input);
TapedOutput forward_with_tape(const NormOnlyChain& chain, const Matrix& input);

// Throws TapeError when the tape was produced by another chain kind, shape or
// parameter state; ShapeError when d_output does not match the tape.
Pullback backward(const GivensChain& chain, const ChainTape& tape, const Matrix& d_output);
Pullback backward(const QuasiChain& chain, const ChainTape& tape, const Matrix& d_output);
Pullback backward(const NormOnlyChain& chain, const ChainTape& tape, const Matrix& d_output);

/// Scalar loss of the chain output. Must fill `d_output` (same shape as
/// output) when it is non-null.
using OutputLoss = std::function<double(const Matrix& output, Matrix* d_output)>;

struct ParamCheck {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Central-difference step used by grad_check.
inline constexpr double kFiniteDifferenceStep = 1e-6;

/// Floor on the relative-error denominator, |a - n| / max(|a|, |n|, floor),
/// so gradients that are nearly zero are compared in absolute terms.
inline constexpr double kRelErrorFloor = 1e-2;

double relative_error(double analytic, double numeric) noexcept;

// Analytic (tape + backward) vs central finite differences over every chain
// parameter, for a loss of the chain applied to `input`.
GradCheckReport grad_check(const GivensChain& chain, const Matrix& input,
                           const OutputLoss& loss, double tolerance);
GradCheckReport grad_check(const QuasiChain& chain, const Matrix& input,
                           const OutputLoss& loss, double tolerance);
GradCheckReport grad_check(const NormOnlyChain& chain, const Matrix& input,
                           const OutputLoss& loss, double tolerance);

/// 0.5 * ||output - target||_F^2 with its gradient; handy for checks.
OutputLoss quadratic_loss(Matrix target);

}  // namespace goft
