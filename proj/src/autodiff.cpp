#include "goft/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "goft/error.hpp"

namespace goft {
namespace {

using kernel::rotate_pair;

ChainTape record(ChainKind kind, const RotationPlan& plan, std::vector<Block2> blocks,
                 Matrix& work) {
  if (static_cast<std::size_t>(work.rows()) != plan.dim()) {
    throw ShapeError("forward_with_tape: expected " + std::to_string(plan.dim()) +
                     " rows, got " + std::to_string(work.rows()));
  }
  ChainTape tape;
  tape.kind = kind;
  tape.dim = plan.dim();
  tape.cols = static_cast<std::size_t>(work.cols());
  tape.blocks = std::move(blocks);
  tape.stages.resize(plan.stage_count());
  for (std::size_t r = 1; r <= plan.stage_count(); ++r) {
    tape.stages[r - 1].resize(2 * tape.cols * plan.stage(r).size());
  }
  const auto pairs = plan.pairs();
  for (std::size_t c = 0; c < tape.cols; ++c) {
    double* col = work.col(static_cast<Eigen::Index>(c)).data();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& p = pairs[k];
      const std::size_t width = plan.stage(p.stage).size();
      double* slot = &tape.stages[p.stage - 1][2 * (c * width + p.slot)];
      slot[0] = col[p.i];
      slot[1] = col[p.j];
      rotate_pair(tape.blocks[k], col[p.i], col[p.j]);
    }
  }
  return tape;
}

static_assert(sizeof(Block2) == 4 * sizeof(double));

// Bitwise, so a NaN parameter still matches its own tape.
bool same_bits(const double* a, const double* b, std::size_t count) {
  return std::memcmp(a, b, count * sizeof(double)) == 0;
}

void check_tape(ChainKind kind, const RotationPlan& plan, const std::vector<Block2>& blocks,
                const ChainTape& tape, const Matrix& d_output) {
  if (tape.kind != kind) throw TapeError("tape was recorded for a different chain kind");
  if (tape.dim != plan.dim() || tape.depth() != plan.stage_count()) {
    throw TapeError("tape dimension does not match chain");
  }
  if (tape.blocks.size() != blocks.size() ||
      !same_bits(&tape.blocks.data()->a00, &blocks.data()->a00, 4 * blocks.size())) {
    throw TapeError("stale tape: chain parameters changed since the forward pass");
  }
  if (static_cast<std::size_t>(d_output.rows()) != tape.dim ||
      static_cast<std::size_t>(d_output.cols()) != tape.cols) {
    throw ShapeError("backward: gradient shape does not match recorded forward");
  }
}

// Reverse sweep shared by all chain kinds. Accumulates dL/dB per block
// (columns summed in ascending order) and overwrites `grad` with dL/dInput.
std::vector<Block2> sweep_back(const RotationPlan& plan, const ChainTape& tape, Matrix& grad) {
  std::vector<Block2> d_blocks(plan.total_pairs(), Block2{0.0, 0.0, 0.0, 0.0});
  const auto pairs = plan.pairs();
  for (std::size_t c = 0; c < tape.cols; ++c) {
    double* g = grad.col(static_cast<Eigen::Index>(c)).data();
    for (std::size_t k = pairs.size(); k-- > 0;) {
      const auto& p = pairs[k];
      const std::size_t width = plan.stage(p.stage).size();
      const double* in = &tape.stages[p.stage - 1][2 * (c * width + p.slot)];
      const double gi = g[p.i];
      const double gj = g[p.j];
      Block2& db = d_blocks[k];
      db.a00 += gi * in[0];
      db.a01 += gi * in[1];
      db.a10 += gj * in[0];
      db.a11 += gj * in[1];
      rotate_pair(tape.blocks[k].transposed(), g[p.i], g[p.j]);
    }
  }
  return d_blocks;
}

std::vector<double> angle_gradient(std::span<const double> angles,
                                   const std::vector<Block2>& d_blocks) {
  std::vector<double> out(angles.size());
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const double c = std::cos(angles[k]);
    const double s = std::sin(angles[k]);
    const Block2& g = d_blocks[k];
    // dB/dtheta = [[-s, -c], [c, -s]]
    out[k] = -s * g.a00 - c * g.a01 + c * g.a10 - s * g.a11;
  }
  return out;
}

template <typename Chain>
GradCheckReport grad_check_impl(const Chain& chain, const Matrix& input,
                                const OutputLoss& loss, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;

  auto taped = forward_with_tape(chain, input);
  Matrix d_output = Matrix::Zero(taped.output.rows(), taped.output.cols());
  loss(taped.output, &d_output);
  const auto analytic = backward(chain, taped.tape, d_output).grad.flat();

  const std::vector<double> base = parameters(chain);
  Chain probe = chain;
  std::vector<double> shifted = base;
  const double h = kFiniteDifferenceStep;
  for (std::size_t k = 0; k < base.size(); ++k) {
    shifted[k] = base[k] + h;
    set_parameters(probe, shifted);
    const double plus = loss(apply_chain_matrix(probe, input), nullptr);
    shifted[k] = base[k] - h;
    set_parameters(probe, shifted);
    const double minus = loss(apply_chain_matrix(probe, input), nullptr);
    shifted[k] = base[k];

    ParamCheck pc;
    pc.index = k;
    pc.analytic = analytic[k];
    pc.numeric = (plus - minus) / (2.0 * h);
    pc.rel_error = relative_error(pc.analytic, pc.numeric);
    report.max_rel_error = std::max(report.max_rel_error, pc.rel_error);
    report.params.push_back(pc);
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace

std::vector<double> ChainGradient::flat() const {
  switch (kind) {
    case ChainKind::kGivens:
      return d_angles;
    case ChainKind::kQuasi: {
      std::vector<double> out;
      out.reserve(4 * d_blocks.size());
      for (const auto& b : d_blocks) {
        out.insert(out.end(), {b.alpha[0], b.alpha[1], b.beta[0], b.beta[1]});
      }
      return out;
    }
    case ChainKind::kNormOnly: {
      std::vector<double> out = d_angles;
      out.insert(out.end(), d_scale.begin(), d_scale.end());
      return out;
    }
  }
  return {};
}

TapedOutput forward_with_tape(const GivensChain& chain, const Matrix& input) {
  TapedOutput out{input, {}};
  out.tape = record(ChainKind::kGivens, chain.plan(), chain.blocks(), out.output);
  return out;
}

TapedOutput forward_with_tape(const QuasiChain& chain, const Matrix& input) {
  TapedOutput out{input, {}};
  out.tape = record(ChainKind::kQuasi, chain.plan(), chain.block_matrices(), out.output);
  return out;
}

TapedOutput forward_with_tape(const NormOnlyChain& chain, const Matrix& input) {
  TapedOutput out{input, {}};
  out.tape = record(ChainKind::kNormOnly, chain.plan(), chain.base().blocks(), out.output);
  out.tape.scale.assign(chain.scale().begin(), chain.scale().end());
  out.tape.rotated = out.output;
  for (Eigen::Index r = 0; r < out.output.rows(); ++r) {
    out.output.row(r) *= chain.scale()[static_cast<std::size_t>(r)];
  }
  return out;
}

Pullback backward(const GivensChain& chain, const ChainTape& tape, const Matrix& d_output) {
  const auto blocks = chain.blocks();
  check_tape(ChainKind::kGivens, chain.plan(), blocks, tape, d_output);
  Pullback out;
  out.d_input = d_output;
  const auto d_blocks = sweep_back(chain.plan(), tape, out.d_input);
  out.grad.kind = ChainKind::kGivens;
  out.grad.d_angles = angle_gradient(chain.angles(), d_blocks);
  return out;
}

Pullback backward(const QuasiChain& chain, const ChainTape& tape, const Matrix& d_output) {
  const auto blocks = chain.block_matrices();
  check_tape(ChainKind::kQuasi, chain.plan(), blocks, tape, d_output);
  Pullback out;
  out.d_input = d_output;
  const auto d_blocks = sweep_back(chain.plan(), tape, out.d_input);
  out.grad.kind = ChainKind::kQuasi;
  out.grad.d_blocks.reserve(d_blocks.size());
  for (const auto& g : d_blocks) {
    out.grad.d_blocks.push_back({{g.a00, g.a10}, {g.a01, g.a11}});
  }
  return out;
}

Pullback backward(const NormOnlyChain& chain, const ChainTape& tape, const Matrix& d_output) {
  const auto blocks = chain.base().blocks();
  check_tape(ChainKind::kNormOnly, chain.plan(), blocks, tape, d_output);
  if (tape.scale.size() != chain.scale().size() ||
      !same_bits(tape.scale.data(), chain.scale().data(), tape.scale.size())) {
    throw TapeError("stale tape: scale changed since the forward pass");
  }
  Pullback out;
  out.grad.kind = ChainKind::kNormOnly;
  out.grad.d_scale.assign(tape.dim, 0.0);
  out.d_input = d_output;
  for (std::size_t c = 0; c < tape.cols; ++c) {
    for (std::size_t r = 0; r < tape.dim; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const auto ci = static_cast<Eigen::Index>(c);
      out.grad.d_scale[r] += d_output(ri, ci) * tape.rotated(ri, ci);
      out.d_input(ri, ci) = d_output(ri, ci) * tape.scale[r];
    }
  }
  const auto d_blocks = sweep_back(chain.plan(), tape, out.d_input);
  out.grad.d_angles = angle_gradient(chain.base().angles(), d_blocks);
  return out;
}

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const GivensChain& chain, const Matrix& input,
                           const OutputLoss& loss, double tolerance) {
  return grad_check_impl(chain, input, loss, tolerance);
}

GradCheckReport grad_check(const QuasiChain& chain, const Matrix& input,
                           const OutputLoss& loss, double tolerance) {
  return grad_check_impl(chain, input, loss, tolerance);
}

GradCheckReport grad_check(const NormOnlyChain& chain, const Matrix& input,
                           const OutputLoss& loss, double tolerance) {
  return grad_check_impl(chain, input, loss, tolerance);
}

OutputLoss quadratic_loss(Matrix target) {
  return [target = std::move(target)](const Matrix& output, Matrix* d_output) {
    const Matrix diff = output - target;
    if (d_output) *d_output = diff;
    return 0.5 * diff.squaredNorm();
  };
}

}  // namespace goft
