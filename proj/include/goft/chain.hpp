#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "goft/plan.hpp"

namespace goft {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A 2x2 real block acting on one axis pair:
///   (v_i, v_j) <- [[a00, a01], [a10, a11]] (v_i, v_j).
struct Block2 {
  double a00 = 1.0;
  double a01 = 0.0;
  double a10 = 0.0;
  double a11 = 1.0;

  static Block2 rotation(double theta);
  Block2 transposed() const noexcept { return {a00, a10, a01, a11}; }

  friend bool operator==(const Block2&, const Block2&) = default;
};

/// GOFT parameterization: one angle per plan pair, identity at construction.
class GivensChain {
 public:
  explicit GivensChain(RotationPlan plan);
  GivensChain(RotationPlan plan, std::vector<double> angles);

  const RotationPlan& plan() const noexcept { return plan_; }
  std::size_t dim() const noexcept { return plan_.dim(); }

  std::span<const double> angles() const noexcept { return angles_; }
  std::span<double> angles() noexcept { return angles_; }

  /// Rotation blocks in plan order, [[cos, -sin], [sin, cos]].
  std::vector<Block2> blocks() const;

 private:
  RotationPlan plan_;
  std::vector<double> angles_;
};

/// Quasi-Givens block stored by columns: alpha = first column, beta = second.
struct QuasiBlock {
  std::array<double, 2> alpha{1.0, 0.0};
  std::array<double, 2> beta{0.0, 1.0};

  static QuasiBlock from_rotation(double theta);
  Block2 matrix() const noexcept { return {alpha[0], beta[0], alpha[1], beta[1]}; }
  double inner() const noexcept { return alpha[0] * beta[0] + alpha[1] * beta[1]; }

  friend bool operator==(const QuasiBlock&, const QuasiBlock&) = default;
};

/// qGOFT parameterization: a free 2x2 block per plan pair.
class QuasiChain {
 public:
  explicit QuasiChain(RotationPlan plan);
  QuasiChain(RotationPlan plan, std::vector<QuasiBlock> blocks);

  const RotationPlan& plan() const noexcept { return plan_; }
  std::size_t dim() const noexcept { return plan_.dim(); }

  std::span<const QuasiBlock> blocks() const noexcept { return blocks_; }
  std::span<QuasiBlock> blocks() noexcept { return blocks_; }

  std::vector<Block2> block_matrices() const;

 private:
  RotationPlan plan_;
  std::vector<QuasiBlock> blocks_;
};

/// GOFT*: diag(scale) * R, where R is a Givens chain. Scale starts at ones.
class NormOnlyChain {
 public:
  explicit NormOnlyChain(RotationPlan plan);
  NormOnlyChain(GivensChain base, std::vector<double> scale);

  const RotationPlan& plan() const noexcept { return base_.plan(); }
  std::size_t dim() const noexcept { return base_.dim(); }

  const GivensChain& base() const noexcept { return base_; }
  GivensChain& base() noexcept { return base_; }
  std::span<const double> scale() const noexcept { return scale_; }
  std::span<double> scale() noexcept { return scale_; }

 private:
  GivensChain base_;
  std::vector<double> scale_;
};

/// Flat parameter vectors in plan order. Quasi blocks flatten as
/// (alpha_1, alpha_2, beta_1, beta_2); GOFT* flattens as angles then scale.
std::vector<double> parameters(const GivensChain& chain);
std::vector<double> parameters(const QuasiChain& chain);
std::vector<double> parameters(const NormOnlyChain& chain);

/// Inverse of parameters(); throws ShapeError on a length mismatch.
void set_parameters(GivensChain& chain, std::span<const double> values);
void set_parameters(QuasiChain& chain, std::span<const double> values);
void set_parameters(NormOnlyChain& chain, std::span<const double> values);

namespace kernel {

inline void rotate_pair(const Block2& b, double& x, double& y) noexcept {
  const double nx = b.a00 * x + b.a01 * y;
  const double ny = b.a10 * x + b.a11 * y;
  x = nx;
  y = ny;
}

/// Applies blocks stage by stage (plan order) to one contiguous column.
/// When `multiplies` is non-null it is incremented by 4 per pair update.
void apply_column(const RotationPlan& plan, std::span<const Block2> blocks,
                  std::span<double> column, std::uint64_t* multiplies = nullptr);

/// Applies the transpose of the staged product: stages in reverse order,
/// each block transposed.
void apply_column_transposed(const RotationPlan& plan,
                             std::span<const Block2> blocks,
                             std::span<double> column);

/// Applies only the pairs of stage `r` (1-based).
void apply_stage_column(const RotationPlan& plan, std::span<const Block2> blocks,
                        std::size_t r, std::span<double> column);

/// Column-wise staged application to every column of `m` (d rows).
void apply_matrix(const RotationPlan& plan, std::span<const Block2> blocks,
                  Matrix& m, std::uint64_t* multiplies = nullptr);

}  // namespace kernel

// Staged application; none of these materialize a d x d matrix.
// All throw ShapeError when the input row count differs from the chain's d.

Vector apply_chain(const GivensChain& chain, const Vector& v);
Vector apply_chain(const QuasiChain& chain, const Vector& v);
Vector apply_chain(const NormOnlyChain& chain, const Vector& v);

Matrix apply_chain_matrix(const GivensChain& chain, const Matrix& w);
Matrix apply_chain_matrix(const QuasiChain& chain, const Matrix& w);
Matrix apply_chain_matrix(const NormOnlyChain& chain, const Matrix& w);

/// R^T v. For a Givens chain this is the inverse transform.
Vector transpose_apply(const GivensChain& chain, const Vector& v);
Vector transpose_apply(const QuasiChain& chain, const Vector& v);

/// Applies a single stage (1-based) of the chain to v.
Vector apply_stage(const GivensChain& chain, std::size_t r, const Vector& v);

/// Materialized transform; intended for oracles and merging only.
Matrix dense_matrix(const GivensChain& chain);
Matrix dense_matrix(const QuasiChain& chain);
Matrix dense_matrix(const NormOnlyChain& chain);

}  // namespace goft
