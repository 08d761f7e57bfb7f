#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "goft/chain.hpp"

namespace goft {

/// Strictly-upper-triangular entries of a d x d skew-symmetric Q, row-major:
/// (0,1), (0,2), ..., (0,d-1), (1,2), ...
class SkewParam {
 public:
  explicit SkewParam(std::size_t d);
  SkewParam(std::size_t d, std::vector<double> upper);

  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> values() const noexcept { return upper_; }
  std::span<double> values() noexcept { return upper_; }

  /// Q with Q + Q^T = 0 exactly.
  Matrix skew() const;

  static std::size_t count(std::size_t d) noexcept { return d * (d - 1) / 2; }

 private:
  std::size_t dim_;
  std::vector<double> upper_;
};

/// R = (I + Q)(I - Q)^-1 via a partial-pivot LU solve.
/// Throws NumericError (with the reciprocal condition estimate) if the
/// solve fails, which skew-symmetric Q should never trigger.
Matrix cayley(const SkewParam& q);

/// diag(R_1, ..., R_N), one Cayley block of size b per SkewParam.
/// Throws ConfigError when d is not N * b or a block has the wrong size.
Matrix block_diag_oft(std::size_t d, std::size_t block_size, std::span<const SkewParam> blocks);

/// Parameter count of the block-diagonal OFT baseline, (d / b) * b(b-1)/2.
std::size_t block_diag_param_count(std::size_t d, std::size_t block_size);

/// Block-diagonal Cayley transform as a trainable object (b = d is full OFT).
class CayleyTransform {
 public:
  CayleyTransform(std::size_t d, std::size_t block_size);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t block_size() const noexcept { return block_size_; }
  std::span<const SkewParam> blocks() const noexcept { return blocks_; }

  Matrix dense() const { return block_diag_oft(dim_, block_size_, blocks_); }

 private:
  friend std::vector<double> parameters(const CayleyTransform&);
  friend void set_parameters(CayleyTransform&, std::span<const double>);

  std::size_t dim_;
  std::size_t block_size_;
  std::vector<SkewParam> blocks_;
};

std::vector<double> parameters(const CayleyTransform& t);
void set_parameters(CayleyTransform& t, std::span<const double> values);

Matrix apply_chain_matrix(const CayleyTransform& t, const Matrix& w);
Matrix dense_matrix(const CayleyTransform& t);

}  // namespace goft
