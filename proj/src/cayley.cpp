#include "goft/cayley.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "goft/error.hpp"

namespace goft {

SkewParam::SkewParam(std::size_t d) : dim_(d), upper_(count(d), 0.0) {}

SkewParam::SkewParam(std::size_t d, std::vector<double> upper)
    : dim_(d), upper_(std::move(upper)) {
  if (upper_.size() != count(d)) {
    throw ShapeError("SkewParam: expected " + std::to_string(count(d)) + " entries, got " +
                     std::to_string(upper_.size()));
  }
}

Matrix SkewParam::skew() const {
  const auto d = static_cast<Eigen::Index>(dim_);
  Matrix q = Matrix::Zero(d, d);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      q(i, j) = upper_[k];
      q(j, i) = -upper_[k];
      ++k;
    }
  }
  return q;
}

Matrix cayley(const SkewParam& q) {
  const auto d = static_cast<Eigen::Index>(q.dim());
  const Matrix skew = q.skew();
  const Matrix id = Matrix::Identity(d, d);
  // (I + Q) and (I - Q)^-1 commute, so R = (I - Q)^-1 (I + Q).
  const Eigen::PartialPivLU<Matrix> lu(id - skew);
  const Matrix r = lu.solve(id + skew);
  if (!r.allFinite()) {
    throw NumericError("cayley: linear solve failed (rcond estimate " +
                       std::to_string(lu.rcond()) + ")");
  }
  return r;
}

std::size_t block_diag_param_count(std::size_t d, std::size_t block_size) {
  if (block_size == 0 || d % block_size != 0) {
    throw ConfigError("block size " + std::to_string(block_size) + " does not divide d = " +
                      std::to_string(d));
  }
  return (d / block_size) * SkewParam::count(block_size);
}

Matrix block_diag_oft(std::size_t d, std::size_t block_size, std::span<const SkewParam> blocks) {
  block_diag_param_count(d, block_size);  // validates divisibility
  const std::size_t n_blocks = d / block_size;
  if (blocks.size() != n_blocks) {
    throw ConfigError("block_diag_oft: expected " + std::to_string(n_blocks) +
                      " blocks, got " + std::to_string(blocks.size()));
  }
  const auto b = static_cast<Eigen::Index>(block_size);
  Matrix r = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < n_blocks; ++k) {
    if (blocks[k].dim() != block_size) {
      throw ConfigError("block_diag_oft: block " + std::to_string(k) + " has size " +
                        std::to_string(blocks[k].dim()));
    }
    const auto off = static_cast<Eigen::Index>(k) * b;
    r.block(off, off, b, b) = cayley(blocks[k]);
  }
  return r;
}

CayleyTransform::CayleyTransform(std::size_t d, std::size_t block_size)
    : dim_(d), block_size_(block_size) {
  block_diag_param_count(d, block_size);  // validates divisibility
  blocks_.assign(d / block_size, SkewParam(block_size));
}

std::vector<double> parameters(const CayleyTransform& t) {
  std::vector<double> out;
  for (const auto& b : t.blocks_) out.insert(out.end(), b.values().begin(), b.values().end());
  return out;
}

void set_parameters(CayleyTransform& t, std::span<const double> values) {
  const std::size_t per = SkewParam::count(t.block_size_);
  if (values.size() != per * t.blocks_.size()) {
    throw ShapeError("set_parameters: expected " + std::to_string(per * t.blocks_.size()) +
                     " parameters, got " + std::to_string(values.size()));
  }
  for (std::size_t k = 0; k < t.blocks_.size(); ++k) {
    auto dst = t.blocks_[k].values();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k * per), per, dst.begin());
  }
}

Matrix apply_chain_matrix(const CayleyTransform& t, const Matrix& w) {
  if (static_cast<std::size_t>(w.rows()) != t.dim()) {
    throw ShapeError("apply_chain_matrix: expected " + std::to_string(t.dim()) + " rows");
  }
  return t.dense() * w;
}

Matrix dense_matrix(const CayleyTransform& t) { return t.dense(); }

}  // namespace goft
