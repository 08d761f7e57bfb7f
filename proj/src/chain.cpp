#include "goft/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "goft/error.hpp"

namespace goft {
namespace {

void check_rows(std::size_t expected, Eigen::Index got, const char* what) {
  if (got < 0 || static_cast<std::size_t>(got) != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " rows, got " + std::to_string(got));
  }
}

using kernel::rotate_pair;

void check_count(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " parameters, got " + std::to_string(got));
  }
}

Vector apply_blocks(const RotationPlan& plan, const std::vector<Block2>& blocks,
                    const Vector& v) {
  check_rows(plan.dim(), v.size(), "apply_chain");
  Vector out = v;
  kernel::apply_column(plan, blocks, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Matrix apply_blocks(const RotationPlan& plan, const std::vector<Block2>& blocks,
                    const Matrix& w) {
  check_rows(plan.dim(), w.rows(), "apply_chain_matrix");
  Matrix out = w;
  kernel::apply_matrix(plan, blocks, out);
  return out;
}

void scale_rows(std::span<const double> scale, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) *= scale[static_cast<std::size_t>(r)];
}

}  // namespace

Block2 Block2::rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c, -s, s, c};
}

QuasiBlock QuasiBlock::from_rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {{c, s}, {-s, c}};
}

GivensChain::GivensChain(RotationPlan plan)
    : plan_(std::move(plan)), angles_(plan_.total_pairs(), 0.0) {}

GivensChain::GivensChain(RotationPlan plan, std::vector<double> angles)
    : plan_(std::move(plan)), angles_(std::move(angles)) {
  if (angles_.size() != plan_.total_pairs()) {
    throw ShapeError("GivensChain: expected " + std::to_string(plan_.total_pairs()) +
                     " angles, got " + std::to_string(angles_.size()));
  }
}

std::vector<Block2> GivensChain::blocks() const {
  std::vector<Block2> out;
  out.reserve(angles_.size());
  for (double theta : angles_) out.push_back(Block2::rotation(theta));
  return out;
}

QuasiChain::QuasiChain(RotationPlan plan)
    : plan_(std::move(plan)), blocks_(plan_.total_pairs()) {}

QuasiChain::QuasiChain(RotationPlan plan, std::vector<QuasiBlock> blocks)
    : plan_(std::move(plan)), blocks_(std::move(blocks)) {
  if (blocks_.size() != plan_.total_pairs()) {
    throw ShapeError("QuasiChain: expected " + std::to_string(plan_.total_pairs()) +
                     " blocks, got " + std::to_string(blocks_.size()));
  }
}

std::vector<Block2> QuasiChain::block_matrices() const {
  std::vector<Block2> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(b.matrix());
  return out;
}

NormOnlyChain::NormOnlyChain(RotationPlan plan)
    : base_(std::move(plan)), scale_(base_.dim(), 1.0) {}

NormOnlyChain::NormOnlyChain(GivensChain base, std::vector<double> scale)
    : base_(std::move(base)), scale_(std::move(scale)) {
  if (scale_.size() != base_.dim()) {
    throw ShapeError("NormOnlyChain: expected " + std::to_string(base_.dim()) +
                     " scale entries, got " + std::to_string(scale_.size()));
  }
}

std::vector<double> parameters(const GivensChain& chain) {
  return {chain.angles().begin(), chain.angles().end()};
}

std::vector<double> parameters(const QuasiChain& chain) {
  std::vector<double> out;
  out.reserve(4 * chain.blocks().size());
  for (const auto& b : chain.blocks()) {
    out.insert(out.end(), {b.alpha[0], b.alpha[1], b.beta[0], b.beta[1]});
  }
  return out;
}

std::vector<double> parameters(const NormOnlyChain& chain) {
  std::vector<double> out = parameters(chain.base());
  out.insert(out.end(), chain.scale().begin(), chain.scale().end());
  return out;
}

void set_parameters(GivensChain& chain, std::span<const double> values) {
  check_count(chain.angles().size(), values.size(), "set_parameters");
  std::copy(values.begin(), values.end(), chain.angles().begin());
}

void set_parameters(QuasiChain& chain, std::span<const double> values) {
  auto blocks = chain.blocks();
  check_count(4 * blocks.size(), values.size(), "set_parameters");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    blocks[k].alpha = {values[4 * k], values[4 * k + 1]};
    blocks[k].beta = {values[4 * k + 2], values[4 * k + 3]};
  }
}

void set_parameters(NormOnlyChain& chain, std::span<const double> values) {
  const std::size_t na = chain.base().angles().size();
  check_count(na + chain.scale().size(), values.size(), "set_parameters");
  set_parameters(chain.base(), values.first(na));
  std::copy(values.begin() + static_cast<std::ptrdiff_t>(na), values.end(),
            chain.scale().begin());
}

namespace kernel {

void apply_column(const RotationPlan& plan, std::span<const Block2> blocks,
                  std::span<double> column, std::uint64_t* multiplies) {
  const auto pairs = plan.pairs();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    rotate_pair(blocks[k], column[pairs[k].i], column[pairs[k].j]);
  }
  if (multiplies) *multiplies += 4 * pairs.size();
}

void apply_column_transposed(const RotationPlan& plan,
                             std::span<const Block2> blocks,
                             std::span<double> column) {
  const auto pairs = plan.pairs();
  for (std::size_t k = pairs.size(); k-- > 0;) {
    rotate_pair(blocks[k].transposed(), column[pairs[k].i], column[pairs[k].j]);
  }
}

void apply_stage_column(const RotationPlan& plan, std::span<const Block2> blocks,
                        std::size_t r, std::span<double> column) {
  const auto pairs = plan.pairs();
  for (std::size_t k = plan.stage_begin(r); k < plan.stage_end(r); ++k) {
    rotate_pair(blocks[k], column[pairs[k].i], column[pairs[k].j]);
  }
}

void apply_matrix(const RotationPlan& plan, std::span<const Block2> blocks, Matrix& m,
                  std::uint64_t* multiplies) {
  check_rows(plan.dim(), m.rows(), "apply_matrix");
  const auto rows = static_cast<std::size_t>(m.rows());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    apply_column(plan, blocks, {m.col(c).data(), rows}, multiplies);
  }
}

}  // namespace kernel

Vector apply_chain(const GivensChain& chain, const Vector& v) {
  return apply_blocks(chain.plan(), chain.blocks(), v);
}

Vector apply_chain(const QuasiChain& chain, const Vector& v) {
  return apply_blocks(chain.plan(), chain.block_matrices(), v);
}

Vector apply_chain(const NormOnlyChain& chain, const Vector& v) {
  Vector out = apply_chain(chain.base(), v);
  for (Eigen::Index r = 0; r < out.size(); ++r) out[r] *= chain.scale()[static_cast<std::size_t>(r)];
  return out;
}

Matrix apply_chain_matrix(const GivensChain& chain, const Matrix& w) {
  return apply_blocks(chain.plan(), chain.blocks(), w);
}

Matrix apply_chain_matrix(const QuasiChain& chain, const Matrix& w) {
  return apply_blocks(chain.plan(), chain.block_matrices(), w);
}

Matrix apply_chain_matrix(const NormOnlyChain& chain, const Matrix& w) {
  Matrix out = apply_chain_matrix(chain.base(), w);
  scale_rows(chain.scale(), out);
  return out;
}

Vector transpose_apply(const GivensChain& chain, const Vector& v) {
  check_rows(chain.dim(), v.size(), "transpose_apply");
  Vector out = v;
  const auto blocks = chain.blocks();
  kernel::apply_column_transposed(chain.plan(), blocks,
                                  {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Vector transpose_apply(const QuasiChain& chain, const Vector& v) {
  check_rows(chain.dim(), v.size(), "transpose_apply");
  Vector out = v;
  const auto blocks = chain.block_matrices();
  kernel::apply_column_transposed(chain.plan(), blocks,
                                  {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Vector apply_stage(const GivensChain& chain, std::size_t r, const Vector& v) {
  check_rows(chain.dim(), v.size(), "apply_stage");
  if (r == 0 || r > chain.plan().stage_count()) {
    throw std::out_of_range("stage index out of range: " + std::to_string(r));
  }
  Vector out = v;
  const auto blocks = chain.blocks();
  kernel::apply_stage_column(chain.plan(), blocks, r,
                             {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Matrix dense_matrix(const GivensChain& chain) {
  const auto d = static_cast<Eigen::Index>(chain.dim());
  return apply_chain_matrix(chain, Matrix::Identity(d, d));
}

Matrix dense_matrix(const QuasiChain& chain) {
  const auto d = static_cast<Eigen::Index>(chain.dim());
  return apply_chain_matrix(chain, Matrix::Identity(d, d));
}

Matrix dense_matrix(const NormOnlyChain& chain) {
  const auto d = static_cast<Eigen::Index>(chain.dim());
  return apply_chain_matrix(chain, Matrix::Identity(d, d));
}

}  // namespace goft
