#include "goft/plan.hpp"

#include <string>

#include "goft/error.hpp"

namespace goft {

std::size_t ceil_log2(std::size_t d) noexcept {
  std::size_t r = 0;
  std::size_t span = 1;
  while (span < d) {
    span <<= 1;
    ++r;
  }
  return r;
}

RotationPlan build_plan(std::size_t d) {
  if (d < 2) {
    throw InvalidDimension("rotation plan needs d >= 2, got " + std::to_string(d));
  }
  RotationPlan plan;
  plan.dim_ = d;
  plan.pairs_.reserve(d - 1);
  const std::size_t stages = ceil_log2(d);
  for (std::size_t r = 1; r <= stages; ++r) {
    const std::size_t half = std::size_t{1} << (r - 1);
    const std::size_t stride = half << 1;
    std::size_t slot = 0;
    for (std::size_t i = 0; i + half < d; i += stride) {
      plan.pairs_.push_back({i, i + half, r, slot++});
    }
    plan.stage_offsets_.push_back(plan.pairs_.size());
  }
  return plan;
}

std::span<const RotationPair> RotationPlan::stage(std::size_t r) const {
  if (r == 0 || r > stage_count()) {
    throw std::out_of_range("stage index out of range: " + std::to_string(r));
  }
  return std::span<const RotationPair>(pairs_).subspan(
      stage_offsets_[r - 1], stage_offsets_[r] - stage_offsets_[r - 1]);
}

std::vector<std::vector<RotationPair>> RotationPlan::stages() const {
  std::vector<std::vector<RotationPair>> out;
  out.reserve(stage_count());
  for (std::size_t r = 1; r <= stage_count(); ++r) {
    auto s = stage(r);
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

}  // namespace goft
