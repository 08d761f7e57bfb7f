#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace goft {

/// One plane rotation slot: axes (i, j) with i < j, placed at `stage`
/// (1-based) and position `slot` within that stage.
struct RotationPair {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t stage = 1;
  std::size_t slot = 0;

  friend bool operator==(const RotationPair&, const RotationPair&) = default;
};

/// Fixed binary-reduction pairing for dimension d.
///
/// Stage r (1-based) holds the pairs (i, i + 2^(r-1)) for every i that is a
/// multiple of 2^r and whose partner lies inside [0, d). Pairs inside one
/// stage touch disjoint axes, so a stage is a single sparse orthogonal
/// factor. Every axis 1..d-1 is the `j` of exactly one pair, which gives
/// d - 1 pairs across ceil(log2 d) stages.
///
/// Pairs are stored flat in plan order (stage-major, then slot); parameter
/// vectors of every chain type follow the same order.
class RotationPlan {
 public:
  /// Identifier stored in checkpoints for this pairing rule.
  static constexpr std::string_view kPairingRule = "binary-tree-v1";

  std::size_t dim() const noexcept { return dim_; }
  std::size_t total_pairs() const noexcept { return pairs_.size(); }
  std::size_t stage_count() const noexcept { return stage_offsets_.size() - 1; }

  std::span<const RotationPair> pairs() const noexcept { return pairs_; }

  /// Pairs of stage `r`, 1-based.
  std::span<const RotationPair> stage(std::size_t r) const;

  /// Flat index of the first pair of stage `r` (1-based).
  std::size_t stage_begin(std::size_t r) const { return stage_offsets_.at(r - 1); }
  std::size_t stage_end(std::size_t r) const { return stage_offsets_.at(r); }

  /// Stage pair-lists as separate vectors; convenient for printing/tests.
  std::vector<std::vector<RotationPair>> stages() const;

  friend bool operator==(const RotationPlan& a, const RotationPlan& b) {
    return a.dim_ == b.dim_ && a.pairs_ == b.pairs_;
  }

 private:
  friend RotationPlan build_plan(std::size_t d);

  std::size_t dim_ = 0;
  std::vector<RotationPair> pairs_;
  std::vector<std::size_t> stage_offsets_{0};
};

/// Throws InvalidDimension when d < 2.
RotationPlan build_plan(std::size_t d);

/// ceil(log2 d) for d >= 1.
std::size_t ceil_log2(std::size_t d) noexcept;

}  // namespace goft
