#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "goft/chain.hpp"
#include "goft/plan.hpp"

namespace goft {

enum class Pairing { kParallelTree, kSequentialAdjacent };

/// Angles that carry x onto ||x|| e0, together with the pairing they belong
/// to and the achieved residual (max-abs deviation from the target).
struct AlignmentResult {
  std::vector<double> angles;
  Pairing pairing = Pairing::kParallelTree;
  /// Axis pairs in application order; for the tree pairing this is plan order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  Vector rotated;
  double residual = 0.0;
};

/// Rotation that zeroes x_j by folding it into x_i; lands x_i on
/// +sqrt(x_i^2 + x_j^2). Returns 0 when both coordinates are zero.
double zeroing_angle(double xi, double xj) noexcept;

/// Adjacent-pair sweep (d-2, d-1), (d-3, d-2), ..., (0, 1).
/// Throws DegenerateInput for the zero vector, InvalidDimension for d < 2.
AlignmentResult align_sequential(const Vector& x);

/// Tree pairing: stage by stage, pair (i, j) zeroes coordinate j.
/// Angles come back in plan order and can be loaded into a GivensChain.
AlignmentResult align_parallel(const Vector& x, const RotationPlan& plan);

/// Re-applies an alignment's angles to `v` with the matching pairing.
Vector apply_alignment(const AlignmentResult& result, const Vector& v);

/// Vector after each stage (tree pairing) or each rotation (sequential).
std::vector<Vector> alignment_trace(const AlignmentResult& result, const Vector& x);

/// x -> y for equal-norm vectors, composed as align(y)^-1 after align(x).
class TransportMap {
 public:
  TransportMap(GivensChain to_axis, GivensChain from_axis)
      : to_axis_(std::move(to_axis)), from_axis_(std::move(from_axis)) {}

  Vector apply(const Vector& v) const;
  /// Dense form; for tests.
  Matrix dense() const;

  const GivensChain& to_axis() const noexcept { return to_axis_; }
  const GivensChain& from_axis() const noexcept { return from_axis_; }
  std::size_t parameter_count() const noexcept {
    return to_axis_.angles().size() + from_axis_.angles().size();
  }

 private:
  GivensChain to_axis_;
  GivensChain from_axis_;
};

/// Throws PreconditionError when | ||x|| - ||y|| | > 1e-9 ||x|| or sizes differ.
TransportMap transport(const Vector& x, const Vector& y);

}  // namespace goft
