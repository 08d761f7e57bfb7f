#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace goft {

struct VerifyOptions {
  std::vector<std::size_t> dims{2, 3, 5, 8, 16, 33, 64};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Test mode: poisons one angle per chain in the orthogonality checks.
  bool corrupt_angles = false;
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  /// Largest observed error against `tolerance`, plus where it happened.
  double worst = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  bool passed() const noexcept;
};

/// Runs the invariant suite: plan counts, orthogonality, determinant,
/// Cayley orthogonality, alignment, transport, gradient checks and merge
/// equivalence, over every dimension and seed in `options`.
VerifyReport run_verify(const VerifyOptions& options = {});

}  // namespace goft
