#include <doctest.h>

#include <set>
#include <utility>
#include <vector>

#include "goft/error.hpp"
#include "goft/plan.hpp"
#include "oracles.hpp"

using goft::build_plan;
using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

std::vector<Pairs> stage_lists(const goft::RotationPlan& plan) {
  std::vector<Pairs> out;
  for (const auto& stage : plan.stages()) {
    Pairs s;
    for (const auto& p : stage) s.emplace_back(p.i, p.j);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("d=2 has a single pair") {
  const auto plan = build_plan(2);
  CHECK(plan.stage_count() == 1);
  CHECK(stage_lists(plan) == std::vector<Pairs>{{{0, 1}}});
}

TEST_CASE("d=8 matches the power-of-two butterfly") {
  const auto plan = build_plan(8);
  const std::vector<Pairs> expected{{{0, 1}, {2, 3}, {4, 5}, {6, 7}}, {{0, 2}, {4, 6}}, {{0, 4}}};
  CHECK(stage_lists(plan) == expected);
  CHECK(plan.total_pairs() == 7);
}

TEST_CASE("d=5 skips out-of-range partners") {
  const auto plan = build_plan(5);
  const std::vector<Pairs> expected{{{0, 1}, {2, 3}}, {{0, 2}}, {{0, 4}}};
  CHECK(stage_lists(plan) == expected);
  CHECK(plan.total_pairs() == 4);
}

TEST_CASE("d < 2 is rejected") {
  CHECK_THROWS_AS(build_plan(0), goft::InvalidDimension);
  CHECK_THROWS_AS(build_plan(1), goft::InvalidDimension);
}

TEST_CASE("plan invariants hold for d = 2..512") {
  for (std::size_t d = 2; d <= 512; ++d) {
    CAPTURE(d);
    const auto plan = build_plan(d);
    REQUIRE(plan.total_pairs() == d - 1);
    std::size_t expected_stages = 0;
    while ((std::size_t{1} << expected_stages) < d) ++expected_stages;
    REQUIRE(plan.stage_count() == expected_stages);

    // Matches the direct enumeration of the pairing formula.
    REQUIRE(stage_lists(plan) == goft::oracle::stage_pairs(d));

    // Disjoint within a stage; every axis 1..d-1 is a j exactly once.
    std::vector<int> as_j(d, 0);
    for (std::size_t r = 1; r <= plan.stage_count(); ++r) {
      std::set<std::size_t> seen;
      std::size_t slot = 0;
      for (const auto& p : plan.stage(r)) {
        REQUIRE(p.i < p.j);
        REQUIRE(p.j < d);
        REQUIRE(p.stage == r);
        REQUIRE(p.slot == slot++);
        REQUIRE(seen.insert(p.i).second);
        REQUIRE(seen.insert(p.j).second);
        ++as_j[p.j];
      }
    }
    REQUIRE(as_j[0] == 0);
    for (std::size_t a = 1; a < d; ++a) REQUIRE(as_j[a] == 1);
  }
}

TEST_CASE("build_plan is deterministic") {
  CHECK(build_plan(37) == build_plan(37));
  CHECK_FALSE(build_plan(37) == build_plan(38));
}
