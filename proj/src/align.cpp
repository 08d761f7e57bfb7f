#include "goft/align.hpp"

#include <cmath>
#include <string>

#include "goft/error.hpp"

namespace goft {
namespace {

void rotate_in_place(Vector& v, std::size_t i, std::size_t j, double theta) {
  const Block2 b = Block2::rotation(theta);
  const double x = v[static_cast<Eigen::Index>(i)];
  const double y = v[static_cast<Eigen::Index>(j)];
  v[static_cast<Eigen::Index>(i)] = b.a00 * x + b.a01 * y;
  v[static_cast<Eigen::Index>(j)] = b.a10 * x + b.a11 * y;
}

double check_input(const Vector& x) {
  if (x.size() < 2) {
    throw InvalidDimension("alignment needs d >= 2, got " + std::to_string(x.size()));
  }
  const double norm = x.norm();
  if (!(norm > 0.0)) throw DegenerateInput("cannot align the zero vector");
  if (!std::isfinite(norm)) throw DegenerateInput("input vector is not finite");
  return norm;
}

double residual_to_axis(const Vector& rotated, double norm) {
  Vector target = Vector::Zero(rotated.size());
  target[0] = norm;
  return (rotated - target).cwiseAbs().maxCoeff();
}

}  // namespace

double zeroing_angle(double xi, double xj) noexcept {
  if (xi == 0.0 && xj == 0.0) return 0.0;
  // + 0.0 folds a -0.0 result into +0.0.
  return std::atan2(-xj, xi) + 0.0;
}

AlignmentResult align_sequential(const Vector& x) {
  const double norm = check_input(x);
  const auto d = static_cast<std::size_t>(x.size());
  AlignmentResult out;
  out.pairing = Pairing::kSequentialAdjacent;
  out.angles.reserve(d - 1);
  out.pairs.reserve(d - 1);
  Vector work = x;
  for (std::size_t j = d - 1; j >= 1; --j) {
    const std::size_t i = j - 1;
    const double theta = zeroing_angle(work[static_cast<Eigen::Index>(i)],
                                       work[static_cast<Eigen::Index>(j)]);
    rotate_in_place(work, i, j, theta);
    out.angles.push_back(theta);
    out.pairs.emplace_back(i, j);
  }
  out.rotated = apply_alignment(out, x);
  out.residual = residual_to_axis(out.rotated, norm);
  return out;
}

AlignmentResult align_parallel(const Vector& x, const RotationPlan& plan) {
  const double norm = check_input(x);
  if (static_cast<std::size_t>(x.size()) != plan.dim()) {
    throw ShapeError("align_parallel: vector length " + std::to_string(x.size()) +
                     " does not match plan dimension " + std::to_string(plan.dim()));
  }
  AlignmentResult out;
  out.pairing = Pairing::kParallelTree;
  out.angles.reserve(plan.total_pairs());
  Vector work = x;
  for (const auto& p : plan.pairs()) {
    const double theta = zeroing_angle(work[static_cast<Eigen::Index>(p.i)],
                                       work[static_cast<Eigen::Index>(p.j)]);
    rotate_in_place(work, p.i, p.j, theta);
    out.angles.push_back(theta);
    out.pairs.emplace_back(p.i, p.j);
  }
  // Residual is measured by re-applying through the staged chain kernel.
  out.rotated = apply_chain(GivensChain(plan, out.angles), x);
  out.residual = residual_to_axis(out.rotated, norm);
  return out;
}

Vector apply_alignment(const AlignmentResult& result, const Vector& v) {
  if (result.pairing == Pairing::kParallelTree) {
    return apply_chain(GivensChain(build_plan(static_cast<std::size_t>(v.size())), result.angles), v);
  }
  if (static_cast<std::size_t>(v.size()) != result.angles.size() + 1) {
    throw ShapeError("apply_alignment: dimension mismatch");
  }
  Vector out = v;
  for (std::size_t k = 0; k < result.angles.size(); ++k) {
    rotate_in_place(out, result.pairs[k].first, result.pairs[k].second, result.angles[k]);
  }
  return out;
}

std::vector<Vector> alignment_trace(const AlignmentResult& result, const Vector& x) {
  std::vector<Vector> trace;
  if (result.pairing == Pairing::kParallelTree) {
    const GivensChain chain(build_plan(static_cast<std::size_t>(x.size())), result.angles);
    Vector v = x;
    for (std::size_t r = 1; r <= chain.plan().stage_count(); ++r) {
      v = apply_stage(chain, r, v);
      trace.push_back(v);
    }
    return trace;
  }
  Vector v = x;
  for (std::size_t k = 0; k < result.angles.size(); ++k) {
    rotate_in_place(v, result.pairs[k].first, result.pairs[k].second, result.angles[k]);
    trace.push_back(v);
  }
  return trace;
}

Vector TransportMap::apply(const Vector& v) const {
  return transpose_apply(from_axis_, apply_chain(to_axis_, v));
}

Matrix TransportMap::dense() const {
  return dense_matrix(from_axis_).transpose() * dense_matrix(to_axis_);
}

TransportMap transport(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw PreconditionError("transport: vectors have different lengths");
  }
  const double nx = x.norm();
  const double ny = y.norm();
  if (std::abs(nx - ny) > 1e-9 * nx) {
    throw PreconditionError("transport: norms differ (" + std::to_string(nx) + " vs " +
                            std::to_string(ny) + ")");
  }
  const RotationPlan plan = build_plan(static_cast<std::size_t>(x.size()));
  auto ax = align_parallel(x, plan);
  auto ay = align_parallel(y, plan);
  return TransportMap(GivensChain(plan, std::move(ax.angles)),
                      GivensChain(plan, std::move(ay.angles)));
}

}  // namespace goft
