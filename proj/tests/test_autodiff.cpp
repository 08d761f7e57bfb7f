#include <doctest.h>

#include <cmath>
#include <random>

#include "goft/autodiff.hpp"
#include "goft/error.hpp"
#include "oracles.hpp"

using namespace goft;

namespace {

// Loss 0.5 * ||R V - T||^2 evaluated through the explicit dense product.
double dense_loss(const Matrix& r, const Matrix& v, const Matrix& target) {
  return 0.5 * (r * v - target).squaredNorm();
}

}  // namespace

TEST_CASE("forward_with_tape matches apply_chain_matrix bit for bit") {
  std::mt19937_64 rng(1);
  for (std::size_t d : {2, 5, 16}) {
    const Matrix v = oracle::random_matrix(rng, d, 3);
    const GivensChain g(build_plan(d), oracle::random_angles(rng, d - 1));
    CHECK(forward_with_tape(g, v).output == apply_chain_matrix(g, v));
    QuasiChain q(build_plan(d));
    set_parameters(q, oracle::random_quasi(rng, d - 1));
    CHECK(forward_with_tape(q, v).output == apply_chain_matrix(q, v));
    NormOnlyChain n(build_plan(d));
    n.scale()[0] = 1.5;
    CHECK(forward_with_tape(n, v).output == apply_chain_matrix(n, v));
    CHECK(forward_with_tape(g, v).tape.depth() == build_plan(d).stage_count());
  }
}

TEST_CASE("identity chain tape") {
  std::mt19937_64 rng(2);
  const Matrix v = oracle::random_matrix(rng, 8, 2);
  const auto taped = forward_with_tape(GivensChain(build_plan(8)), v);
  CHECK(taped.output == v);
  for (const auto& b : taped.tape.blocks) CHECK(b == Block2{});
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(3);
  const GivensChain g(build_plan(6), oracle::random_angles(rng, 5));
  const Matrix v = oracle::random_matrix(rng, 6, 4);
  const auto taped = forward_with_tape(g, v);
  const auto pb = backward(g, taped.tape, Matrix::Zero(6, 4));
  for (double x : pb.grad.d_angles) CHECK(x == 0.0);
  CHECK(pb.d_input.isZero(0.0));
}

TEST_CASE("2-D analytic derivative at theta = 0") {
  // L = first output coordinate of R (0, 1)^T, so dL/dtheta = -cos(0) = -1.
  const GivensChain g(build_plan(2), {0.0});
  Matrix v(2, 1);
  v << 0.0, 1.0;
  const auto taped = forward_with_tape(g, v);
  Matrix up(2, 1);
  up << 1.0, 0.0;
  const auto pb = backward(g, taped.tape, up);
  CHECK(pb.grad.d_angles[0] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("gradients match finite differences of the dense oracle") {
  std::mt19937_64 rng(4);
  for (std::size_t d : {2, 3, 5, 8, 16, 33}) {
    CAPTURE(d);
    const std::size_t n = 3;
    const Matrix v = oracle::random_matrix(rng, d, n);
    const Matrix target = oracle::random_matrix(rng, d, n);

    const auto angles = oracle::random_angles(rng, d - 1);
    const GivensChain g(build_plan(d), angles);
    const auto taped = forward_with_tape(g, v);
    const auto pb = backward(g, taped.tape, taped.output - target);
    const auto fd = oracle::central_differences(
        [&](const std::vector<double>& p) {
          return dense_loss(oracle::dense_givens_product(d, p), v, target);
        },
        angles);
    for (std::size_t k = 0; k < fd.size(); ++k) {
      CHECK(relative_error(pb.grad.d_angles[k], fd[k]) < 1e-6);
    }

    const auto flat = oracle::random_quasi(rng, d - 1);
    QuasiChain q(build_plan(d));
    set_parameters(q, flat);
    const auto qt = forward_with_tape(q, v);
    const auto qpb = backward(q, qt.tape, qt.output - target);
    const auto qfd = oracle::central_differences(
        [&](const std::vector<double>& p) {
          return dense_loss(oracle::dense_quasi_product(d, p), v, target);
        },
        flat);
    const auto qflat = qpb.grad.flat();
    for (std::size_t k = 0; k < qfd.size(); ++k) {
      CHECK(relative_error(qflat[k], qfd[k]) < 1e-5);
    }
  }
}

TEST_CASE("pullback equals transpose_apply for givens chains") {
  std::mt19937_64 rng(5);
  const std::size_t d = 13;
  const GivensChain g(build_plan(d), oracle::random_angles(rng, d - 1));
  const Matrix v = oracle::random_matrix(rng, d, 1);
  const Matrix up = oracle::random_matrix(rng, d, 1);
  const auto pb = backward(g, forward_with_tape(g, v).tape, up);
  CHECK(oracle::max_abs(pb.d_input - transpose_apply(g, Vector(up.col(0)))) <= 1e-12);
}

TEST_CASE("backward is linear in the upstream gradient") {
  std::mt19937_64 rng(6);
  const std::size_t d = 10;
  QuasiChain q(build_plan(d));
  set_parameters(q, oracle::random_quasi(rng, d - 1));
  const Matrix v = oracle::random_matrix(rng, d, 2);
  const auto tape = forward_with_tape(q, v).tape;
  const Matrix a = oracle::random_matrix(rng, d, 2);
  const Matrix b = oracle::random_matrix(rng, d, 2);
  const auto ga = backward(q, tape, a).grad.flat();
  const auto gb = backward(q, tape, b).grad.flat();
  const auto gab = backward(q, tape, 2.0 * a - 3.0 * b).grad.flat();
  for (std::size_t k = 0; k < ga.size(); ++k) {
    CHECK(std::abs(gab[k] - (2.0 * ga[k] - 3.0 * gb[k])) <= 1e-12 * (1 + std::abs(gab[k])));
  }
}

TEST_CASE("stale or mismatched tapes are rejected") {
  std::mt19937_64 rng(7);
  GivensChain g(build_plan(4), oracle::random_angles(rng, 3));
  const Matrix v = oracle::random_matrix(rng, 4, 2);
  const auto tape = forward_with_tape(g, v).tape;
  CHECK_THROWS_AS(backward(g, tape, Matrix::Zero(4, 3)), ShapeError);
  const QuasiChain q(build_plan(4));
  CHECK_THROWS_AS(backward(q, tape, Matrix::Zero(4, 2)), TapeError);
  const GivensChain other(build_plan(5));
  CHECK_THROWS_AS(backward(other, tape, Matrix::Zero(5, 2)), TapeError);
  g.angles()[0] += 0.1;
  CHECK_THROWS_AS(backward(g, tape, Matrix::Zero(4, 2)), TapeError);
}

TEST_CASE("grad_check utility") {
  std::mt19937_64 rng(8);
  SUBCASE("identity chain, quadratic loss") {
    const Matrix v = oracle::random_matrix(rng, 8, 3);
    const auto rep = grad_check(GivensChain(build_plan(8)), v,
                                quadratic_loss(oracle::random_matrix(rng, 8, 3)), 1e-7);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-7);
  }
  SUBCASE("GOFT d=16") {
    const Matrix v = oracle::random_matrix(rng, 16, 4);
    const GivensChain g(build_plan(16), oracle::random_angles(rng, 15));
    const auto rep = grad_check(g, v, quadratic_loss(oracle::random_matrix(rng, 16, 4)), 1e-5);
    CHECK(rep.passed);
    CHECK(rep.params.size() == 15);
  }
  SUBCASE("qGOFT d=16") {
    const Matrix v = oracle::random_matrix(rng, 16, 4);
    QuasiChain q(build_plan(16));
    set_parameters(q, oracle::random_quasi(rng, 15));
    const auto rep = grad_check(q, v, quadratic_loss(oracle::random_matrix(rng, 16, 4)), 1e-5);
    CHECK(rep.passed);
    CHECK(rep.params.size() == 60);
  }
  SUBCASE("GOFT* d=9") {
    const Matrix v = oracle::random_matrix(rng, 9, 4);
    NormOnlyChain n(build_plan(9));
    auto p = parameters(n);
    for (auto& x : p) x += 0.3 * oracle::random_vector(rng, 1)[0];
    set_parameters(n, p);
    const auto rep = grad_check(n, v, quadratic_loss(oracle::random_matrix(rng, 9, 4)), 1e-5);
    CHECK(rep.passed);
    CHECK(rep.params.size() == 17);
  }
  SUBCASE("a wrong gradient is caught") {
    const Matrix v = oracle::random_matrix(rng, 6, 2);
    const Matrix target = oracle::random_matrix(rng, 6, 2);
    const OutputLoss bad = [target](const Matrix& out, Matrix* d_out) {
      if (d_out) *d_out = 2.0 * (out - target);  // twice the true gradient
      return 0.5 * (out - target).squaredNorm();
    };
    const GivensChain g(build_plan(6), oracle::random_angles(rng, 5));
    CHECK_FALSE(grad_check(g, v, bad, 1e-5).passed);
  }
}
