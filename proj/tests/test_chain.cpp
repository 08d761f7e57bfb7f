#include <doctest.h>

#include <cmath>
#include <random>

#include "goft/chain.hpp"
#include "goft/error.hpp"
#include "oracles.hpp"

using namespace goft;

TEST_CASE("identity chain leaves vectors unchanged") {
  std::mt19937_64 rng(1);
  for (std::size_t d : {2, 3, 8, 13}) {
    const GivensChain chain(build_plan(d));
    for (double a : chain.angles()) CHECK(a == 0.0);
    const Vector v = oracle::random_vector(rng, d);
    CHECK(apply_chain(chain, v) == v);
    const QuasiChain quasi(build_plan(d));
    CHECK(apply_chain(quasi, v) == v);
    CHECK(transpose_apply(chain, v) == v);
    CHECK(dense_matrix(chain) == Matrix::Identity(d, d));
    const Matrix w = oracle::random_matrix(rng, d, 3);
    CHECK(apply_chain_matrix(chain, w) == w);
  }
}

TEST_CASE("quarter turn in 2-D") {
  const GivensChain chain(build_plan(2), {M_PI / 2});
  const Vector out = apply_chain(chain, Vector::Unit(2, 0));
  CHECK(std::abs(out[0]) < 1e-15);
  CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("2-D dense matrix has cos/-sin/sin/cos placement") {
  const double theta = 0.37;
  const Matrix r = dense_matrix(GivensChain(build_plan(2), {theta}));
  CHECK(r(0, 0) == std::cos(theta));
  CHECK(r(0, 1) == -std::sin(theta));
  CHECK(r(1, 0) == std::sin(theta));
  CHECK(r(1, 1) == std::cos(theta));
}

TEST_CASE("staged application matches the dense oracle") {
  std::mt19937_64 rng(42);
  for (std::size_t d = 2; d <= 64; ++d) {
    CAPTURE(d);
    const auto angles = oracle::random_angles(rng, d - 1);
    const GivensChain chain(build_plan(d), angles);
    const Matrix dense = oracle::dense_givens_product(d, angles);
    const Vector v = oracle::random_vector(rng, d);
    CHECK(oracle::max_abs(apply_chain(chain, v) - dense * v) <= 1e-12);
    CHECK(oracle::max_abs(dense_matrix(chain) - dense) <= 1e-12);
    const Matrix w = oracle::random_matrix(rng, d, 3);
    CHECK(oracle::max_abs(apply_chain_matrix(chain, w) - dense * w) <= 1e-12);
    CHECK(oracle::max_abs(transpose_apply(chain, v) - dense.transpose() * v) <= 1e-12);

    const auto flat = oracle::random_quasi(rng, d - 1);
    QuasiChain quasi(build_plan(d));
    set_parameters(quasi, flat);
    const Matrix qdense = oracle::dense_quasi_product(d, flat);
    CHECK(oracle::max_abs(apply_chain(quasi, v) - qdense * v) <= 1e-12 * (1 + qdense.norm()));
    CHECK(oracle::max_abs(transpose_apply(quasi, v) - qdense.transpose() * v) <=
          1e-12 * (1 + qdense.norm()));
  }
}

TEST_CASE("givens chains are orthogonal with unit determinant") {
  std::mt19937_64 rng(7);
  for (std::size_t d : {2, 3, 5, 8, 16, 33, 64}) {
    const GivensChain chain(build_plan(d), oracle::random_angles(rng, d - 1));
    const Matrix r = dense_matrix(chain);
    CHECK((r.transpose() * r - Matrix::Identity(d, d)).norm() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) <= 1e-10);
  }
}

TEST_CASE("norm preservation, linearity and transpose round-trip") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng() % 63;
    const GivensChain chain(build_plan(d), oracle::random_angles(rng, d - 1));
    const Vector u = oracle::random_vector(rng, d);
    const Vector w = oracle::random_vector(rng, d);
    const double a = 1.7, b = -0.3;
    CHECK(std::abs(apply_chain(chain, u).norm() - u.norm()) <= 1e-12 * (1 + u.norm()));
    CHECK(oracle::max_abs(apply_chain(chain, a * u + b * w) -
                          (a * apply_chain(chain, u) + b * apply_chain(chain, w))) <= 1e-12);
    CHECK(oracle::max_abs(transpose_apply(chain, apply_chain(chain, u)) - u) <= 1e-12);
  }
}

TEST_CASE("quasi chain with rotation blocks is bit-identical to the givens chain") {
  std::mt19937_64 rng(3);
  for (std::size_t d : {2, 7, 16, 33}) {
    const auto angles = oracle::random_angles(rng, d - 1);
    std::vector<QuasiBlock> blocks;
    for (double t : angles) blocks.push_back(QuasiBlock::from_rotation(t));
    const GivensChain g(build_plan(d), angles);
    const QuasiChain q(build_plan(d), blocks);
    const Matrix w = oracle::random_matrix(rng, d, 5);
    CHECK(apply_chain_matrix(g, w) == apply_chain_matrix(q, w));
  }
}

TEST_CASE("matrix application equals column-wise vector application") {
  std::mt19937_64 rng(5);
  const std::size_t d = 11;
  const GivensChain chain(build_plan(d), oracle::random_angles(rng, d - 1));
  const Matrix w = oracle::random_matrix(rng, d, 4);
  const Matrix out = apply_chain_matrix(chain, w);
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    CHECK(out.col(c) == apply_chain(chain, Vector(w.col(c))));
  }
}

TEST_CASE("norm-only chain scales rows after rotating") {
  std::mt19937_64 rng(8);
  const std::size_t d = 6;
  NormOnlyChain chain(build_plan(d));
  const auto angles = oracle::random_angles(rng, d - 1);
  std::copy(angles.begin(), angles.end(), chain.base().angles().begin());
  for (std::size_t k = 0; k < d; ++k) chain.scale()[k] = 0.5 + 0.25 * static_cast<double>(k);
  Eigen::VectorXd s(d);
  for (std::size_t k = 0; k < d; ++k) s[static_cast<Eigen::Index>(k)] = chain.scale()[k];
  const Matrix expected = s.asDiagonal() * oracle::dense_givens_product(d, angles);
  CHECK(oracle::max_abs(dense_matrix(chain) - expected) <= 1e-12);
}

TEST_CASE("shape errors") {
  const GivensChain chain(build_plan(4));
  CHECK_THROWS_AS(apply_chain(chain, Vector::Zero(3)), ShapeError);
  CHECK_THROWS_AS(apply_chain_matrix(chain, Matrix::Zero(5, 2)), ShapeError);
  CHECK_THROWS_AS(transpose_apply(chain, Vector::Zero(2)), ShapeError);
  CHECK_THROWS_AS(GivensChain(build_plan(4), {0.0, 0.0}), ShapeError);
  CHECK_THROWS_AS(QuasiChain(build_plan(4), std::vector<QuasiBlock>(2)), ShapeError);
  GivensChain c(build_plan(4));
  const std::vector<double> wrong(2, 0.0);
  CHECK_THROWS_AS(set_parameters(c, wrong), ShapeError);
}

TEST_CASE("parameter flattening round-trips") {
  std::mt19937_64 rng(12);
  QuasiChain q(build_plan(9));
  const auto flat = oracle::random_quasi(rng, 8);
  set_parameters(q, flat);
  CHECK(parameters(q) == flat);
  CHECK(q.blocks()[1].alpha[1] == flat[5]);
  CHECK(q.blocks()[1].beta[0] == flat[6]);
}
