#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "oac/model.hpp"

using namespace oac;

namespace {

// Naive triple-loop product-sum; independent of Eigen's matrix product.
Matrix naive_closed_loop(const Matrix& A, const Matrix& B, const Matrix& G, const Matrix& C) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int p = static_cast<int>(C.rows());
  Matrix GC = Matrix::Zero(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < p; ++k) GC(i, j) += G(i, k) * C(k, j);
  Matrix out = A;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < m; ++k) out(i, j) += B(i, k) * GC(k, j);
  return out;
}

Matrix random_matrix(Rng& rng, int r, int c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = normal(rng);
  return M;
}

}  // namespace

TEST_CASE("PlantModel validates shapes", "[model]") {
  Matrix A = Matrix::Identity(3, 3);
  Matrix B = Matrix::Ones(3, 2);
  Matrix C = Matrix::Ones(1, 3);
  REQUIRE_NOTHROW(PlantModel(A, B, C, 0.1));
  REQUIRE_THROWS_AS(PlantModel(Matrix::Ones(3, 2), B, C, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(PlantModel(A, Matrix::Ones(2, 2), C, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(PlantModel(A, B, Matrix::Ones(1, 4), 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(PlantModel(A, B, C, 0.0), std::invalid_argument);
  PlantModel plant(A, B, C, 0.1);
  REQUIRE(plant.states() == 3);
  REQUIRE(plant.inputs() == 2);
  REQUIRE(plant.outputs() == 1);
}

TEST_CASE("closed_loop_matrix zero gain returns A", "[model]") {
  auto plant = random_plant(4, 2, 3, 7);
  Matrix G = Matrix::Zero(2, 3);
  REQUIRE(closed_loop_matrix(plant, G).isApprox(plant.A(), 0.0));
}

TEST_CASE("closed_loop_matrix scalar arithmetic", "[model]") {
  PlantModel plant(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                   Matrix::Constant(1, 1, 1.0), 1.0);
  Matrix G = Matrix::Constant(1, 1, -0.3);
  REQUIRE(closed_loop_matrix(plant, G)(0, 0) == Catch::Approx(0.2).margin(1e-15));
}

TEST_CASE("closed_loop_matrix matches naive triple-loop oracle", "[model]") {
  auto rng = make_rng(11);
  Matrix A = random_matrix(rng, 6, 6);
  Matrix B = random_matrix(rng, 6, 4);
  Matrix C = random_matrix(rng, 4, 6);
  Matrix G = random_matrix(rng, 4, 4);
  PlantModel plant(A, B, C, 1.0);
  Matrix expected = naive_closed_loop(A, B, G, C);
  REQUIRE((closed_loop_matrix(plant, G) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("closed_loop_matrix rejects dimension mismatch", "[model]") {
  auto plant = random_plant(4, 2, 3, 7);
  REQUIRE_THROWS_AS(closed_loop_matrix(plant, Matrix::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("spectral_radius on simple spectra", "[model]") {
  REQUIRE(spectral_radius(Matrix::Identity(3, 3)) == Catch::Approx(1.0));
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 0.5;
  D(1, 1) = 0.2;
  REQUIRE(spectral_radius(D) == Catch::Approx(0.5));
}

TEST_CASE("spectral_radius companion quadratic", "[model]") {
  // Characteristic polynomial lambda^2 - 1.7 lambda + 0.72 has roots 0.9, 0.8.
  Matrix M(2, 2);
  M << 0.0, 1.0, -0.72, 1.7;
  REQUIRE(spectral_radius(M) == Catch::Approx(0.9).epsilon(1e-10));
}

TEST_CASE("spectral_radius invariant under similarity transform", "[model][property]") {
  auto rng = make_rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix M = random_matrix(rng, 5, 5);
    Matrix S = Matrix::Identity(5, 5) + 0.1 * random_matrix(rng, 5, 5);
    Matrix T = S * M * S.inverse();
    REQUIRE(spectral_radius(T) == Catch::Approx(spectral_radius(M)).margin(1e-8));
  }
}

TEST_CASE("random_plant determinism and shapes", "[model]") {
  auto p1 = random_plant(6, 4, 4, 99);
  auto p2 = random_plant(6, 4, 4, 99);
  REQUIRE(p1.A().isApprox(p2.A(), 0.0));
  REQUIRE(p1.B().isApprox(p2.B(), 0.0));
  REQUIRE(p1.C().isApprox(p2.C(), 0.0));
  REQUIRE(p1.A().rows() == 6);
  REQUIRE(p1.B().rows() == 6);
  REQUIRE(p1.B().cols() == 4);
  REQUIRE(p1.C().rows() == 4);
  REQUIRE(p1.C().cols() == 6);
  auto p3 = random_plant(6, 4, 4, 100);
  REQUIRE_FALSE(p1.A().isApprox(p3.A()));
}

TEST_CASE("random_plant spectral radius lands in [0.8, 1.5]", "[model][property]") {
  bool saw_stable = false, saw_unstable = false;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto plant = random_plant(6, 4, 4, seed);
    double rho = spectral_radius(plant.A());
    REQUIRE(rho >= 0.8 - 1e-9);
    REQUIRE(rho <= 1.5 + 1e-9);
    if (rho < 1.0) saw_stable = true;
    if (rho > 1.0) saw_unstable = true;
  }
  REQUIRE(saw_stable);
  REQUIRE(saw_unstable);
}

TEST_CASE("sample_channel Rayleigh statistics", "[model][property]") {
  auto topo = NetworkTopology::full(1, 1);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += sample_channel(topo, 1000 + i).coeff(0, 0);
  double mean = sum / draws;
  double expected = std::sqrt(std::numbers::pi / 2.0);
  REQUIRE(std::abs(mean - expected) / expected < 0.01);
}

TEST_CASE("sample_channel support and determinism", "[model]") {
  auto topo = NetworkTopology::full(4, 4);
  auto chan = sample_channel(topo, 5, 0.01);
  auto chan2 = sample_channel(topo, 5, 0.01);
  int defined = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      REQUIRE(chan.has(i, j));
      REQUIRE(chan.coeff(i, j) > 0.0);
      REQUIRE(chan.coeff(i, j) == chan2.coeff(i, j));
      ++defined;
    }
  REQUIRE(defined == 16);
  REQUIRE(chan.sigma2() == 0.01);
}

TEST_CASE("off-support channel entries are absent, not zero", "[model]") {
  NetworkTopology topo(2, 2, {{0, 0}, {1, 1}});
  auto chan = sample_channel(topo, 3);
  REQUIRE(chan.has(0, 0));
  REQUIRE_FALSE(chan.has(0, 1));
  REQUIRE_THROWS_AS(chan.coeff(0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(chan.coeff(2, 0), std::invalid_argument);
}

TEST_CASE("NetworkTopology edges and support agree", "[model]") {
  NetworkTopology topo(3, 2, {{0, 1}, {2, 0}, {0, 1}});
  REQUIRE(topo.edges().size() == 2);  // duplicate edge collapses
  REQUIRE(topo.connected(0, 1));
  REQUIRE(topo.connected(2, 0));
  REQUIRE_FALSE(topo.connected(1, 1));
  REQUIRE(topo.support().sum() == 2.0);
  REQUIRE_THROWS_AS(NetworkTopology(2, 2, {{2, 0}}), std::invalid_argument);
  auto full = NetworkTopology::full(2, 3);
  REQUIRE(full.edges().size() == 6);
  auto round = NetworkTopology::from_support(topo.support());
  REQUIRE(round.edges() == topo.edges());
}

TEST_CASE("GainConstraintSet admits enforces support and bound", "[model]") {
  Matrix support(2, 2);
  support << 1, 0, 0, 1;
  GainConstraintSet cs(support, 2.0);
  Matrix G = Matrix::Zero(2, 2);
  G(0, 0) = 1.0;
  G(1, 1) = -1.0;
  REQUIRE(cs.admits(G));
  G(0, 1) = 1e-14;  // off-support entry must be exactly zero
  REQUIRE_FALSE(cs.admits(G));
  G(0, 1) = 0.0;
  G(0, 0) = 2.5;  // Frobenius norm exceeds the bound
  REQUIRE_FALSE(cs.admits(G));
  REQUIRE(cs.support_size() == 2);
  REQUIRE_THROWS_AS(GainConstraintSet(support, -1.0), std::invalid_argument);
}

TEST_CASE("PowerBudget validates positivity", "[model]") {
  auto budget = PowerBudget::uniform(4, 0.5);
  REQUIRE(budget.sensors() == 4);
  REQUIRE(budget(3) == 0.5);
  REQUIRE_THROWS_AS(budget(4), std::invalid_argument);
  Vector bad(2);
  bad << 1.0, 0.0;
  REQUIRE_THROWS_AS(PowerBudget(bad), std::invalid_argument);
}
