#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <oac/experiments.hpp>
#include <oac/model.hpp>

using namespace oac;
using Catch::Approx;

namespace {

Matrix random_matrix(Rng& rng, int r, int c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = normal(rng);
  return M;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "oac_experiments_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

double series_value(const ResultTable& t, double x, const std::string& series) {
  for (const auto& r : t.rows())
    if (r.x == x && r.series == series) return r.y;
  FAIL("row not found: " << series << " at " << x);
  return 0.0;
}

double series_std(const ResultTable& t, double x, const std::string& series) {
  for (const auto& r : t.rows())
    if (r.x == x && r.series == series) return r.ystd;
  FAIL("row not found: " << series << " at " << x);
  return 0.0;
}

}  // namespace

TEST_CASE("ball and beam discretization matches the nilpotent exponential", "[experiments]") {
  auto plant = ball_and_beam_plant(0.1);
  const auto& A = plant.A();
  const auto& B = plant.B();

  REQUIRE(plant.states() == 4);
  REQUIRE(plant.inputs() == 1);
  REQUIRE(plant.outputs() == 4);
  REQUIRE(plant.C().isIdentity(0.0));

  // c = 5 g / 7 with g = 9.81; series of exp(A_c delta) truncates at cube.
  const double c = 7.007142857142857;
  REQUIRE(A(0, 0) == 1.0);
  REQUIRE(A(1, 1) == 1.0);
  REQUIRE(A(2, 2) == 1.0);
  REQUIRE(A(3, 3) == 1.0);
  REQUIRE(A(0, 1) == Approx(0.1).epsilon(1e-14));
  REQUIRE(A(0, 2) == Approx(-c * 0.01 / 2).epsilon(1e-14));
  REQUIRE(A(0, 3) == Approx(-c * 0.001 / 6).epsilon(1e-14));
  REQUIRE(A(1, 2) == Approx(-0.7007142857142857).epsilon(1e-14));
  REQUIRE(A(1, 3) == Approx(-c * 0.01 / 2).epsilon(1e-14));
  REQUIRE(A(2, 3) == Approx(0.1).epsilon(1e-14));
  // Strictly lower part vanishes: integrator chain.
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) REQUIRE(A(i, j) == 0.0);

  REQUIRE(B(0, 0) == Approx(-c * 1e-4 / 24).epsilon(1e-14));
  REQUIRE(B(1, 0) == Approx(-c * 1e-3 / 6).epsilon(1e-14));
  REQUIRE(B(2, 0) == Approx(0.005).epsilon(1e-14));
  REQUIRE(B(3, 0) == Approx(0.1).epsilon(1e-14));

  REQUIRE(spectral_radius(A) == Approx(1.0).epsilon(1e-12));
  REQUIRE_THROWS(ball_and_beam_plant(0.0));
  REQUIRE_THROWS(ball_and_beam_plant(-0.1));
}

TEST_CASE("baseline factorization is exact under generous budgets", "[experiments]") {
  auto rng = make_rng(601);
  Matrix M = random_matrix(rng, 3, 3);
  auto code = baseline_factorization(M, PowerBudget::uniform(3, 1e6), 3);
  REQUIRE(code.P.rows() == 3);
  REQUIRE(code.P.cols() == 3);
  REQUIRE(code.D.rows() == 3);
  REQUIRE(code.D.cols() == 3);
  REQUIRE((M - code.P.transpose() * code.D).norm() <= 1e-9 * M.norm());
  for (int j = 0; j < 3; ++j) REQUIRE(code.P.col(j).squaredNorm() <= 1e6 + 1e-9);
}

TEST_CASE("baseline factorization collapses when budgets vanish", "[experiments]") {
  auto rng = make_rng(602);
  Matrix M = random_matrix(rng, 3, 3);
  auto code = baseline_factorization(M, PowerBudget::uniform(3, 1e-12), 3);
  for (int j = 0; j < 3; ++j) REQUIRE(code.P.col(j).squaredNorm() <= 1e-12 + 1e-24);
  REQUIRE((code.P.transpose() * code.D).norm() <= 1e-3);
}

TEST_CASE("baseline product error is monotone in the budget", "[experiments][property]") {
  for (unsigned inst = 0; inst < 5; ++inst) {
    auto rng = make_rng(derive_seed(603, inst));
    Matrix M = random_matrix(rng, 4, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= 10; ++s) {
      double budget = 0.1 * s;
      auto code = baseline_factorization(M, PowerBudget::uniform(4, budget), 4);
      for (int j = 0; j < 4; ++j) REQUIRE(code.P.col(j).squaredNorm() <= budget + 1e-9);
      double err = (M - code.P.transpose() * code.D).norm();
      REQUIRE(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("result table enforces one row per coordinate", "[experiments]") {
  ResultTable t;
  t.append(1.0, "a", 0.5, 0.0);
  t.append(1.0, "b", 0.25, 0.0);
  t.append(2.0, "a", 0.75, 0.1);
  REQUIRE(t.rows().size() == 3);
  REQUIRE_THROWS(t.append(1.0, "a", 0.9, 0.0));
}

TEST_CASE("result table round-trips through the text format", "[experiments]") {
  ResultTable t;
  t.config_hash = "deadbeef01234567";
  t.seed = 42;
  t.append(10.0, "unconstrained", 1.25e-3, 4.5e-5);
  t.append(10.0, "gbound-36", -0.0, 3.0e-5);
  t.append(20.0, "unconstrained", 9.876543210987654e-4, 1e-300);
  t.append(20.0, "gbound-36", 7.0, 0.0);

  auto path = temp_file("roundtrip.csv");
  emit_table(t, path.string());
  auto back = load_table(path.string());

  REQUIRE(back.config_hash == t.config_hash);
  REQUIRE(back.seed == t.seed);
  REQUIRE(back.rows().size() == t.rows().size());
  for (std::size_t i = 0; i < t.rows().size(); ++i) {
    REQUIRE(back.rows()[i].x == t.rows()[i].x);
    REQUIRE(back.rows()[i].series == t.rows()[i].series);
    REQUIRE(back.rows()[i].y == t.rows()[i].y);
    REQUIRE(back.rows()[i].ystd == t.rows()[i].ystd);
  }

  ResultTable empty;
  auto epath = temp_file("empty.csv");
  std::filesystem::remove(epath);
  REQUIRE_THROWS(emit_table(empty, epath.string()));
  REQUIRE_FALSE(std::filesystem::exists(epath));
}

TEST_CASE("plot data splits series into two-column files", "[experiments]") {
  ResultTable t;
  t.append(1.0, "alpha", 0.5, 0.01);
  t.append(2.0, "alpha", 0.25, 0.01);
  t.append(1.0, "beta/x", 4.0, 0.0);

  auto dir = temp_file("plotdata");
  std::filesystem::remove_all(dir);
  emit_plotdata(t, dir.string());

  std::ifstream fa(dir / "alpha.dat");
  REQUIRE(fa.good());
  double x, y;
  REQUIRE((fa >> x >> y));
  REQUIRE(x == 1.0);
  REQUIRE(y == 0.5);
  REQUIRE((fa >> x >> y));
  REQUIRE(x == 2.0);
  REQUIRE(y == 0.25);

  // Series names are sanitized into safe file names.
  std::ifstream fb(dir / "beta-x.dat");
  REQUIRE(fb.good());
  REQUIRE((fb >> x >> y));
  REQUIRE(x == 1.0);
  REQUIRE(y == 4.0);
}

TEST_CASE("experiment config round-trips through text and hashes stably", "[experiments]") {
  ExperimentConfig cfg = stability_sweep_defaults();
  cfg.seed = 77;
  cfg.out_dir = "results";

  auto path = temp_file("config.txt");
  save_config(cfg, path.string());
  auto back = load_config(path.string());

  REQUIRE(back.id == cfg.id);
  REQUIRE(back.states == cfg.states);
  REQUIRE(back.inputs == cfg.inputs);
  REQUIRE(back.outputs == cfg.outputs);
  REQUIRE(back.slots == cfg.slots);
  REQUIRE(back.trials == cfg.trials);
  REQUIRE(back.horizon == cfg.horizon);
  REQUIRE(back.sigma2 == cfg.sigma2);
  REQUIRE(back.seed == cfg.seed);
  REQUIRE(back.tau0 == cfg.tau0);
  REQUIRE(back.alpha == cfg.alpha);
  REQUIRE(back.beta == cfg.beta);
  REQUIRE(back.power_grid == cfg.power_grid);
  REQUIRE(back.gain_bounds.size() == cfg.gain_bounds.size());
  for (std::size_t i = 0; i < cfg.gain_bounds.size(); ++i) {
    if (std::isinf(cfg.gain_bounds[i]))
      REQUIRE(std::isinf(back.gain_bounds[i]));
    else
      REQUIRE(back.gain_bounds[i] == cfg.gain_bounds[i]);
  }
  REQUIRE(back.out_dir == cfg.out_dir);
  REQUIRE(config_hash(back) == config_hash(cfg));

  ExperimentConfig other = cfg;
  other.seed = 78;
  REQUIRE(config_hash(other) != config_hash(cfg));
}

TEST_CASE("fig3 defaults follow the study setup", "[experiments]") {
  auto cfg = mse_vs_snr_defaults();
  REQUIRE(cfg.states == 4);
  REQUIRE(cfg.inputs == 1);
  REQUIRE(cfg.outputs == 4);
  REQUIRE(cfg.slots == 4);
  REQUIRE(cfg.sigma2 == Approx(0.01));
  REQUIRE(cfg.trials == 100);
  REQUIRE(cfg.horizon == 50);
  REQUIRE(cfg.power_grid.size() == 10);
  REQUIRE(cfg.power_grid.front() == Approx(0.1));
  REQUIRE(cfg.power_grid.back() == Approx(1.0));
  REQUIRE(cfg.gain_bounds.size() == 3);
  REQUIRE(std::isinf(cfg.gain_bounds[0]));
  REQUIRE(cfg.gain_bounds[1] == Approx(50.0));
  REQUIRE(cfg.gain_bounds[2] == Approx(36.0));

  auto f2 = stability_sweep_defaults();
  REQUIRE(f2.states == 6);
  REQUIRE(f2.inputs == 4);
  REQUIRE(f2.outputs == 4);
  REQUIRE(f2.slots == 4);
  REQUIRE(f2.trials == 100);
  REQUIRE(f2.power_grid.size() == 10);
}

TEST_CASE("reduced stability sweep is deterministic and ordered", "[experiments][slow]") {
  ExperimentConfig cfg = stability_sweep_defaults();
  cfg.states = 3;
  cfg.inputs = 2;
  cfg.outputs = 2;
  cfg.slots = 2;
  cfg.trials = 2;
  cfg.power_grid = {0.6, 1.0};
  cfg.seed = 21;

  auto t1 = stability_sweep(cfg);
  auto t2 = stability_sweep(cfg);
  REQUIRE(t1.rows().size() == t2.rows().size());
  for (std::size_t i = 0; i < t1.rows().size(); ++i) {
    REQUIRE(t1.rows()[i].x == t2.rows()[i].x);
    REQUIRE(t1.rows()[i].series == t2.rows()[i].series);
    REQUIRE(t1.rows()[i].y == t2.rows()[i].y);
    REQUIRE(t1.rows()[i].ystd == t2.rows()[i].ystd);
  }

  for (double p : cfg.power_grid) {
    double cons = series_value(t1, p, "constrained-admm");
    double base = series_value(t1, p, "baseline");
    REQUIRE(cons == 0.0);
    REQUIRE(base >= cons);
  }
}

TEST_CASE("reduced mse sweep is deterministic, finite, and ordered", "[experiments][slow]") {
  ExperimentConfig cfg = mse_vs_snr_defaults();
  cfg.trials = 15;
  cfg.power_grid = {0.1, 1.0};
  cfg.gain_bounds = {std::numeric_limits<double>::infinity(), 36.0};
  cfg.seed = 33;

  auto t1 = mse_vs_snr(cfg);
  auto t2 = mse_vs_snr(cfg);
  REQUIRE(t1.rows().size() == t2.rows().size());
  for (std::size_t i = 0; i < t1.rows().size(); ++i) {
    REQUIRE(t1.rows()[i].y == t2.rows()[i].y);
    REQUIRE(t1.rows()[i].series == t2.rows()[i].series);
  }

  // P = 0.1 and 1.0 against sigma2 = 0.01: SNR endpoints 10 and 20 dB.
  for (const std::string& s : {std::string("unconstrained"), std::string("gbound-36")}) {
    double lo = series_value(t1, 10.0, s);
    double hi = series_value(t1, 20.0, s);
    REQUIRE(std::isfinite(lo));
    REQUIRE(std::isfinite(hi));
    REQUIRE(lo > 0.0);
    REQUIRE(hi > 0.0);
    // More transmit power, less decoder noise amplification.
    REQUIRE(hi <= lo + series_std(t1, 10.0, s));
    // Decoder energies ride along for the amplification ordering.
    REQUIRE(series_value(t1, 10.0, s + "/dnorm") > 0.0);
  }
  for (double snr : {10.0, 20.0}) {
    double unc = series_value(t1, snr, "unconstrained");
    double bnd = series_value(t1, snr, "gbound-36");
    REQUIRE(bnd <= unc + series_std(t1, snr, "unconstrained"));
  }
}
