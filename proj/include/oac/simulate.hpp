// Closed-loop Monte-Carlo engine for over-the-air controlled plants.
//
// After synthesis and codebook factorization the plant evolves as
//
//   x[k+1] = A_hat x[k] + B n_hat[k],
//
// where the only disturbance left is the receiver noise folded through the
// decoder codebook: actuator i sees n_hat_i = sum_t d_it n_it with i.i.d.
// N(0, sigma2) slot noise, hence variance sigma2 * ||d_i||^2. This header
// simulates that recursion, classifies runs as stable or diverged, and
// aggregates state mean-square error across seeded ensembles.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <oac/model.hpp>

namespace oac {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Autonomous noise-driven loop: the gain is already folded into A_hat.
/// D holds decoder vectors column-per-actuator, so column count must match B.
struct ClosedLoopSystem {
  Matrix A_hat;
  Matrix B;
  Matrix D;
  double sigma2 = 0.0;

  void validate() const {
    detail::require(A_hat.rows() == A_hat.cols() && A_hat.rows() >= 1,
                    "ClosedLoopSystem: A_hat must be square");
    detail::require(B.rows() == A_hat.rows(), "ClosedLoopSystem: B row count must match A_hat");
    detail::require(D.cols() == B.cols(), "ClosedLoopSystem: one decoder column per actuator");
    detail::require(D.rows() >= 1, "ClosedLoopSystem: at least one slot");
    detail::require(std::isfinite(sigma2) && sigma2 >= 0.0,
                    "ClosedLoopSystem: sigma2 must be finite and nonnegative");
    detail::require(A_hat.allFinite() && B.allFinite() && D.allFinite(),
                    "ClosedLoopSystem: matrices must be finite");
  }
};

/// One realized run. states holds x[0..K]; inputs holds the effective noise
/// vectors that produced each transition, so states.size() == inputs.size()+1
/// always, and both are cut short when the divergence guard trips.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::uint64_t seed = 0;
  bool diverged = false;
};

/// Ensemble summary. Mean and deviation cover the stable runs only; diverged
/// runs surface through unstable_fraction and an infinite per-run entry.
struct MonteCarloReport {
  int runs = 0;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double unstable_fraction = 0.0;
  std::vector<double> per_run_mse;
};

namespace detail {

/// Order-stabilized sum: halve-and-add so ensemble aggregation does not
/// depend on run order.
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo == 0) return 0.0;
  if (hi - lo == 1) return v[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v, 0, v.size()); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Single transitions
// ---------------------------------------------------------------------------

/// Effective per-actuator noise: entry i = sum_t d_it * n_it with n_it drawn
/// i.i.d. N(0, sigma2), column by column. Noise-free calls return zero
/// without consuming randomness, so deterministic runs stay seed-free.
inline Vector effective_noise_vector(const Matrix& D, double sigma2, Rng& rng) {
  detail::require(std::isfinite(sigma2) && sigma2 >= 0.0,
                  "effective_noise_vector: sigma2 must be finite and nonnegative");
  Vector out = Vector::Zero(D.cols());
  if (sigma2 == 0.0) return out;
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
  for (int i = 0; i < D.cols(); ++i) {
    double acc = 0.0;
    for (int t = 0; t < D.rows(); ++t) acc += D(t, i) * normal(rng);
    out(i) = acc;
  }
  return out;
}

/// One transition of the loop with a fresh noise draw.
inline Vector step(const Vector& x, const ClosedLoopSystem& sys, Rng& rng) {
  sys.validate();
  detail::require(x.size() == sys.A_hat.rows(), "step: state dimension mismatch");
  return sys.A_hat * x + sys.B * effective_noise_vector(sys.D, sys.sigma2, rng);
}

// ---------------------------------------------------------------------------
// Trajectories and ensembles
// ---------------------------------------------------------------------------

/// Runs the loop for horizon steps from x0. The error is the time- and
/// dimension-normalized energy (1/(K n)) sum_{k>=1} ||x[k]||^2 over realized
/// states. A state norm beyond 1e12 stops the run: the trajectory is cut at
/// the last finite state, the flag is set, and the error is infinite.
inline std::pair<Trajectory, double> run_trajectory(const ClosedLoopSystem& sys, const Vector& x0,
                                                    int horizon, std::uint64_t seed) {
  sys.validate();
  detail::require(horizon >= 1, "run_trajectory: horizon must be at least 1");
  detail::require(x0.size() == sys.A_hat.rows(), "run_trajectory: x0 dimension mismatch");

  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.inputs.reserve(static_cast<std::size_t>(horizon));
  traj.states.push_back(x0);

  auto rng = make_rng(seed);
  double energy = 0.0;
  Vector x = x0;
  for (int k = 1; k <= horizon; ++k) {
    Vector nhat = effective_noise_vector(sys.D, sys.sigma2, rng);
    Vector next = sys.A_hat * x + sys.B * nhat;
    if (!next.allFinite() || next.norm() > 1e12) {
      traj.diverged = true;
      return {std::move(traj), std::numeric_limits<double>::infinity()};
    }
    traj.inputs.push_back(std::move(nhat));
    traj.states.push_back(next);
    energy += next.squaredNorm();
    x = std::move(next);
  }
  double mse = energy / (static_cast<double>(horizon) * static_cast<double>(x0.size()));
  return {std::move(traj), mse};
}

/// Seeded ensemble of independent runs (seeds base_seed + r). Stable runs
/// feed the mean and sample deviation; diverged runs only move the unstable
/// fraction.
inline MonteCarloReport monte_carlo(const ClosedLoopSystem& sys, const Vector& x0, int horizon,
                                    int runs, std::uint64_t base_seed) {
  detail::require(runs >= 1, "monte_carlo: runs must be at least 1");
  MonteCarloReport rep;
  rep.runs = runs;
  rep.per_run_mse.reserve(runs);

  std::vector<double> stable;
  stable.reserve(runs);
  int diverged = 0;
  for (int r = 0; r < runs; ++r) {
    auto [traj, mse] = run_trajectory(sys, x0, horizon, base_seed + static_cast<std::uint64_t>(r));
    rep.per_run_mse.push_back(mse);
    if (traj.diverged)
      ++diverged;
    else
      stable.push_back(mse);
  }
  rep.unstable_fraction = static_cast<double>(diverged) / runs;
  if (!stable.empty()) {
    rep.mse_mean = detail::pairwise_sum(stable) / static_cast<double>(stable.size());
    if (stable.size() >= 2) {
      std::vector<double> sq;
      sq.reserve(stable.size());
      for (double m : stable) sq.push_back((m - rep.mse_mean) * (m - rep.mse_mean));
      rep.mse_std = std::sqrt(detail::pairwise_sum(sq) / static_cast<double>(stable.size() - 1));
    }
  }
  return rep;
}

/// Signal-to-noise ratio of a power budget against slot noise, in decibels.
inline double snr_db(double power, double sigma2) {
  detail::require(power > 0.0 && sigma2 > 0.0, "snr_db: power and sigma2 must be positive");
  return 10.0 * std::log10(power / sigma2);
}

}  // namespace oac
