#pragma once
// random.hpp -- seeding and sampling helpers shared across the toolkit.
//
// Every stochastic routine takes an explicit 64-bit seed and consumes draws in
// a documented order, so identical seeds reproduce identical results on a
// given platform.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace oac {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// splitmix64 finalizer; decorrelates structured seed inputs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and up to two indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(base ^ mix64(a + 1) ^ mix64((b + 1) * 0x632be59bd9b4e019ULL));
}

/// Rayleigh(scale) draw via inverse transform; mean is scale*sqrt(pi/2).
inline double sample_rayleigh(Rng& rng, double scale = 1.0) {
  if (scale <= 0.0) throw std::invalid_argument("sample_rayleigh: scale must be positive");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // 1 - u lies in (0, 1], keeping the logarithm finite.
  double u = unif(rng);
  return scale * std::sqrt(-2.0 * std::log1p(-u));
}

/// Standard normal vector of length n.
inline Eigen::VectorXd sample_normal_vector(Rng& rng, int n) {
  if (n <= 0) throw std::invalid_argument("sample_normal_vector: n must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Uniform draw from the unit sphere in R^n.
inline Eigen::VectorXd sample_unit_vector(Rng& rng, int n) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::VectorXd v = sample_normal_vector(rng, n);
    double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
  throw std::runtime_error("sample_unit_vector: degenerate draws");
}

/// Uniform draw from the closed ball of given radius in R^n.
inline Eigen::VectorXd sample_ball_vector(Rng& rng, int n, double radius) {
  if (radius < 0.0) throw std::invalid_argument("sample_ball_vector: radius must be nonnegative");
  Eigen::VectorXd dir = sample_unit_vector(rng, n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
  return r * dir;
}

}  // namespace oac
