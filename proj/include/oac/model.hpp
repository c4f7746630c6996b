#pragma once
// model.hpp -- plants, network topologies, gain constraint sets, channel
// realizations, and power budgets: the value types every other layer of the
// toolkit consumes, plus the elementary spectral operations on them.
//
// All types are immutable after construction and validate their invariants in
// the constructor, so downstream numerics never re-check shapes.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "oac/random.hpp"

namespace oac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Spectral-radius slack used when classifying a closed loop as unstable:
/// rho > 1 + kStabilityTol counts as unstable.
inline constexpr double kStabilityTol = 1e-9;

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PlantModel
// ---------------------------------------------------------------------------

/// Discrete-time LTI plant x[k+1] = A x[k] + B u[k], y[k] = C x[k],
/// sampled with period delta (seconds).
class PlantModel {
 public:
  PlantModel(Matrix A, Matrix B, Matrix C, double delta)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), delta_(delta) {
    detail::require(A_.rows() >= 1 && A_.rows() == A_.cols(), "PlantModel: A must be square and nonempty");
    detail::require(B_.rows() == A_.rows() && B_.cols() >= 1, "PlantModel: B must be n x m with m >= 1");
    detail::require(C_.cols() == A_.rows() && C_.rows() >= 1, "PlantModel: C must be p x n with p >= 1");
    detail::require(delta_ > 0.0, "PlantModel: sampling period must be positive");
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  double delta() const { return delta_; }

  int states() const { return static_cast<int>(A_.rows()); }
  int inputs() const { return static_cast<int>(B_.cols()); }
  int outputs() const { return static_cast<int>(C_.rows()); }

 private:
  Matrix A_, B_, C_;
  double delta_;
};

// ---------------------------------------------------------------------------
// NetworkTopology
// ---------------------------------------------------------------------------

/// Bipartite sensor-to-actuator connectivity. Edge (i, j) means actuator i
/// receives sensor j; the support matrix is m x p with a 1 per edge.
class NetworkTopology {
 public:
  NetworkTopology(int actuators, int sensors, const std::vector<std::pair<int, int>>& edges)
      : m_(actuators), p_(sensors), support_(Matrix::Zero(actuators, sensors)) {
    detail::require(m_ >= 1 && p_ >= 1, "NetworkTopology: must have at least one actuator and sensor");
    for (const auto& [i, j] : edges) {
      detail::require(i >= 0 && i < m_ && j >= 0 && j < p_, "NetworkTopology: edge index out of range");
      support_(i, j) = 1.0;
    }
    rebuild_edge_list();
  }

  /// Complete bipartite topology: every actuator sees every sensor.
  static NetworkTopology full(int actuators, int sensors) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(actuators) * static_cast<std::size_t>(sensors));
    for (int i = 0; i < actuators; ++i)
      for (int j = 0; j < sensors; ++j) edges.emplace_back(i, j);
    return NetworkTopology(actuators, sensors, edges);
  }

  /// Builds a topology whose edges are the nonzero entries of a 0/1 matrix.
  static NetworkTopology from_support(const Matrix& support) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < support.rows(); ++i)
      for (int j = 0; j < support.cols(); ++j) {
        double v = support(i, j);
        detail::require(v == 0.0 || v == 1.0, "NetworkTopology: support entries must be 0 or 1");
        if (v == 1.0) edges.emplace_back(i, j);
      }
    return NetworkTopology(static_cast<int>(support.rows()), static_cast<int>(support.cols()), edges);
  }

  int actuators() const { return m_; }
  int sensors() const { return p_; }
  /// Edges sorted lexicographically (row-major); the canonical draw order.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const Matrix& support() const { return support_; }
  bool connected(int i, int j) const {
    detail::require(i >= 0 && i < m_ && j >= 0 && j < p_, "NetworkTopology: index out of range");
    return support_(i, j) == 1.0;
  }

 private:
  void rebuild_edge_list() {
    edges_.clear();
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < p_; ++j)
        if (support_(i, j) == 1.0) edges_.emplace_back(i, j);
  }

  int m_, p_;
  Matrix support_;
  std::vector<std::pair<int, int>> edges_;
};

// ---------------------------------------------------------------------------
// GainConstraintSet
// ---------------------------------------------------------------------------

/// Admissible static gains: entries outside the support are exactly zero and,
/// when a Frobenius bound is present, ||G||_F <= bound.
class GainConstraintSet {
 public:
  GainConstraintSet(Matrix support, std::optional<double> frobenius_bound = std::nullopt)
      : support_(std::move(support)), frobenius_bound_(frobenius_bound) {
    detail::require(support_.rows() >= 1 && support_.cols() >= 1, "GainConstraintSet: empty support");
    for (int i = 0; i < support_.rows(); ++i)
      for (int j = 0; j < support_.cols(); ++j)
        detail::require(support_(i, j) == 0.0 || support_(i, j) == 1.0,
                        "GainConstraintSet: support entries must be 0 or 1");
    if (frobenius_bound_) detail::require(*frobenius_bound_ > 0.0, "GainConstraintSet: bound must be positive");
  }

  static GainConstraintSet from_topology(const NetworkTopology& topo,
                                         std::optional<double> frobenius_bound = std::nullopt) {
    return GainConstraintSet(topo.support(), frobenius_bound);
  }

  const Matrix& support() const { return support_; }
  const std::optional<double>& frobenius_bound() const { return frobenius_bound_; }
  int actuators() const { return static_cast<int>(support_.rows()); }
  int sensors() const { return static_cast<int>(support_.cols()); }
  int support_size() const { return static_cast<int>(support_.sum()); }

  /// True when G has exact zeros off support and respects the norm bound
  /// (with absolute slack tol on the bound).
  bool admits(const Matrix& G, double tol = 1e-9) const {
    if (G.rows() != support_.rows() || G.cols() != support_.cols()) return false;
    for (int i = 0; i < G.rows(); ++i)
      for (int j = 0; j < G.cols(); ++j)
        if (support_(i, j) == 0.0 && G(i, j) != 0.0) return false;
    if (frobenius_bound_ && G.norm() > *frobenius_bound_ + tol) return false;
    return true;
  }

 private:
  Matrix support_;
  std::optional<double> frobenius_bound_;
};

// ---------------------------------------------------------------------------
// ChannelRealization
// ---------------------------------------------------------------------------

/// One draw of the fading coefficients h_ij on the topology support, plus the
/// receiver noise variance sigma^2. Off-support entries are absent rather
/// than zero: reading one throws, so accidental off-support arithmetic is an
/// error instead of a silent 0 or a division blowup.
class ChannelRealization {
 public:
  ChannelRealization(const NetworkTopology& topo, Matrix values, double sigma2)
      : support_(topo.support()), values_(std::move(values)), sigma2_(sigma2) {
    detail::require(values_.rows() == support_.rows() && values_.cols() == support_.cols(),
                    "ChannelRealization: value shape must match the topology");
    detail::require(sigma2_ >= 0.0, "ChannelRealization: sigma2 must be nonnegative");
    for (int i = 0; i < values_.rows(); ++i)
      for (int j = 0; j < values_.cols(); ++j)
        if (support_(i, j) == 0.0) values_(i, j) = 0.0;  // normalize storage off support
  }

  int actuators() const { return static_cast<int>(support_.rows()); }
  int sensors() const { return static_cast<int>(support_.cols()); }
  double sigma2() const { return sigma2_; }
  const Matrix& support() const { return support_; }

  bool has(int i, int j) const {
    detail::require(i >= 0 && i < actuators() && j >= 0 && j < sensors(),
                    "ChannelRealization: index out of range");
    return support_(i, j) == 1.0;
  }

  /// Fading coefficient on a support entry; throws off support.
  double coeff(int i, int j) const {
    if (!has(i, j)) throw std::invalid_argument("ChannelRealization: entry is off the topology support");
    return values_(i, j);
  }

 private:
  Matrix support_;
  Matrix values_;
  double sigma2_;
};

// ---------------------------------------------------------------------------
// PowerBudget
// ---------------------------------------------------------------------------

/// Per-sensor transmit power caps P_j > 0.
class PowerBudget {
 public:
  explicit PowerBudget(Vector budgets) : budgets_(std::move(budgets)) {
    detail::require(budgets_.size() >= 1, "PowerBudget: empty budget vector");
    for (int j = 0; j < budgets_.size(); ++j)
      detail::require(budgets_(j) > 0.0, "PowerBudget: budgets must be positive");
  }

  static PowerBudget uniform(int sensors, double value) {
    detail::require(sensors >= 1, "PowerBudget: sensors must be positive");
    detail::require(value > 0.0, "PowerBudget: value must be positive");
    return PowerBudget(Vector::Constant(sensors, value));
  }

  const Vector& values() const { return budgets_; }
  double operator()(int j) const {
    detail::require(j >= 0 && j < budgets_.size(), "PowerBudget: index out of range");
    return budgets_(j);
  }
  int sensors() const { return static_cast<int>(budgets_.size()); }

 private:
  Vector budgets_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Closed-loop state matrix A + B G C for static output feedback u = G y.
inline Matrix closed_loop_matrix(const PlantModel& plant, const Matrix& G) {
  detail::require(G.rows() == plant.inputs() && G.cols() == plant.outputs(),
                  "closed_loop_matrix: G must be m x p");
  return plant.A() + plant.B() * G * plant.C();
}

/// Largest eigenvalue magnitude of a square (generally nonsymmetric) matrix.
inline double spectral_radius(const Matrix& M) {
  detail::require(M.rows() == M.cols() && M.rows() >= 1, "spectral_radius: matrix must be square");
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigensolver did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Random dense plant with N(0,1) entries and A rescaled so its spectral
/// radius is uniform in [0.8, 1.5]; a mix of stable and unstable instances.
/// Draw order: A (column-major), B, C, then the target radius. The sampling
/// period is fixed at 1 since these plants are abstract discrete systems.
inline PlantModel random_plant(int n, int m, int p, std::uint64_t seed) {
  detail::require(n >= 1 && m >= 1 && p >= 1, "random_plant: dimensions must be positive");
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](int r, int c) {
    Matrix M(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) M(i, j) = normal(rng);
    return M;
  };
  Matrix A = fill(n, n);
  Matrix B = fill(n, m);
  Matrix C = fill(p, n);
  std::uniform_real_distribution<double> unif(0.8, 1.5);
  double target = unif(rng);
  double rho = spectral_radius(A);
  while (rho < 1e-12) {  // probability ~0, but keep the rescale well defined
    A = fill(n, n);
    rho = spectral_radius(A);
  }
  A *= target / rho;
  return PlantModel(std::move(A), std::move(B), std::move(C), 1.0);
}

/// Independent Rayleigh(1) fading coefficients on the topology support.
/// Draws are consumed row-major over support entries. sigma2 is the receiver
/// noise variance carried alongside the fades.
inline ChannelRealization sample_channel(const NetworkTopology& topo, std::uint64_t seed,
                                         double sigma2 = 0.0) {
  auto rng = make_rng(seed);
  Matrix values = Matrix::Zero(topo.actuators(), topo.sensors());
  for (int i = 0; i < topo.actuators(); ++i)
    for (int j = 0; j < topo.sensors(); ++j)
      if (topo.connected(i, j)) values(i, j) = sample_rayleigh(rng);
  return ChannelRealization(topo, std::move(values), sigma2);
}

}  // namespace oac
