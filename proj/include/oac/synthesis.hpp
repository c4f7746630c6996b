#pragma once
// synthesis.hpp -- structured energy-to-energy gain synthesis.
//
// For a plant x+ = Ax + Bu, y = Cx under static output feedback u = Gy with
// topology-masked G, the energy-to-energy disturbance gain is below gamma iff
// a symmetric X > 0 renders the block LMI
//
//     [ X      0        A+BGC   B ]
//     [ 0      eta*I    I       0 ]      eta = gamma^2
//     [ (.)'   I        X^-1    0 ]
//     [ B'     0        0       I ]
//
// positive definite. The X^-1 block makes it nonconvex; replacing it with the
// affine linearization L(X^-1, X_k) = X_k^-1 - X_k^-1 (X - X_k) X_k^-1 gives a
// convex inner approximation (L majorizes nothing: X^-1 >= L for SPD X_k, X,
// by operator convexity), and iterating argmin over (eta, X, G) with
// re-linearization drives gamma down to a stationary point. The feasibility
// phase runs the same machinery on a slack objective with gamma frozen large.

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "oac/model.hpp"
#include "oac/sdp.hpp"

namespace oac {

enum class SynthesisStatus { Converged, MaxIterations, InfeasibleStructure };

inline const char* to_string(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::Converged: return "converged";
    case SynthesisStatus::MaxIterations: return "max-iterations";
    case SynthesisStatus::InfeasibleStructure: return "infeasible-structure";
  }
  return "unknown";
}

struct SynthesisOptions {
  double gamma_tol = 1e-5;        // stop when |gamma_k - gamma_{k+1}| drops below
  int max_outer_iters = 200;      // re-linearization steps
  int feasibility_max_iters = 100;
  double margin = 1e-6;           // strict-inequality bridge: S >= margin*I
  double solver_tol = 2e-8;       // objective gap target handed to the sdp layer
  int solver_max_newton = 5000;   // per-subproblem Newton budget
  double feasibility_gamma = 1e3; // frozen gamma for the slack phase

  void validate() const {
    detail::require(gamma_tol > 0 && max_outer_iters > 0 && feasibility_max_iters > 0 &&
                        margin > 0 && solver_tol > 0 && solver_max_newton > 0 &&
                        feasibility_gamma > 0,
                    "SynthesisOptions: all fields must be positive");
  }
};

struct SynthesisResult {
  Matrix G;
  double gamma = std::numeric_limits<double>::infinity();
  Matrix X;
  int outer_iterations = 0;
  std::vector<double> gamma_history;
  SynthesisStatus status = SynthesisStatus::InfeasibleStructure;
};

// ---------------------------------------------------------------------------
// LMI assembly
// ---------------------------------------------------------------------------

/// Affine linearization of X^-1 at SPD X_k:
/// L = X_k^-1 - X_k^-1 (X - X_k) X_k^-1. Satisfies L <= X^-1 for SPD X.
inline Matrix linearize_inverse(const Matrix& Xk, const Matrix& X) {
  detail::require(Xk.rows() == Xk.cols() && X.rows() == X.cols() && Xk.rows() == X.rows(),
                  "linearize_inverse: dimension mismatch");
  detail::require((Xk - Xk.transpose()).cwiseAbs().maxCoeff() <= 1e-9,
                  "linearize_inverse: X_k must be symmetric");
  Eigen::LLT<Matrix> llt(Xk);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("linearize_inverse: X_k is not positive definite");
  Matrix Xk_inv = llt.solve(Matrix::Identity(Xk.rows(), Xk.cols()));
  Matrix L = 2.0 * Xk_inv - Xk_inv * X * Xk_inv;
  return 0.5 * (L + L.transpose());
}

namespace detail {

/// Shared frame of the gain-bound LMI with a caller-chosen (3,3) block.
inline Matrix energy_gain_lmi_frame(const PlantModel& plant, const Matrix& G, const Matrix& X,
                                    double eta, const Matrix& block33) {
  require(G.rows() == plant.inputs() && G.cols() == plant.outputs(),
          "energy-gain LMI: G must be m x p");
  require(X.rows() == plant.states() && X.cols() == plant.states(),
          "energy-gain LMI: X must be n x n");
  const int n = plant.states();
  const int m = plant.inputs();
  Matrix M = Matrix::Zero(3 * n + m, 3 * n + m);
  Matrix Ahat = plant.A() + plant.B() * G * plant.C();
  M.block(0, 0, n, n) = 0.5 * (X + X.transpose());
  M.block(0, 2 * n, n, n) = Ahat;
  M.block(2 * n, 0, n, n) = Ahat.transpose();
  M.block(0, 3 * n, n, m) = plant.B();
  M.block(3 * n, 0, m, n) = plant.B().transpose();
  M.block(n, n, n, n) = eta * Matrix::Identity(n, n);
  M.block(n, 2 * n, n, n) = Matrix::Identity(n, n);
  M.block(2 * n, n, n, n) = Matrix::Identity(n, n);
  M.block(2 * n, 2 * n, n, n) = block33;
  M.block(3 * n, 3 * n, m, m) = Matrix::Identity(m, m);
  return M;
}

}  // namespace detail

/// Exact gain-bound LMI with the true X^-1 in block (3,3).
/// Blocks are (n, n, n, m); the disturbance input matrix is taken to be B.
inline Matrix assemble_energy_gain_lmi(const PlantModel& plant, const Matrix& G, const Matrix& X,
                                       double eta) {
  Eigen::LLT<Matrix> llt(0.5 * (X + X.transpose()));
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("assemble_energy_gain_lmi: X is not positive definite");
  Matrix Xinv = llt.solve(Matrix::Identity(X.rows(), X.cols()));
  return detail::energy_gain_lmi_frame(plant, G, X, eta, 0.5 * (Xinv + Xinv.transpose()));
}

/// Same frame with block (3,3) replaced by the linearization at X_k; affine
/// in (eta, X, G).
inline Matrix assemble_linearized_lmi(const PlantModel& plant, const Matrix& G, const Matrix& X,
                                      double eta, const Matrix& Xk) {
  return detail::energy_gain_lmi_frame(plant, G, X, eta, linearize_inverse(Xk, X));
}

// ---------------------------------------------------------------------------
// Subproblem construction
// ---------------------------------------------------------------------------

namespace detail {

/// Builds the convex subproblem at linearization point X_k.
/// feasibility_eta empty: minimize eta (the scalar variable is eta, stamped
/// into block (2,2)). feasibility_eta set: eta is frozen at that value and
/// the scalar variable is a slack s added to the whole LMI block, which then
/// carries no margin; the X floor and the gain ball stay hard.
inline sdp::ConicProblem build_subproblem(const PlantModel& plant, const GainConstraintSet& cs,
                                          const Matrix& Xk_inv, double margin,
                                          std::optional<double> feasibility_eta) {
  const int n = plant.states();
  const int m = plant.inputs();
  const int p = plant.outputs();
  const int body = 3 * n + m;

  sdp::ConicProblem prob;
  prob.margin = margin;
  prob.nx = n;
  prob.gain_rows = m;
  prob.gain_cols = p;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j)
      if (cs.support()(i, j) == 1.0) prob.gain_support.emplace_back(i, j);

  auto& lmi = prob.add_block(body);
  if (feasibility_eta) lmi.margin = 0.0;

  // Constant part: A, B, the identity couplings, and the linearization offset.
  Matrix F0 = Matrix::Zero(body, body);
  F0.block(0, 2 * n, n, n) = plant.A();
  F0.block(2 * n, 0, n, n) = plant.A().transpose();
  F0.block(0, 3 * n, n, m) = plant.B();
  F0.block(3 * n, 0, m, n) = plant.B().transpose();
  F0.block(n, 2 * n, n, n) = Matrix::Identity(n, n);
  F0.block(2 * n, n, n, n) = Matrix::Identity(n, n);
  F0.block(2 * n, 2 * n, n, n) = 2.0 * Xk_inv;
  F0.block(3 * n, 3 * n, m, m) = Matrix::Identity(m, m);
  if (feasibility_eta)
    F0.block(n, n, n, n) = *feasibility_eta * Matrix::Identity(n, n);
  lmi.constant = F0;

  if (feasibility_eta) {
    lmi.add_term(prob.scalar_index(), Matrix::Identity(body, body));
  } else {
    Matrix Feta = Matrix::Zero(body, body);
    Feta.block(n, n, n, n) = Matrix::Identity(n, n);
    lmi.add_term(prob.scalar_index(), Feta);
  }

  auto& floor = prob.add_block(n);  // X >= margin*I via the default margin

  // The slack phase needs X boxed to a sane scale. With the LMI relaxed by s
  // the slack covers the (1,1) block, so the minimizer rams X into its floor;
  // the next linearization then carries X^-1 with norm 1/floor and the
  // subproblem becomes numerically hopeless. A floor of 1e-2 keeps every
  // relinearization well conditioned and costs nothing at the generous frozen
  // eta. The cap bounds the opposite drift: the barrier otherwise rewards
  // inflating X without bound (no analytic center) once s absorbs the damage.
  sdp::AffineBlock* cap = nullptr;
  if (feasibility_eta) {
    floor.margin = 1e-2;
    cap = &prob.add_block(n);
    cap->margin = 0.0;
    cap->constant = 1e4 * Matrix::Identity(n, n);
  }

  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Matrix E = Matrix::Zero(n, n);
      E(i, j) = E(j, i) = 1.0;
      Matrix lin = -Xk_inv * E * Xk_inv;
      Matrix coeff = Matrix::Zero(body, body);
      coeff.block(0, 0, n, n) = E;
      coeff.block(2 * n, 2 * n, n, n) = 0.5 * (lin + lin.transpose());
      lmi.add_term(prob.x_index(i, j), coeff);
      floor.add_term(prob.x_index(i, j), E);
      if (cap) cap->add_term(prob.x_index(i, j), Matrix(-E));
    }

  for (int k = 0; k < static_cast<int>(prob.gain_support.size()); ++k) {
    auto [i, j] = prob.gain_support[k];
    Matrix N = plant.B().col(i) * plant.C().row(j);
    Matrix coeff = Matrix::Zero(body, body);
    coeff.block(0, 2 * n, n, n) = N;
    coeff.block(2 * n, 0, n, n) = N.transpose();
    lmi.add_term(prob.gain_index(k), coeff);
  }

  if (cs.frobenius_bound() && !prob.gain_support.empty()) {
    // [[gmax*I, vec(G)], [vec(G)', gmax]] >= 0  <=>  ||G||_F <= gmax.
    const int q = static_cast<int>(prob.gain_support.size());
    auto& ball = prob.add_block(q + 1);
    ball.margin = 0.0;
    ball.constant = *cs.frobenius_bound() * Matrix::Identity(q + 1, q + 1);
    for (int k = 0; k < q; ++k) {
      Matrix E = Matrix::Zero(q + 1, q + 1);
      E(k, q) = E(q, k) = 1.0;
      ball.add_term(prob.gain_index(k), E);
    }
  }
  return prob;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feasibility phase
// ---------------------------------------------------------------------------

struct FeasibleStart {
  bool ok = false;
  Matrix X0;
  Matrix G0;
  double gamma0 = 0.0;
  int iterations = 0;
  double slack = std::numeric_limits<double>::infinity();  // final s value
};

/// Searches for a strictly feasible start of the descent loop: minimizes a
/// slack s over the linearized LMI with gamma frozen at a large value,
/// re-linearizing at each iterate, and accepts once s < -margin. A stalling
/// slack is reported as structural infeasibility for this method.
inline FeasibleStart find_feasible_start(const PlantModel& plant, const GainConstraintSet& cs,
                                         const SynthesisOptions& options = {}) {
  options.validate();
  detail::require(cs.actuators() == plant.inputs() && cs.sensors() == plant.outputs(),
                  "find_feasible_start: constraint set shape must match the plant");
  const int n = plant.states();
  const double eta_bar = options.feasibility_gamma * options.feasibility_gamma;

  FeasibleStart fs;
  Matrix Xk = Matrix::Identity(n, n);
  Matrix Gk = Matrix::Zero(plant.inputs(), plant.outputs());
  double prev_slack = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= options.feasibility_max_iters; ++iter) {
    fs.iterations = iter;
    Eigen::LLT<Matrix> llt(Xk);
    if (llt.info() != Eigen::Success) break;  // defensive; iterates stay SPD
    Matrix Xk_inv = llt.solve(Matrix::Identity(n, n));
    Xk_inv = 0.5 * (Xk_inv + Xk_inv.transpose());
    auto prob = detail::build_subproblem(plant, cs, Xk_inv, options.margin, eta_bar);

    sdp::SolverOptions sopts;
    sopts.tol = options.solver_tol;
    sopts.max_newton = options.solver_max_newton;
    sopts.stop_objective_below = -1e-2;  // deep enough interior; no need to polish
    double s0 = sdp::min_eigenvalue(assemble_linearized_lmi(plant, Gk, Xk, eta_bar, Xk));
    double s_warm = std::max(-s0, 0.0) + 1.0;
    sopts.warm_start = prob.pack(s_warm, Xk, Gk);
    // Start the barrier weight so the first central point sits near the warm
    // point (gap ~ nu/t); t=1 would re-center at the analytic center, whose
    // X component is enormous, and burn the Newton budget walking there.
    double gap_est = std::isfinite(fs.slack) ? std::max(s_warm - fs.slack, 0.25)
                                             : std::max(s_warm, 1.0);
    sopts.t0 = std::clamp(sdp::problem_nu(prob) / gap_est, 1.0, 1e6);
    auto sol = sdp::solve(prob, sopts);
    if (sol.status == sdp::SolveStatus::MaxIterations) break;

    fs.slack = sol.scalar;
    if (sol.scalar < -options.margin) {
      fs.ok = true;
      fs.X0 = sol.X;
      fs.G0 = sol.G;
      fs.gamma0 = options.feasibility_gamma;
      return fs;
    }
    if (std::abs(prev_slack - sol.scalar) < 1e-7 * std::max(1.0, std::abs(sol.scalar))) break;
    prev_slack = sol.scalar;
    Xk = sol.X;
    Gk = sol.G;
  }
  return fs;
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

/// Iterates the linearized subproblem to a stationary gain. See the header
/// comment for the scheme; gamma_history records gamma at each outer iterate
/// starting from the feasibility-phase value and is nonincreasing up to
/// solver tolerance.
inline SynthesisResult synthesize(const PlantModel& plant, const GainConstraintSet& cs,
                                  const SynthesisOptions& options = {}) {
  options.validate();
  SynthesisResult result;
  auto fs = find_feasible_start(plant, cs, options);
  if (!fs.ok) {
    result.status = SynthesisStatus::InfeasibleStructure;
    result.G = Matrix::Zero(plant.inputs(), plant.outputs());
    result.X = Matrix::Identity(plant.states(), plant.states());
    return result;
  }

  const int n = plant.states();
  Matrix Xk = fs.X0;
  Matrix Gk = fs.G0;
  double gamma_k = fs.gamma0;
  double eta_k = fs.gamma0 * fs.gamma0;
  result.gamma_history.push_back(gamma_k);
  result.status = SynthesisStatus::MaxIterations;
  // Suboptimality estimate for the warm start of the next subproblem: the
  // previous outer step's eta decrease. Gap shrinks monotonically, so this
  // lags by one step on the conservative side. The first solve starts from
  // the feasibility-phase eta, which is far from optimal, hence eta itself.
  double gap_est = eta_k;

  for (int iter = 1; iter <= options.max_outer_iters; ++iter) {
    result.outer_iterations = iter;
    Eigen::LLT<Matrix> llt(Xk);
    if (llt.info() != Eigen::Success) break;  // defensive; iterates stay SPD
    Matrix Xk_inv = llt.solve(Matrix::Identity(n, n));
    Xk_inv = 0.5 * (Xk_inv + Xk_inv.transpose());
    auto prob = detail::build_subproblem(plant, cs, Xk_inv, options.margin, std::nullopt);

    sdp::SolverOptions sopts;
    sopts.tol = options.solver_tol;
    sopts.max_newton = options.solver_max_newton;
    double gap_floor = 10.0 * options.solver_tol * std::max(1.0, eta_k);
    sopts.t0 = std::clamp(sdp::problem_nu(prob) / std::max(gap_est, gap_floor), 1.0, 1e9);
    sopts.warm_start = prob.pack(eta_k, Xk, Gk);
    auto sol = sdp::solve(prob, sopts);
    if (sol.status != sdp::SolveStatus::Optimal) break;  // budget died; keep last iterate

    double gamma_next = std::sqrt(std::max(sol.scalar, 0.0));
    result.gamma_history.push_back(gamma_next);
    double dgamma = gamma_k - gamma_next;
    double dx = (sol.X - Xk).cwiseAbs().maxCoeff();
    Xk = sol.X;
    Gk = sol.G;
    gamma_k = gamma_next;
    gap_est = std::abs(eta_k - sol.scalar);
    eta_k = sol.scalar;
    if (std::abs(dgamma) < options.gamma_tol || dx < 1e-10) {
      result.status = SynthesisStatus::Converged;
      break;
    }
  }

  result.G = Gk;
  result.X = Xk;
  result.gamma = gamma_k;
  return result;
}

// ---------------------------------------------------------------------------
// Independent verification
// ---------------------------------------------------------------------------

/// Frequency-grid estimate of the energy-to-energy gain: the peak spectral
/// norm of (e^{jw} I - Ahat)^-1 B over w in [0, pi]. Requires a stable loop.
inline double energy_gain_estimate(const PlantModel& plant, const Matrix& G,
                                   int grid_points = 2048) {
  detail::require(grid_points >= 2, "energy_gain_estimate: need at least 2 grid points");
  Matrix Ahat = closed_loop_matrix(plant, G);
  if (spectral_radius(Ahat) >= 1.0)
    throw std::invalid_argument("energy_gain_estimate: closed loop is not stable");
  const int n = plant.states();
  Eigen::MatrixXcd A = Ahat.cast<std::complex<double>>();
  Eigen::MatrixXcd B = plant.B().cast<std::complex<double>>();
  double peak = 0.0;
  for (int k = 0; k < grid_points; ++k) {
    double w = M_PI * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    Eigen::MatrixXcd M = std::exp(std::complex<double>(0.0, w)) *
                             Eigen::MatrixXcd::Identity(n, n) -
                         A;
    Eigen::MatrixXcd H = M.partialPivLu().solve(B);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(H);
    peak = std::max(peak, svd.singularValues()(0));
  }
  return peak;
}

/// True when gamma strictly dominates the frequency-grid gain estimate.
inline bool verify_energy_gain(const PlantModel& plant, const Matrix& G, double gamma,
                               int grid_points = 2048) {
  return gamma > energy_gain_estimate(plant, G, grid_points);
}

}  // namespace oac
