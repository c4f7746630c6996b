#pragma once
// factorization.hpp -- over-the-air codebook design: factor a
// channel-compensated gain target M into a precoder matrix P (one
// power-capped column per sensor) and a decoder matrix D (one column per
// actuator) with M = P'D, minimizing the decoder energy (1/2)||D||_F^2.
//
// The factorization is computed by a proximal ADMM on the augmented
// Lagrangian
//
//   L_tau(D, P, Lam) = (1/2)||D||_F^2 - ||Lam||_F^2 / (2 tau)
//                      + (tau/2) ||M - P'D + Lam/tau||_F^2
//
// with proximal weights alpha (on D) and beta (on P) added for the update
// subproblems, and a penalty schedule tau_k = tau0 * (k+1)^e, e > 1, whose
// 1/tau_k series must be summable for the descent argument to close. The
// D-update is an exact SPD solve; the P-update splits into independent
// ball-constrained least-squares columns, each solved exactly through the
// secular equation of its shifted system.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oac/model.hpp"
#include "oac/random.hpp"

namespace oac {

// ---------------------------------------------------------------------------
// Problem statement
// ---------------------------------------------------------------------------

/// The codebook design instance: target M (sensors x actuators), per-sensor
/// transmit power caps, and the number of transmission slots T (the common
/// row dimension of the factors).
class OacProblem {
 public:
  OacProblem(Matrix target, PowerBudget budgets, int slots)
      : M_(std::move(target)), budgets_(std::move(budgets)), T_(slots) {
    detail::require(T_ >= 1, "OacProblem: slot count must be at least 1");
    detail::require(M_.size() > 0 && M_.allFinite(),
                    "OacProblem: target must be nonempty and finite");
    detail::require(budgets_.sensors() == static_cast<int>(M_.rows()),
                    "OacProblem: one power budget per sensor row of the target");
  }

  const Matrix& target() const { return M_; }
  const Vector& budgets() const { return budgets_.values(); }
  int sensors() const { return static_cast<int>(M_.rows()); }
  int actuators() const { return static_cast<int>(M_.cols()); }
  int slots() const { return T_; }

  /// Numerical rank of the target: singular values above 1e-10 * sigma_max.
  int target_rank() const {
    Eigen::JacobiSVD<Matrix> svd(M_);
    double floor = 1e-10 * (svd.singularValues().size() ? svd.singularValues()(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > floor) ++rank;
    return rank;
  }

  /// Heuristic solvability precheck: with fewer slots than the target rank
  /// the exact factorization cannot exist and the iteration will stall.
  bool slots_sufficient() const { return T_ >= target_rank(); }

 private:
  Matrix M_;
  PowerBudget budgets_;
  int T_;
};

/// The designed codebook: precoders P (T x sensors) and decoders D
/// (T x actuators); column j of P is sensor j's per-slot transmit weights.
struct OacCode {
  Matrix P;
  Matrix D;
};

/// One full iterate of the ADMM, plus the residual traces. alpha and beta
/// must be positive for the convergence argument; the update functions
/// themselves accept zero weights.
struct AdmmState {
  Matrix D;
  Matrix P;
  Matrix Lambda;
  int k = 0;
  double tau = 1.0;
  double alpha = 0.1;
  double beta = 0.1;
  std::vector<double> primal_history;  // ||M - P'D||_F after each step
  std::vector<double> lambda_history;  // ||Lambda||_F after each step
};

/// Stationarity residuals of the factorization's KKT system. r1: dual-primal
/// coupling ||P Lam - D||; r2: precoder stationarity ||D Lam' - P diag(g)||
/// with multipliers g estimated per column; r3: primal equality
/// ||M - P'D||; r4: worst complementary slackness |g_j (||p_j||^2 - P_j)|;
/// r5: multiplier sign violation max(0, -min_j g_j).
struct KktReport {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double r5 = 0.0;
  Vector gamma;

  double max_residual() const { return std::max({r1, r2, r3, r4, r5}); }
};

enum class AdmmStatus { Converged, MaxIterations };

inline const char* to_string(AdmmStatus s) {
  switch (s) {
    case AdmmStatus::Converged: return "converged";
    case AdmmStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

struct AdmmOptions {
  double tau0 = 1.0;
  double exponent = 1.5;
  double alpha = 0.1;
  double beta = 0.1;
  double primal_tol = 1e-6;
  double iterate_tol = 1e-8;
  int max_iters = 5000;

  void validate() const {
    detail::require(tau0 > 0.0, "AdmmOptions: tau0 must be positive");
    detail::require(exponent > 1.0, "AdmmOptions: exponent must exceed 1");
    detail::require(alpha > 0.0 && beta > 0.0, "AdmmOptions: proximal weights must be positive");
    detail::require(primal_tol > 0.0 && iterate_tol > 0.0, "AdmmOptions: tolerances must be positive");
    detail::require(max_iters >= 1, "AdmmOptions: max_iters must be at least 1");
  }
};

struct AdmmResult {
  OacCode code;
  KktReport kkt;
  AdmmState state;
  AdmmStatus status = AdmmStatus::MaxIterations;
  double primal_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// ---------------------------------------------------------------------------
// Target assembly and gain reconstruction
// ---------------------------------------------------------------------------

/// Channel-compensated factorization target: entry (j, i) is g_ij / h_ij on
/// the gain's support and 0 where the gain is zero. Every live gain entry
/// needs a live channel coefficient to compensate.
inline Matrix target_matrix(const Matrix& G, const ChannelRealization& H) {
  detail::require(G.rows() == H.actuators() && G.cols() == H.sensors(),
                  "target_matrix: gain shape must match the channel");
  const int m = static_cast<int>(G.rows());
  const int p = static_cast<int>(G.cols());
  Matrix M = Matrix::Zero(p, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j) {
      if (G(i, j) == 0.0) continue;
      detail::require(H.has(i, j) && H.coeff(i, j) != 0.0,
                      "target_matrix: live gain entry without a usable channel coefficient");
      M(j, i) = G(i, j) / H.coeff(i, j);
    }
  return M;
}

/// The gain the codebook actually implements through channel H:
/// g_ij = h_ij * (P'D)_ji on the channel support, 0 elsewhere.
inline Matrix reconstruct_gain(const OacCode& code, const ChannelRealization& H) {
  detail::require(code.P.cols() == H.sensors() && code.D.cols() == H.actuators() &&
                      code.P.rows() == code.D.rows(),
                  "reconstruct_gain: codebook shape must match the channel");
  Matrix prod = code.P.transpose() * code.D;  // sensors x actuators
  Matrix G = Matrix::Zero(H.actuators(), H.sensors());
  for (int i = 0; i < H.actuators(); ++i)
    for (int j = 0; j < H.sensors(); ++j)
      if (H.has(i, j)) G(i, j) = H.coeff(i, j) * prod(j, i);
  return G;
}

// ---------------------------------------------------------------------------
// ADMM pieces
// ---------------------------------------------------------------------------

/// Penalty at iteration k: tau0 * (k+1)^exponent, saturated at 1e12 so late
/// iterations stay inside floating-point range. exponent must exceed 1 so
/// that sum 1/tau_k converges.
inline double step_schedule(int k, double tau0 = 1.0, double exponent = 1.5) {
  detail::require(k >= 0, "step_schedule: iteration index must be nonnegative");
  detail::require(tau0 > 0.0, "step_schedule: tau0 must be positive");
  detail::require(exponent > 1.0, "step_schedule: exponent must exceed 1 (summability)");
  return std::min(tau0 * std::pow(static_cast<double>(k) + 1.0, exponent), 1e12);
}

/// Fresh iterate: precoder columns drawn uniformly inside their power balls
/// (hence feasible from the start), decoders 0.1-scaled standard normal
/// (column-major draw order), zero dual. Deterministic in the seed.
inline AdmmState admm_init(const OacProblem& pb, const AdmmOptions& opts, std::uint64_t seed) {
  opts.validate();
  auto rng = make_rng(seed);
  AdmmState s;
  const int T = pb.slots();
  s.P = Matrix(T, pb.sensors());
  for (int j = 0; j < pb.sensors(); ++j)
    s.P.col(j) = sample_ball_vector(rng, T, std::sqrt(pb.budgets()(j)));
  std::normal_distribution<double> normal(0.0, 1.0);
  s.D = Matrix(T, pb.actuators());
  for (int i = 0; i < pb.actuators(); ++i)
    for (int t = 0; t < T; ++t) s.D(t, i) = 0.1 * normal(rng);
  s.Lambda = Matrix::Zero(pb.sensors(), pb.actuators());
  s.k = 0;
  s.tau = step_schedule(0, opts.tau0, opts.exponent);
  s.alpha = opts.alpha;
  s.beta = opts.beta;
  return s;
}

/// Exact decoder update: the unique minimizer of the proximal Lagrangian in
/// D, from the SPD system ((1+alpha) I + tau P P') D = P (tau M + Lambda)
/// + alpha D_k. state.P and state.Lambda are the current iterates and
/// state.D is the proximal center.
inline Matrix d_update(const AdmmState& s, const OacProblem& pb) {
  const int T = pb.slots();
  Matrix lhs = (1.0 + s.alpha) * Matrix::Identity(T, T) +
               s.tau * s.P * s.P.transpose();
  Matrix rhs = s.P * (s.tau * pb.target() + s.Lambda) + s.alpha * s.D;
  return lhs.llt().solve(rhs);
}

namespace detail {

/// Smallest mu >= 0 with sum_t q_t^2 / (sig_t + mu)^2 = budget, for
/// sig_t >= 0 and a value > budget at mu = 0. Safeguarded Newton on the
/// strictly decreasing secular function, bracketed by [0, ||q|| / sqrt(b)].
inline double secular_root(const Vector& q, const Vector& sig, double budget) {
  auto phi = [&](double mu) {
    double v = 0.0;
    for (int t = 0; t < q.size(); ++t) {
      double den = sig(t) + mu;
      if (q(t) == 0.0) continue;
      if (den <= 0.0) return std::numeric_limits<double>::infinity();
      v += (q(t) / den) * (q(t) / den);
    }
    return v;
  };
  auto dphi = [&](double mu) {
    double v = 0.0;
    for (int t = 0; t < q.size(); ++t) {
      double den = sig(t) + mu;
      if (q(t) == 0.0 || den <= 0.0) continue;
      v -= 2.0 * q(t) * q(t) / (den * den * den);
    }
    return v;
  };
  double lo = 0.0;
  double hi = q.norm() / std::sqrt(budget);  // phi(hi) <= ||q||^2 / hi^2 = budget
  double mu = std::min(hi, 1.0);
  for (int it = 0; it < 200; ++it) {
    double f = phi(mu) - budget;
    if (std::abs(f) <= 1e-12 * std::max(1.0, budget)) return mu;
    if (f > 0.0)
      lo = mu;
    else
      hi = mu;
    double d = dphi(mu);
    double next = std::isfinite(f) && d < 0.0 ? mu - f / d : mu;
    mu = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * (1.0 + hi)) return mu;
  }
  return mu;
}

}  // namespace detail

/// Exact precoder update. The subproblem separates by column j into
///   min (tau/2)||D' p - c_j||^2 + (beta/2)||p - p_j^k||^2  s.t. ||p||^2 <= P_j
/// with c_j row j of (M + Lambda/tau). The unconstrained solution comes from
/// the eigendecomposition of tau D D' + beta I (shared across columns); when
/// it breaks the ball, the exact multiplier is the secular-equation root.
/// state.D is the freshly updated decoder, state.P the proximal center.
inline Matrix p_update(const AdmmState& s, const OacProblem& pb) {
  const int T = pb.slots();
  const int p = pb.sensors();
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(s.tau * s.D * s.D.transpose()));
  detail::require(es.info() == Eigen::Success, "p_update: eigensolver failure");
  Vector sig = es.eigenvalues().cwiseMax(0.0).array() + s.beta;
  const Matrix& Q = es.eigenvectors();
  Matrix C = pb.target() + s.Lambda / s.tau;
  Matrix P1(T, p);
  for (int j = 0; j < p; ++j) {
    double budget = pb.budgets()(j);
    Vector rhs = s.tau * s.D * C.row(j).transpose() + s.beta * s.P.col(j);
    Vector q = Q.transpose() * rhs;
    // Norm of the mu-shifted solution; infinite when a zero eigenvalue
    // carries signal, which forces the constraint active.
    double norm0 = 0.0;
    bool unbounded = false;
    for (int t = 0; t < T; ++t) {
      if (q(t) == 0.0) continue;
      if (sig(t) <= 0.0) {
        unbounded = true;
        break;
      }
      norm0 += (q(t) / sig(t)) * (q(t) / sig(t));
    }
    double mu = 0.0;
    if (unbounded || norm0 > budget) mu = detail::secular_root(q, sig, budget);
    Vector y(T);
    for (int t = 0; t < T; ++t) y(t) = q(t) == 0.0 ? 0.0 : q(t) / (sig(t) + mu);
    P1.col(j) = Q * y;
  }
  return P1;
}

/// Dual ascent on the factorization equality; state holds the freshly
/// updated primal pair.
inline Matrix dual_update(const AdmmState& s, const OacProblem& pb) {
  return s.Lambda + s.tau * (pb.target() - s.P.transpose() * s.D);
}

/// One full iteration in place: decoder, precoders, dual, residual traces,
/// then the penalty advances along the schedule. opts must be the ones the
/// state was initialized with.
inline void admm_step(AdmmState& s, const OacProblem& pb, const AdmmOptions& opts) {
  s.D = d_update(s, pb);
  s.P = p_update(s, pb);
  s.Lambda = dual_update(s, pb);
  s.primal_history.push_back((pb.target() - s.P.transpose() * s.D).norm());
  s.lambda_history.push_back(s.Lambda.norm());
  s.k += 1;
  s.tau = step_schedule(s.k, opts.tau0, opts.exponent);
}

/// Stationarity report at (P, D, Lambda). Multipliers are estimated per
/// column by least squares from the precoder stationarity condition; zero
/// columns get zero.
inline KktReport kkt_residuals(const Matrix& P, const Matrix& D, const Matrix& Lambda,
                               const OacProblem& pb) {
  detail::require(P.rows() == pb.slots() && P.cols() == pb.sensors() &&
                      D.rows() == pb.slots() && D.cols() == pb.actuators() &&
                      Lambda.rows() == pb.sensors() && Lambda.cols() == pb.actuators(),
                  "kkt_residuals: shape mismatch");
  KktReport rep;
  rep.r1 = (P * Lambda - D).norm();
  Matrix DLt = D * Lambda.transpose();  // T x sensors
  rep.gamma = Vector::Zero(pb.sensors());
  for (int j = 0; j < pb.sensors(); ++j) {
    double nn = P.col(j).squaredNorm();
    if (nn > 0.0) rep.gamma(j) = P.col(j).dot(DLt.col(j)) / nn;
  }
  rep.r2 = (DLt - P * rep.gamma.asDiagonal()).norm();
  rep.r3 = (pb.target() - P.transpose() * D).norm();
  for (int j = 0; j < pb.sensors(); ++j) {
    rep.r4 = std::max(rep.r4, std::abs(rep.gamma(j) *
                                       (P.col(j).squaredNorm() - pb.budgets()(j))));
    rep.r5 = std::max(rep.r5, -rep.gamma(j));
  }
  rep.r5 = std::max(rep.r5, 0.0);
  return rep;
}

/// Two-sided descent bound between consecutive iterates: the drop of the
/// augmented Lagrangian minus its proximal-minus-dual lower bound
///   (alpha/2)||dD||^2 + (beta/2)||dP||^2 - dtau ||dLam||^2,
/// dtau = (tau_k + tau_{k+1}) / (2 tau_k^2). Nonnegative along the
/// iteration; both states must hold feasible precoders.
inline double descent_check(const AdmmState& prev, const AdmmState& next, const OacProblem& pb) {
  auto lagrangian = [&](const AdmmState& s) {
    Matrix gap = pb.target() - s.P.transpose() * s.D + s.Lambda / s.tau;
    return 0.5 * s.D.squaredNorm() - s.Lambda.squaredNorm() / (2.0 * s.tau) +
           0.5 * s.tau * gap.squaredNorm();
  };
  double dtau = (prev.tau + next.tau) / (2.0 * prev.tau * prev.tau);
  double bound = 0.5 * prev.alpha * (next.D - prev.D).squaredNorm() +
                 0.5 * prev.beta * (next.P - prev.P).squaredNorm() -
                 dtau * (next.Lambda - prev.Lambda).squaredNorm();
  return lagrangian(prev) - lagrangian(next) - bound;
}

/// Runs the ADMM to the combined stopping rule: primal residual within
/// primal_tol and both primal factors moving less than iterate_tol. On the
/// iteration budget the best-residual iterate is returned instead, flagged
/// MaxIterations. The flag is deliberately strict: the product PᵀD often
/// matches the target to machine precision long before the iterates stop
/// drifting, so gate on primal_residual when exactness is all that matters.
inline AdmmResult run_admm(const OacProblem& pb, const AdmmOptions& opts = {},
                           std::uint64_t seed = 0) {
  opts.validate();
  AdmmResult res;
  AdmmState s = admm_init(pb, opts, seed);
  Matrix bestP = s.P, bestD = s.D, bestL = s.Lambda;
  double best_res = (pb.target() - s.P.transpose() * s.D).norm();

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    Matrix prevD = s.D, prevP = s.P;
    admm_step(s, pb, opts);
    double r = s.primal_history.back();
    if (r < best_res) {
      best_res = r;
      bestP = s.P;
      bestD = s.D;
      bestL = s.Lambda;
    }
    // Frobenius movement. Runs whose dual variable is still creeping move
    // like 1/tau and never pass this bar; the flag therefore certifies a
    // settled stationary point, not merely an exact product.
    double move = std::max((s.D - prevD).norm(), (s.P - prevP).norm());
    if (r <= opts.primal_tol && move <= opts.iterate_tol) {
      res.status = AdmmStatus::Converged;
      res.code = {s.P, s.D};
      res.primal_residual = r;
      res.kkt = kkt_residuals(s.P, s.D, s.Lambda, pb);
      res.iterations = s.k;
      res.state = std::move(s);
      return res;
    }
  }

  res.status = AdmmStatus::MaxIterations;
  res.code = {bestP, bestD};
  res.primal_residual = best_res;
  res.kkt = kkt_residuals(bestP, bestD, bestL, pb);
  res.iterations = s.k;
  res.state = std::move(s);
  return res;
}

}  // namespace oac
