#pragma once
// sdp.hpp -- minimal dense semidefinite optimization layer: linear objective
// over affine symmetric-matrix constraints required positive semidefinite
// with a margin.
//
// Problems are small (blocks of a few dozen rows, tens of variables), so the
// backend is a log-det barrier interior-point path-follower over dense
// blocks. Strict matrix inequalities are realized as S >= margin*I; the
// barrier operates on the shifted blocks, so returned optimal points always
// satisfy the margin strictly.
//
// Phase 1, when no strictly feasible start is supplied, minimizes an extra
// slack s over S_b(z) + s*I until s is safely negative; failure to push s
// below zero is an infeasibility certificate in the residual-stall sense.

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "oac/model.hpp"

namespace oac::sdp {

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

/// Smallest eigenvalue of a symmetric matrix. Rejects inputs whose
/// asymmetry exceeds 1e-10 instead of silently symmetrizing.
inline double min_eigenvalue(const Matrix& S) {
  detail::require(S.rows() == S.cols() && S.rows() >= 1, "min_eigenvalue: matrix must be square");
  double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  detail::require(asym <= 1e-10, "min_eigenvalue: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("min_eigenvalue: eigensolver did not converge");
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// One affine constraint S(z) = F0 + sum_i z_i F_i, required >= margin*I.
/// A negative margin means "use the problem default".
struct AffineBlock {
  Matrix constant;
  std::vector<std::pair<int, Matrix>> terms;
  double margin = -1.0;

  explicit AffineBlock(int size) : constant(Matrix::Zero(size, size)) {
    detail::require(size >= 1, "AffineBlock: size must be positive");
  }

  int size() const { return static_cast<int>(constant.rows()); }

  /// Accumulates a coefficient matrix for variable `var`.
  void add_term(int var, const Matrix& coeff) {
    detail::require(var >= 0, "AffineBlock: negative variable index");
    detail::require(coeff.rows() == size() && coeff.cols() == size(),
                    "AffineBlock: coefficient shape must match the block");
    detail::require((coeff - coeff.transpose()).cwiseAbs().maxCoeff() <= 1e-10,
                    "AffineBlock: coefficient must be symmetric");
    for (auto& [v, F] : terms)
      if (v == var) {
        F += coeff;
        return;
      }
    terms.emplace_back(var, coeff);
  }

  /// S(z) without any margin shift.
  Matrix evaluate(const Vector& z) const {
    Matrix S = constant;
    for (const auto& [v, F] : terms) S += z(v) * F;
    return S;
  }
};

/// Linear objective (minimize the scalar variable) over affine blocks in the
/// variables (scalar, symmetric X, masked G). X or G may be absent (size 0).
/// Flat layout: index 0 is the scalar, then the upper triangle of X packed
/// row-major, then the gain support entries in the given order.
struct ConicProblem {
  int nx = 0;
  int gain_rows = 0;
  int gain_cols = 0;
  std::vector<std::pair<int, int>> gain_support;
  double margin = 1e-6;
  // deque: add_block hands out references that must survive later insertions
  std::deque<AffineBlock> blocks;

  int num_vars() const { return 1 + nx * (nx + 1) / 2 + static_cast<int>(gain_support.size()); }
  int scalar_index() const { return 0; }

  /// Packed index of X(i, j); order within the pair does not matter.
  int x_index(int i, int j) const {
    if (i > j) std::swap(i, j);
    detail::require(i >= 0 && j < nx, "ConicProblem: X index out of range");
    return 1 + i * nx - i * (i - 1) / 2 + (j - i);
  }

  /// Flat index of the k-th gain support entry.
  int gain_index(int k) const {
    detail::require(k >= 0 && k < static_cast<int>(gain_support.size()),
                    "ConicProblem: gain entry out of range");
    return 1 + nx * (nx + 1) / 2 + k;
  }

  AffineBlock& add_block(int size) {
    blocks.emplace_back(size);
    return blocks.back();
  }

  /// Assembles the flat variable vector from structured values. Only the
  /// upper triangle of X and the support entries of G are read.
  Vector pack(double scalar, const Matrix& X = Matrix(), const Matrix& G = Matrix()) const {
    Vector z = Vector::Zero(num_vars());
    z(0) = scalar;
    if (nx > 0) {
      detail::require(X.rows() == nx && X.cols() == nx, "ConicProblem: X shape mismatch in pack");
      for (int i = 0; i < nx; ++i)
        for (int j = i; j < nx; ++j) z(x_index(i, j)) = 0.5 * (X(i, j) + X(j, i));
    }
    if (!gain_support.empty()) {
      detail::require(G.rows() == gain_rows && G.cols() == gain_cols,
                      "ConicProblem: G shape mismatch in pack");
      for (int k = 0; k < static_cast<int>(gain_support.size()); ++k)
        z(gain_index(k)) = G(gain_support[k].first, gain_support[k].second);
    }
    return z;
  }

  void unpack(const Vector& z, double& scalar, Matrix& X, Matrix& G) const {
    detail::require(z.size() == num_vars(), "ConicProblem: variable vector size mismatch");
    scalar = z(0);
    X = Matrix::Zero(nx, nx);
    for (int i = 0; i < nx; ++i)
      for (int j = i; j < nx; ++j) X(i, j) = X(j, i) = z(x_index(i, j));
    G = Matrix::Zero(gain_rows, gain_cols);
    for (int k = 0; k < static_cast<int>(gain_support.size()); ++k)
      G(gain_support[k].first, gain_support[k].second) = z(gain_index(k));
  }
};

struct SolverOptions {
  double tol = 1e-7;        // objective gap target, relative to max(1, |objective|)
  int max_newton = 20000;   // global Newton-step budget across both phases
  double t0 = 1.0;          // initial barrier weight (raise when warm-starting)
  double mu = 30.0;         // barrier weight growth per centering
  std::optional<Vector> warm_start;            // strictly feasible point, if available
  std::optional<double> stop_objective_below;  // early exit once c'z drops below this
};

struct ConicSolution {
  SolveStatus status = SolveStatus::MaxIterations;
  double scalar = 0.0;  // eta* (or s* for feasibility-style problems)
  Matrix X;
  Matrix G;
  double objective = 0.0;
  double infeasibility = 0.0;  // >0 only when status != optimal
  int newton_steps = 0;
  double final_t = 0.0;  // barrier weight at exit; a warm-start hint
  Vector z;
};

/// Barrier parameter of the problem: total constraint rows. The duality gap
/// at barrier weight t is bounded by nu/t, which makes nu/gap_estimate a
/// sound initial weight for warm starts.
inline double problem_nu(const ConicProblem& prob) {
  double nu = 0.0;
  for (const auto& blk : prob.blocks) nu += static_cast<double>(blk.size());
  return nu;
}

/// Plain-text listing of a problem for offline inspection.
inline void dump_problem(const ConicProblem& prob, std::ostream& os) {
  os << "conic problem: vars=" << prob.num_vars() << " nx=" << prob.nx
     << " gains=" << prob.gain_support.size() << " margin=" << prob.margin << "\n";
  for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
    const auto& blk = prob.blocks[b];
    os << "block " << b << " size=" << blk.size() << " margin=" << blk.margin << "\nF0\n"
       << blk.constant << "\n";
    for (const auto& [v, F] : blk.terms) os << "term z[" << v << "]\n" << F << "\n";
  }
}

// ---------------------------------------------------------------------------
// Barrier backend
// ---------------------------------------------------------------------------

namespace detail {

using oac::detail::require;

/// One margin-shifted block T(z) = F0' + sum_i z_i F_i, kept PD throughout.
struct CoreBlock {
  Matrix F0;
  std::vector<std::pair<int, Matrix>> terms;
};

/// Path-following minimizer of c'z subject to every CoreBlock being PD.
/// Single-threaded and stateful during solve.
class BarrierCore {
 public:
  BarrierCore(std::vector<CoreBlock> blocks, Vector c)
      : blocks_(std::move(blocks)), c_(std::move(c)), d_(static_cast<int>(c_.size())) {
    nu_ = 0.0;
    for (const auto& b : blocks_) nu_ += static_cast<double>(b.F0.rows());
  }

  bool strictly_feasible(const Vector& z) const {
    if (z.size() != d_) return false;
    if (!z.allFinite()) return false;
    for (const auto& b : blocks_) {
      Eigen::LLT<Matrix> llt(evaluate(b, z));
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  double max_deficiency(const Vector& z) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks_) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(evaluate(b, z), Eigen::EigenvaluesOnly);
      require(es.info() == Eigen::Success, "barrier: eigensolver failure");
      worst = std::max(worst, -es.eigenvalues().minCoeff());
    }
    return worst;
  }

  struct PathResult {
    Vector z;
    double objective = 0.0;
    int newton_steps = 0;
    bool converged = false;   // gap target reached
    bool early_exit = false;  // stop_objective_below triggered
    double final_t = 0.0;
  };

  /// Follows the central path from a strictly feasible z0. The caller is
  /// responsible for feasibility of z0; behavior is undefined otherwise.
  PathResult follow_path(Vector z0, double t0, double mu, double gap_tol, int newton_budget,
                         std::optional<double> stop_below = std::nullopt) {
    PathResult out;
    out.z = std::move(z0);
    double t = std::max(t0, 1e-8);
    Vector grad(d_);
    Matrix hess(d_, d_);
    std::vector<Matrix> deltas(blocks_.size());
    while (true) {
      // Centering for the current t. The step cap matters at large t, where
      // the decrement bottoms out at a roundoff floor above the exit
      // threshold; path-following tolerates the slightly off-center point.
      for (int step = 0; step < 60; ++step) {
        if (out.newton_steps >= newton_budget) {
          out.objective = c_.dot(out.z);
          out.final_t = t;
          return out;  // budget exhausted; converged stays false
        }
        if (!assemble(out.z, t, grad, hess)) throw std::runtime_error("barrier: lost feasibility");
        Vector dz = solve_newton(hess, grad);
        double decrement2 = -grad.dot(dz);
        if (!(decrement2 > 0.0) || !dz.allFinite()) break;  // stationary or degenerate
        if (decrement2 * 0.5 <= 1e-9) break;
        ++out.newton_steps;
        // Precompute per-block direction images so each trial is one axpy+LLT.
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
          deltas[b] = Matrix::Zero(blocks_[b].F0.rows(), blocks_[b].F0.cols());
          for (const auto& [v, F] : blocks_[b].terms)
            if (dz(v) != 0.0) deltas[b] += dz(v) * F;
        }
        double f0 = t * c_.dot(out.z) + barrier_at(out.z);
        double slope = grad.dot(dz);
        double step_len = 1.0;
        bool moved = false;
        for (int halving = 0; halving < 60; ++halving) {
          double f_trial = trial_value(out.z, dz, deltas, step_len, t);
          if (std::isfinite(f_trial) && f_trial <= f0 + 0.25 * step_len * slope) {
            // The trial evaluates S(z) + step*delta; later assembles evaluate
            // S(z + step*dz) from scratch. Near the boundary the two can
            // disagree on definiteness, so confirm with the latter arithmetic.
            Vector z_new = out.z + step_len * dz;
            if (std::isfinite(barrier_at(z_new))) {
              out.z = std::move(z_new);
              moved = true;
              break;
            }
          }
          step_len *= 0.5;
        }
        if (!moved) break;  // line search stalled; accept the centered-enough point
        double obj = c_.dot(out.z);
        if (std::abs(obj) > 1e18) throw std::runtime_error("barrier: objective diverged (unbounded problem?)");
        if (stop_below && obj < *stop_below) {
          out.objective = obj;
          out.final_t = t;
          out.early_exit = true;
          return out;
        }
      }
      double obj = c_.dot(out.z);
      if (nu_ / t <= gap_tol * std::max(1.0, std::abs(obj))) {
        out.objective = obj;
        out.final_t = t;
        out.converged = true;
        return out;
      }
      t *= mu;
    }
  }

  double nu() const { return nu_; }

 private:
  static Matrix evaluate(const CoreBlock& b, const Vector& z) {
    Matrix S = b.F0;
    for (const auto& [v, F] : b.terms) S += z(v) * F;
    return S;
  }

  double barrier_at(const Vector& z) const {
    double phi = 0.0;
    for (const auto& b : blocks_) {
      Eigen::LLT<Matrix> llt(evaluate(b, z));
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      phi -= 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    }
    return phi;
  }

  double trial_value(const Vector& z, const Vector& dz, const std::vector<Matrix>& deltas,
                     double step, double t) const {
    double phi = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      Matrix S = evaluate(blocks_[b], z);
      S += step * deltas[b];
      Eigen::LLT<Matrix> llt(S);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      phi -= 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    }
    return t * c_.dot(z + step * dz) + phi;
  }

  /// Gradient and Hessian of t*c'z - sum_b log det T_b(z) at z.
  /// Returns false if any block lost positive definiteness.
  bool assemble(const Vector& z, double t, Vector& grad, Matrix& hess) const {
    grad = t * c_;
    hess.setZero();
    std::vector<Matrix> W;
    for (const auto& b : blocks_) {
      Eigen::LLT<Matrix> llt(evaluate(b, z));
      if (llt.info() != Eigen::Success) return false;
      auto L = llt.matrixL();
      const int nt = static_cast<int>(b.terms.size());
      W.assign(nt, Matrix());
      for (int i = 0; i < nt; ++i) {
        // W_i = L^-1 F_i L^-T; symmetric since F_i is.
        Matrix U = L.solve(b.terms[i].second);
        W[i] = L.solve(Matrix(U.transpose()));
        grad(b.terms[i].first) -= W[i].trace();
      }
      for (int i = 0; i < nt; ++i) {
        int gi = b.terms[i].first;
        for (int j = 0; j <= i; ++j) {
          int gj = b.terms[j].first;
          double hij = W[i].cwiseProduct(W[j]).sum();
          hess(gi, gj) += hij;
          if (gi != gj) hess(gj, gi) += hij;
        }
      }
    }
    return true;
  }

  Vector solve_newton(Matrix hess, const Vector& grad) const {
    double ridge = 0.0;
    double scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1.0);
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::LDLT<Matrix> ldlt(hess + ridge * Matrix::Identity(d_, d_));
      if (ldlt.info() == Eigen::Success) {
        Vector dz = ldlt.solve(-grad);
        if (dz.allFinite() && -grad.dot(dz) >= 0.0) return dz;
      }
      ridge = (ridge == 0.0) ? 1e-12 * scale : ridge * 100.0;
    }
    return Vector::Zero(d_);  // caller treats a null direction as stationary
  }

  std::vector<CoreBlock> blocks_;
  Vector c_;
  int d_;
  double nu_;
};

inline std::vector<CoreBlock> shifted_blocks(const ConicProblem& prob) {
  require(!prob.blocks.empty(), "solve: problem has no constraints");
  std::vector<CoreBlock> out;
  out.reserve(prob.blocks.size());
  for (const auto& blk : prob.blocks) {
    double margin = blk.margin >= 0.0 ? blk.margin : prob.margin;
    CoreBlock cb;
    cb.F0 = blk.constant - margin * Matrix::Identity(blk.size(), blk.size());
    for (const auto& [v, F] : blk.terms) {
      require(v < prob.num_vars(), "solve: coefficient references an unknown variable");
      cb.terms.emplace_back(v, F);
    }
    out.push_back(std::move(cb));
  }
  return out;
}

}  // namespace detail

/// Minimizes the scalar variable subject to every block being PSD with its
/// margin. Deterministic given inputs. status=optimal guarantees the
/// returned point re-verifies: min_eigenvalue of every assembled block (with
/// margin absorbed) is >= 0.
inline ConicSolution solve(const ConicProblem& prob, const SolverOptions& opts = {}) {
  auto blocks = detail::shifted_blocks(prob);
  const int d = prob.num_vars();
  Vector c = Vector::Zero(d);
  c(prob.scalar_index()) = 1.0;
  detail::BarrierCore core(blocks, c);

  ConicSolution sol;
  int budget = opts.max_newton;
  Vector z0;
  double t0 = opts.t0;

  if (opts.warm_start && core.strictly_feasible(*opts.warm_start)) {
    z0 = *opts.warm_start;
  } else {
    // Phase 1: minimize slack s over T_b(z) + s*I > 0 until s is negative.
    // A large box on every variable keeps the phase-1 analytic center finite;
    // variables the constraints leave free would otherwise be pushed to
    // infinity by the barrier.
    const double box = 1e8;
    Vector zc = opts.warm_start ? *opts.warm_start : Vector::Zero(d);
    if (!zc.allFinite()) zc.setZero();
    zc = zc.cwiseMax(-0.5 * box).cwiseMin(0.5 * box);
    std::vector<detail::CoreBlock> aug = blocks;
    for (auto& b : aug) b.terms.emplace_back(d, Matrix::Identity(b.F0.rows(), b.F0.cols()));
    for (int i = 0; i <= d; ++i) {
      detail::CoreBlock hi;
      hi.F0 = Matrix::Constant(1, 1, box);
      hi.terms.emplace_back(i, Matrix::Constant(1, 1, -1.0));
      aug.push_back(std::move(hi));
      detail::CoreBlock lo;
      lo.F0 = Matrix::Constant(1, 1, box);
      lo.terms.emplace_back(i, Matrix::Constant(1, 1, 1.0));
      aug.push_back(std::move(lo));
    }
    Vector c1 = Vector::Zero(d + 1);
    c1(d) = 1.0;
    detail::BarrierCore phase1(std::move(aug), c1);
    Vector z1(d + 1);
    z1.head(d) = zc;
    z1(d) = core.max_deficiency(zc) + 1.0;
    auto r1 = phase1.follow_path(z1, 1.0, opts.mu, opts.tol, budget, -1e-4);
    budget -= r1.newton_steps;
    sol.newton_steps += r1.newton_steps;
    Vector candidate = r1.z.head(d);
    if (!core.strictly_feasible(candidate)) {
      sol.status = (r1.converged || r1.early_exit) ? SolveStatus::Infeasible : SolveStatus::MaxIterations;
      sol.infeasibility = std::max(r1.z(d + 0), 0.0);
      prob.unpack(Vector(r1.z.head(d)), sol.scalar, sol.X, sol.G);
      sol.objective = sol.scalar;
      sol.z = r1.z.head(d);
      return sol;
    }
    z0 = candidate;
    t0 = 1.0;
  }

  auto r2 = core.follow_path(z0, t0, opts.mu, opts.tol, budget, opts.stop_objective_below);
  sol.newton_steps += r2.newton_steps;
  sol.status = (r2.converged || r2.early_exit) ? SolveStatus::Optimal : SolveStatus::MaxIterations;
  sol.final_t = r2.final_t;
  sol.z = r2.z;
  prob.unpack(r2.z, sol.scalar, sol.X, sol.G);
  sol.objective = sol.scalar;
  sol.infeasibility = 0.0;
  return sol;
}

/// Contract-level overload: tolerance plus a Newton-step budget.
inline ConicSolution solve(const ConicProblem& prob, double tol, int max_iter) {
  SolverOptions opts;
  opts.tol = tol;
  opts.max_newton = max_iter;
  return solve(prob, opts);
}

}  // namespace oac::sdp
