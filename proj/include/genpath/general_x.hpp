#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "genpath/ls_oracle.hpp"
#include "genpath/operators.hpp"
#include "genpath/path_core.hpp"

namespace genpath {

struct TransformedProblem;

// Design matrix with full column rank. The factor behind pinv_apply and
// normal_solve is built on first use and cached; copies share it, along with
// the instrumentation counters. Path iterations on the specialized route
// never touch the factor — it is only needed to reconstruct coefficients.
class DesignMatrix {
 public:
  explicit DesignMatrix(Eigen::MatrixXd x);

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  const Eigen::MatrixXd& matrix() const;

  // Minimum-norm least squares: X^+ v.
  Eigen::VectorXd pinv_apply(const Eigen::VectorXd& v) const;
  // Solves X^T X beta = rhs with one pair of triangular solves.
  Eigen::VectorXd normal_solve(const Eigen::VectorXd& rhs) const;

  // How many times the full factor has been built (0 or 1) and how many
  // full-size solves have gone through it.
  int factor_builds() const;
  long full_solves() const;

 private:
  struct Cache;
  Cache& factored() const;
  std::shared_ptr<Cache> cache_;

  friend TransformedProblem transform_generic(const Eigen::VectorXd& y,
                                              const DesignMatrix& x,
                                              const SparseRowMat& d);
};

// X stacked over sqrt(2*eps)*I and y padded with p zeros; the augmented
// design has full column rank for any X.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> ridge_augment(
    const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double eps);

struct TransformedProblem {
  Eigen::VectorXd y;  // X X^+ y
  Eigen::MatrixXd d;  // D X^+
};

// Reduces the general-design problem to a signal approximation in R^n.
TransformedProblem transform_generic(const Eigen::VectorXd& y,
                                     const DesignMatrix& x,
                                     const SparseRowMat& d);

// X^T c - X^T X H (H^T X^T X H)^{-1} H^T X^T c. Only a q x q system is
// solved, where q is the number of columns of H; q = 0 returns X^T c.
Eigen::VectorXd project_through_design(const Eigen::VectorXd& c,
                                       const DesignMatrix& x,
                                       const Eigen::MatrixXd& h);

// Per-iteration quantities for a structured penalty under a general design,
// in three steps: a basis H of null(D_{-B}), projections through q x q
// solves in (XH)^T XH, and the X = I backend for the interior systems. The
// design factor is never built. `y` and `oracle` must outlive the provider.
class DesignStepProvider : public StepProvider {
 public:
  DesignStepProvider(const Eigen::VectorXd& y, DesignMatrix x,
                     PenaltySpec spec, LsOracle& oracle);

  Eigen::Index total_rows() const override { return d_.rows(); }
  StepData step(const BoundaryPartition& boundary) override;
  void apply_hit(Eigen::Index row, int sign) override;
  void apply_leave(Eigen::Index row) override;
  Eigen::Index nullity() const override { return h_.cols(); }

 private:
  void refresh_basis();

  const Eigen::VectorXd& y_;
  DesignMatrix x_;
  PenaltySpec spec_;
  SparseRowMat d_;
  LsOracle* oracle_;
  std::vector<Eigen::Index> bdry_;
  Eigen::VectorXd xty_;
  Eigen::MatrixXd h_;
  Eigen::MatrixXd xh_;
  Eigen::LDLT<Eigen::MatrixXd> gram_;
};

// Transform-and-run route for an arbitrary penalty. Knots carry the same
// degrees of freedom as the specialized route (the nullity of the reduced
// penalty over coefficients, not over fitted values).
SolutionPath run_path_design_generic(const Eigen::VectorXd& y,
                                     const DesignMatrix& x,
                                     const SparseRowMat& d,
                                     const PathOptions& opt = {});

// Specialized route for trend filtering and (sparse) fused graphs; custom
// penalties fall back to the transform-and-run route.
SolutionPath run_path_design(const Eigen::VectorXd& y, const DesignMatrix& x,
                             const PenaltySpec& spec,
                             const PathOptions& opt = {});

}  // namespace genpath
