#pragma once

#include <Eigen/Dense>
#include <vector>

#include "genpath/errors.hpp"

namespace genpath {

// Plane rotation acting on coordinate pair (i, j), i < j, as the 2x2 block
//   G = [ c  s ]
//       [-s  c ]
// embedded in the identity. Column c,s are unit-norm by construction.
struct GivensRotation {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double c = 1.0;
  double s = 0.0;
};

// Rotation with G^T (a, b)^T = (r, 0)^T, r = hypot(a, b) > 0:
// c = a / r, s = -b / r. Rejects (0, 0).
GivensRotation givens_for(double a, double b, Eigen::Index i = 0,
                          Eigen::Index j = 1);

// Rotation with G^T (a, b)^T = (0, r)^T; used when mass should accumulate in
// the second coordinate instead (right-hand column sweeps).
GivensRotation givens_zero_first(double a, double b, Eigen::Index i = 0,
                                 Eigen::Index j = 1);

// x <- G^T x (touches only components i and j).
void rotate_t(const GivensRotation& g, Eigen::VectorXd& x);
// x <- G x.
void rotate(const GivensRotation& g, Eigen::VectorXd& x);
// M <- G^T M (rows i, j).
void apply_left(const GivensRotation& g, Eigen::MatrixXd& m);
// M <- M G (columns i, j).
void apply_right(Eigen::MatrixXd& m, const GivensRotation& g);

// Relative rank cutoff shared by every factorization and update in this
// module: entries of a triangular factor at or below this are treated as 0.
double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double max_abs);

// QR factorization A = Q [R1; 0] of a full-column-rank m x n matrix
// (m >= n), built and updated with Givens rotations only. Q is held
// explicitly, which makes row/column updates O(m) per rotation.
class QRFactor {
 public:
  // Throws RankDeficientError when a diagonal of R1 falls at or below the
  // rank tolerance; callers are expected to fall back to RotatedQRFactor.
  static QRFactor compute(const Eigen::MatrixXd& a);

  Eigen::Index rows() const { return q_.rows(); }
  Eigen::Index cols() const { return n_; }
  const Eigen::MatrixXd& q() const { return q_; }
  const Eigen::MatrixXd& r() const { return r_; }
  double scale() const { return scale_; }

  // Unique least-squares solution of min ||b - A x||.
  Eigen::VectorXd solve_ls(const Eigen::VectorXd& b) const;

  // Structural updates. Positions are indices into the matrix the factor
  // represents after the update; rank must be preserved (add_col throws
  // RankDeficientError if the new column lies in the current span, and
  // remove_row throws if dropping the row loses rank).
  void add_row(const Eigen::VectorXd& w, Eigen::Index at);
  void remove_row(Eigen::Index at);
  void add_col(const Eigen::VectorXd& w, Eigen::Index at);
  void remove_col(Eigen::Index at);

  // A reassembled from the factors; test hook for reconstruction checks.
  Eigen::MatrixXd reconstruct() const;

 private:
  QRFactor() = default;
  double tol() const;

  Eigen::MatrixXd q_;  // m x m
  Eigen::MatrixXd r_;  // m x n, zero below row n_
  Eigen::Index n_ = 0;
  double scale_ = 0.0;
};

// Rank-revealing factorization A P G = Q R with column pivoting P, a logged
// sequence of right-hand rotations G, and
//   R = [ 0  R1 ]      R1: k x k upper triangular, k = rank(A),
//       [ 0  0  ]      sitting in the last k columns.
// Row additions and removals keep this shape under rank changes in either
// direction. With `transposed` set, the factor stores A^T and answers
// least-squares queries in A itself (forward-solve through R1^T).
class RotatedQRFactor {
 public:
  static RotatedQRFactor compute(const Eigen::MatrixXd& a,
                                 bool transposed = false);

  Eigen::Index rows() const { return q_.rows(); }
  Eigen::Index cols() const { return n_; }
  Eigen::Index rank() const { return k_; }
  bool transposed() const { return transposed_; }
  const Eigen::MatrixXd& q() const { return q_; }
  const Eigen::MatrixXd& r() const { return r_; }
  const std::vector<Eigen::Index>& piv() const { return piv_; }
  const std::vector<GivensRotation>& rotations() const { return gseq_; }
  double scale() const { return scale_; }

  // Minimum l2-norm least-squares solution. For a plain factor this solves
  // min ||b - A x|| (b of length rows()); for a transposed factor it solves
  // the problem in A^T of the stored matrix (b of length cols()).
  Eigen::VectorXd solve_minnorm(const Eigen::VectorXd& b) const;

  // Row updates of the stored matrix. Rank increases, stays, or drops as the
  // data dictates; the factor shape is restored in every case.
  void add_row(const Eigen::VectorXd& w, Eigen::Index at);
  void remove_row(Eigen::Index at);

  // Column updates of the least-squares matrix; only meaningful on a
  // transposed factor (a column of A is a row of the stored A^T).
  void add_col_of_original(const Eigen::VectorXd& w, Eigen::Index at);
  void remove_col_of_original(Eigen::Index at);

  // Stored matrix reassembled as Q R G^T P^T; test hook.
  Eigen::MatrixXd reconstruct() const;

 private:
  RotatedQRFactor() = default;
  double tol() const;
  void repair_rank_drops();
  // v <- G v / v <- G^T v / v <- P v / v <- P^T v over the column space.
  void apply_g(Eigen::VectorXd& v) const;
  void apply_gt(Eigen::VectorXd& v) const;

  Eigen::MatrixXd q_;                // m x m
  Eigen::MatrixXd r_;                // m x n
  std::vector<Eigen::Index> piv_;   // piv_[t] = source column at slot t
  std::vector<GivensRotation> gseq_;
  Eigen::Index n_ = 0;
  Eigen::Index k_ = 0;
  bool transposed_ = false;
  double scale_ = 0.0;
};

// Basic (not minimum-norm) least-squares solution from the pivoted
// factorization alone: free components pinned to zero in pivot order.
Eigen::VectorXd solve_ls_basic(const Eigen::MatrixXd& a,
                               const Eigen::VectorXd& b);

}  // namespace genpath
