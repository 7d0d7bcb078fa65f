#include "genpath/givens_qr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace genpath {

namespace {

// Largest |entry|, safe on empty blocks.
double max_abs(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().maxCoeff();
}

}  // namespace

GivensRotation givens_for(double a, double b, Eigen::Index i, Eigen::Index j) {
  if (a == 0.0 && b == 0.0)
    throw std::invalid_argument("givens_for: (0, 0) has no defined rotation");
  const double r = std::hypot(a, b);
  return GivensRotation{i, j, a / r, -b / r};
}

GivensRotation givens_zero_first(double a, double b, Eigen::Index i,
                                 Eigen::Index j) {
  if (a == 0.0 && b == 0.0)
    throw std::invalid_argument(
        "givens_zero_first: (0, 0) has no defined rotation");
  const double r = std::hypot(a, b);
  return GivensRotation{i, j, b / r, a / r};
}

void rotate_t(const GivensRotation& g, Eigen::VectorXd& x) {
  const double xi = x[g.i], xj = x[g.j];
  x[g.i] = g.c * xi - g.s * xj;
  x[g.j] = g.s * xi + g.c * xj;
}

void rotate(const GivensRotation& g, Eigen::VectorXd& x) {
  const double xi = x[g.i], xj = x[g.j];
  x[g.i] = g.c * xi + g.s * xj;
  x[g.j] = -g.s * xi + g.c * xj;
}

void apply_left(const GivensRotation& g, Eigen::MatrixXd& m) {
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    const double a = m(g.i, col), b = m(g.j, col);
    m(g.i, col) = g.c * a - g.s * b;
    m(g.j, col) = g.s * a + g.c * b;
  }
}

void apply_right(Eigen::MatrixXd& m, const GivensRotation& g) {
  for (Eigen::Index row = 0; row < m.rows(); ++row) {
    const double a = m(row, g.i), b = m(row, g.j);
    m(row, g.i) = g.c * a - g.s * b;
    m(row, g.j) = g.s * a + g.c * b;
  }
}

double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double max_abs) {
  return 1e-11 * static_cast<double>(std::max(rows, cols)) * max_abs;
}

// ---------------------------------------------------------------------------
// QRFactor: full column rank.
// ---------------------------------------------------------------------------

double QRFactor::tol() const { return rank_tolerance(rows(), n_, scale_); }

QRFactor QRFactor::compute(const Eigen::MatrixXd& a) {
  const Eigen::Index m = a.rows(), n = a.cols();
  if (m < n)
    throw std::invalid_argument("QRFactor: need rows >= cols");
  QRFactor f;
  f.q_ = Eigen::MatrixXd::Identity(m, m);
  f.r_ = a;
  f.n_ = n;
  f.scale_ = max_abs(a);
  for (Eigen::Index col = 0; col < n; ++col) {
    for (Eigen::Index row = m - 1; row > col; --row) {
      if (f.r_(row, col) == 0.0) continue;
      GivensRotation g = givens_for(f.r_(col, col), f.r_(row, col), col, row);
      apply_left(g, f.r_);
      f.r_(row, col) = 0.0;
      apply_right(f.q_, g);
    }
    if (std::abs(f.r_(col, col)) <= f.tol())
      throw RankDeficientError("QRFactor: rank-deficient at column " +
                               std::to_string(col));
  }
  return f;
}

Eigen::VectorXd QRFactor::solve_ls(const Eigen::VectorXd& b) const {
  if (b.size() != rows())
    throw std::invalid_argument("QRFactor::solve_ls: bad length");
  Eigen::VectorXd c = q_.leftCols(n_).transpose() * b;
  for (Eigen::Index row = n_ - 1; row >= 0; --row) {
    for (Eigen::Index col = row + 1; col < n_; ++col)
      c[row] -= r_(row, col) * c[col];
    c[row] /= r_(row, row);
  }
  return c;
}

void QRFactor::add_row(const Eigen::VectorXd& w, Eigen::Index at) {
  const Eigen::Index m = rows();
  if (w.size() != n_ || at < 0 || at > m)
    throw std::invalid_argument("QRFactor::add_row: bad arguments");
  scale_ = std::max(scale_, max_abs(w));

  // Q grows by the unit row/column for w; w itself lands in row 0 of R.
  Eigen::MatrixXd q2 = Eigen::MatrixXd::Zero(m + 1, m + 1);
  q2.block(0, 1, at, m) = q_.topRows(at);
  q2(at, 0) = 1.0;
  q2.block(at + 1, 1, m - at, m) = q_.bottomRows(m - at);
  Eigen::MatrixXd r2(m + 1, n_);
  r2.row(0) = w.transpose();
  r2.bottomRows(m) = r_;

  // Walk the spike down the diagonal: rotation t zeroes entry (t, t-1).
  for (Eigen::Index t = 1; t <= n_; ++t) {
    if (r2(t, t - 1) == 0.0) continue;
    GivensRotation g =
        givens_for(r2(t - 1, t - 1), r2(t, t - 1), t - 1, t);
    apply_left(g, r2);
    r2(t, t - 1) = 0.0;
    apply_right(q2, g);
  }
  q_ = std::move(q2);
  r_ = std::move(r2);
}

void QRFactor::remove_row(Eigen::Index at) {
  const Eigen::Index m = rows();
  if (at < 0 || at >= m || m - 1 < n_)
    throw std::invalid_argument("QRFactor::remove_row: bad arguments");

  // Rotate row `at` of Q onto +-e_1; R rows mix along the way, leaving the
  // removed row's content on top of a fresh triangle.
  Eigen::VectorXd qrow = q_.row(at).transpose();
  for (Eigen::Index t = m - 2; t >= 0; --t) {
    if (qrow[t + 1] == 0.0) continue;
    GivensRotation g = givens_for(qrow[t], qrow[t + 1], t, t + 1);
    rotate_t(g, qrow);
    qrow[t + 1] = 0.0;
    apply_right(q_, g);
    if (t <= n_ - 1) apply_left(g, r_);
  }
  if (std::abs(std::abs(qrow[0]) - 1.0) > 1e-8)
    throw ContractViolation("QRFactor::remove_row: lost orthogonality");

  Eigen::MatrixXd q2(m - 1, m - 1);
  q2.topRows(at) = q_.block(0, 1, at, m - 1);
  q2.bottomRows(m - 1 - at) = q_.block(at + 1, 1, m - 1 - at, m - 1);
  Eigen::MatrixXd r2 = r_.bottomRows(m - 1);
  q_ = std::move(q2);
  r_ = std::move(r2);
  for (Eigen::Index col = 0; col < n_; ++col)
    if (std::abs(r_(col, col)) <= tol())
      throw RankDeficientError("QRFactor::remove_row: rank lost");
}

void QRFactor::add_col(const Eigen::VectorXd& w, Eigen::Index at) {
  const Eigen::Index m = rows();
  if (w.size() != m || at < 0 || at > n_ || m < n_ + 1)
    throw std::invalid_argument("QRFactor::add_col: bad arguments");
  scale_ = std::max(scale_, max_abs(w));

  Eigen::MatrixXd r2(m, n_ + 1);
  r2.leftCols(at) = r_.leftCols(at);
  r2.col(at) = q_.transpose() * w;
  r2.rightCols(n_ - at) = r_.rightCols(n_ - at);

  // Clear the inserted column below its diagonal with adjacent-row
  // rotations, bottom up.
  for (Eigen::Index row = m - 1; row > at; --row) {
    if (r2(row, at) == 0.0) continue;
    GivensRotation g = givens_for(r2(row - 1, at), r2(row, at), row - 1, row);
    apply_left(g, r2);
    r2(row, at) = 0.0;
    apply_right(q_, g);
  }
  r_ = std::move(r2);
  n_ += 1;
  for (Eigen::Index col = at; col < n_; ++col)
    if (std::abs(r_(col, col)) <= tol())
      throw RankDeficientError("QRFactor::add_col: new column is dependent");
}

void QRFactor::remove_col(Eigen::Index at) {
  const Eigen::Index m = rows();
  if (at < 0 || at >= n_)
    throw std::invalid_argument("QRFactor::remove_col: bad arguments");

  Eigen::MatrixXd r2(m, n_ - 1);
  r2.leftCols(at) = r_.leftCols(at);
  r2.rightCols(n_ - 1 - at) = r_.rightCols(n_ - 1 - at);
  n_ -= 1;
  // Columns past `at` slid left; chase the subdiagonal back out.
  for (Eigen::Index col = at; col < n_; ++col) {
    if (r2(col + 1, col) == 0.0) continue;
    GivensRotation g =
        givens_for(r2(col, col), r2(col + 1, col), col, col + 1);
    apply_left(g, r2);
    r2(col + 1, col) = 0.0;
    apply_right(q_, g);
  }
  r_ = std::move(r2);
}

Eigen::MatrixXd QRFactor::reconstruct() const { return q_ * r_; }

// ---------------------------------------------------------------------------
// RotatedQRFactor: arbitrary rank with updates.
// ---------------------------------------------------------------------------

double RotatedQRFactor::tol() const {
  return rank_tolerance(rows(), n_, scale_);
}

void RotatedQRFactor::apply_g(Eigen::VectorXd& v) const {
  for (auto it = gseq_.rbegin(); it != gseq_.rend(); ++it) rotate(*it, v);
}

void RotatedQRFactor::apply_gt(Eigen::VectorXd& v) const {
  for (const auto& g : gseq_) rotate_t(g, v);
}

RotatedQRFactor RotatedQRFactor::compute(const Eigen::MatrixXd& a,
                                         bool transposed) {
  const Eigen::Index m = a.rows(), n = a.cols();
  RotatedQRFactor f;
  f.q_ = Eigen::MatrixXd::Identity(m, m);
  f.r_ = a;
  f.n_ = n;
  f.transposed_ = transposed;
  f.scale_ = max_abs(a);
  f.piv_.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) f.piv_[t] = t;

  // Column-pivoted elimination; stop once every remaining column is inside
  // the rank tolerance.
  Eigen::Index k = 0;
  const Eigen::Index steps = std::min(m, n);
  for (Eigen::Index t = 0; t < steps; ++t) {
    Eigen::Index best = t;
    double best_norm = -1.0;
    for (Eigen::Index col = t; col < n; ++col) {
      const double nrm = f.r_.col(col).tail(m - t).norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = col;
      }
    }
    if (best_norm <= f.tol()) break;
    if (best != t) {
      f.r_.col(t).swap(f.r_.col(best));
      std::swap(f.piv_[t], f.piv_[best]);
    }
    for (Eigen::Index row = m - 1; row > t; --row) {
      if (f.r_(row, t) == 0.0) continue;
      GivensRotation g = givens_for(f.r_(t, t), f.r_(row, t), t, row);
      apply_left(g, f.r_);
      f.r_(row, t) = 0.0;
      apply_right(f.q_, g);
    }
    k = t + 1;
  }
  f.k_ = k;
  if (k < m) f.r_.bottomRows(m - k).setZero();

  // Push [R1 R2] into the last k columns with right-hand rotations, bottom
  // row first so finished rows are untouched by later sweeps.
  for (Eigen::Index row = k - 1; row >= 0; --row) {
    const Eigen::Index target = n - k + row;
    for (Eigen::Index col = row; col < target; ++col) {
      if (f.r_(row, col) == 0.0) continue;
      GivensRotation g =
          givens_zero_first(f.r_(row, col), f.r_(row, target), col, target);
      apply_right(f.r_, g);
      f.r_(row, col) = 0.0;
      f.gseq_.push_back(g);
    }
  }
  return f;
}

Eigen::VectorXd RotatedQRFactor::solve_minnorm(const Eigen::VectorXd& b) const {
  const Eigen::Index m = rows();
  if (!transposed_) {
    // min ||b - A x||: back-solve R1 z2 = (Q^T b)_1..k, x = P G (0, z2).
    if (b.size() != m)
      throw std::invalid_argument("solve_minnorm: bad length");
    Eigen::VectorXd c = q_.leftCols(k_).transpose() * b;
    for (Eigen::Index row = k_ - 1; row >= 0; --row) {
      for (Eigen::Index col = row + 1; col < k_; ++col)
        c[row] -= r_(row, n_ - k_ + col) * c[col];
      c[row] /= r_(row, n_ - k_ + row);
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_);
    z.tail(k_) = c;
    apply_g(z);
    Eigen::VectorXd x(n_);
    for (Eigen::Index t = 0; t < n_; ++t) x[piv_[t]] = z[t];
    return x;
  }
  // min ||b - A^T y|| for the stored A: forward-solve through R1^T using the
  // last k components of G^T P^T b, then y = Q (z1, 0).
  if (b.size() != n_)
    throw std::invalid_argument("solve_minnorm: bad length (transposed)");
  Eigen::VectorXd c(n_);
  for (Eigen::Index t = 0; t < n_; ++t) c[t] = b[piv_[t]];
  apply_gt(c);
  Eigen::VectorXd z1(k_);
  for (Eigen::Index row = 0; row < k_; ++row) {
    double v = c[n_ - k_ + row];
    for (Eigen::Index t = 0; t < row; ++t)
      v -= r_(t, n_ - k_ + row) * z1[t];
    z1[row] = v / r_(row, n_ - k_ + row);
  }
  return q_.leftCols(k_) * z1;
}

void RotatedQRFactor::add_row(const Eigen::VectorXd& w, Eigen::Index at) {
  const Eigen::Index m = rows();
  if (w.size() != n_ || at < 0 || at > m)
    throw std::invalid_argument("RotatedQRFactor::add_row: bad arguments");
  scale_ = std::max(scale_, max_abs(w));

  Eigen::VectorXd d(n_);
  for (Eigen::Index t = 0; t < n_; ++t) d[t] = w[piv_[t]];
  apply_gt(d);

  Eigen::MatrixXd q2 = Eigen::MatrixXd::Zero(m + 1, m + 1);
  q2.block(0, 1, at, m) = q_.topRows(at);
  q2(at, 0) = 1.0;
  q2.block(at + 1, 1, m - at, m) = q_.bottomRows(m - at);
  Eigen::MatrixXd r2(m + 1, n_);
  r2.row(0) = d.transpose();
  r2.bottomRows(m) = r_;
  q_ = std::move(q2);
  r_ = std::move(r2);

  const bool rank_grows =
      k_ < n_ && r_.row(0).head(n_ - k_).cwiseAbs().maxCoeff() > tol();
  if (!rank_grows) {
    // Leading block of the new row is noise; flush it and fold the tail into
    // R1 with left rotations (same diagonal walk as the full-rank case).
    r_.row(0).head(n_ - k_).setZero();
    for (Eigen::Index t = 1; t <= k_; ++t) {
      const Eigen::Index col = n_ - k_ + t - 1;
      if (r_(t, col) == 0.0) continue;
      GivensRotation g = givens_for(r_(t - 1, col), r_(t, col), t - 1, t);
      apply_left(g, r_);
      r_(t, col) = 0.0;
      apply_right(q_, g);
    }
    return;
  }
  // Rank goes up: sweep the leading block of the new row into its last slot
  // with right rotations; those columns are zero in every other row, so the
  // triangle is untouched and simply grows by the new head.
  const Eigen::Index head = n_ - k_ - 1;
  for (Eigen::Index col = 0; col < head; ++col) {
    if (r_(0, col) == 0.0) continue;
    GivensRotation g =
        givens_zero_first(r_(0, col), r_(0, head), col, head);
    apply_right(r_, g);
    r_(0, col) = 0.0;
    gseq_.push_back(g);
  }
  k_ += 1;
}

void RotatedQRFactor::remove_row(Eigen::Index at) {
  const Eigen::Index m = rows();
  if (at < 0 || at >= m)
    throw std::invalid_argument("RotatedQRFactor::remove_row: bad arguments");

  Eigen::VectorXd qrow = q_.row(at).transpose();
  for (Eigen::Index t = m - 2; t >= 0; --t) {
    if (qrow[t + 1] == 0.0) continue;
    GivensRotation g = givens_for(qrow[t], qrow[t + 1], t, t + 1);
    rotate_t(g, qrow);
    qrow[t + 1] = 0.0;
    apply_right(q_, g);
    if (t <= k_ - 1) apply_left(g, r_);
  }
  if (m > 0 && std::abs(std::abs(qrow[0]) - 1.0) > 1e-8)
    throw ContractViolation("RotatedQRFactor::remove_row: lost orthogonality");

  Eigen::MatrixXd q2(m - 1, m - 1);
  q2.topRows(at) = q_.block(0, 1, at, m - 1);
  q2.bottomRows(m - 1 - at) = q_.block(at + 1, 1, m - 1 - at, m - 1);
  Eigen::MatrixXd r2 = r_.bottomRows(m - 1);
  q_ = std::move(q2);
  r_ = std::move(r2);

  if (k_ > rows()) {
    // The factor had full row rank, so the removal necessarily costs one:
    // what is left is a trapezoid whose rows lead one column left of the
    // (k-1)-sized canonical spot. Shift each row right, bottom up.
    for (Eigen::Index t = rows() - 1; t >= 0; --t) {
      const Eigen::Index col = n_ - k_ + t;
      if (r_(t, col) == 0.0) continue;
      GivensRotation g =
          givens_zero_first(r_(t, col), r_(t, col + 1), col, col + 1);
      apply_right(r_, g);
      r_(t, col) = 0.0;
      gseq_.push_back(g);
    }
    k_ -= 1;
  }
  repair_rank_drops();
}

void RotatedQRFactor::repair_rank_drops() {
  // A removal can leave a zero on the diagonal of R1. Close the triangle
  // below the hole with row rotations, then shift the rows above it one
  // column right; those column rotations join the logged sequence.
  while (k_ > 0) {
    Eigen::Index hole = -1;
    for (Eigen::Index t = 0; t < k_; ++t) {
      if (std::abs(r_(t, n_ - k_ + t)) <= tol()) {
        hole = t;
        break;
      }
    }
    if (hole < 0) return;
    r_(hole, n_ - k_ + hole) = 0.0;
    for (Eigen::Index j = hole + 1; j < k_; ++j) {
      const Eigen::Index col = n_ - k_ + j;
      if (r_(j, col) == 0.0) continue;
      GivensRotation g = givens_for(r_(j - 1, col), r_(j, col), j - 1, j);
      apply_left(g, r_);
      r_(j, col) = 0.0;
      apply_right(q_, g);
    }
    for (Eigen::Index j = hole - 1; j >= 0; --j) {
      const Eigen::Index col = n_ - k_ + j;
      if (r_(j, col) == 0.0) continue;
      GivensRotation g =
          givens_zero_first(r_(j, col), r_(j, col + 1), col, col + 1);
      apply_right(r_, g);
      r_(j, col) = 0.0;
      gseq_.push_back(g);
    }
    k_ -= 1;
  }
}

void RotatedQRFactor::add_col_of_original(const Eigen::VectorXd& w,
                                          Eigen::Index at) {
  if (!transposed_)
    throw ContractViolation(
        "add_col_of_original: factor does not represent a transpose");
  add_row(w, at);
}

void RotatedQRFactor::remove_col_of_original(Eigen::Index at) {
  if (!transposed_)
    throw ContractViolation(
        "remove_col_of_original: factor does not represent a transpose");
  remove_row(at);
}

Eigen::MatrixXd RotatedQRFactor::reconstruct() const {
  Eigen::MatrixXd a = q_ * r_;
  // Undo the right-hand rotations (apply G^T to columns) and the pivoting.
  for (auto it = gseq_.rbegin(); it != gseq_.rend(); ++it) {
    const GivensRotation& g = *it;
    for (Eigen::Index row = 0; row < a.rows(); ++row) {
      const double x = a(row, g.i), y = a(row, g.j);
      a(row, g.i) = g.c * x + g.s * y;
      a(row, g.j) = -g.s * x + g.c * y;
    }
  }
  Eigen::MatrixXd out(a.rows(), n_);
  for (Eigen::Index t = 0; t < n_; ++t) out.col(piv_[t]) = a.col(t);
  return out;
}

Eigen::VectorXd solve_ls_basic(const Eigen::MatrixXd& a,
                               const Eigen::VectorXd& b) {
  const Eigen::Index m = a.rows(), n = a.cols();
  if (b.size() != m)
    throw std::invalid_argument("solve_ls_basic: bad length");
  Eigen::MatrixXd r = a;
  Eigen::VectorXd c = b;
  std::vector<Eigen::Index> piv(n);
  for (Eigen::Index t = 0; t < n; ++t) piv[t] = t;
  const double tol = rank_tolerance(m, n, r.size() ? r.cwiseAbs().maxCoeff() : 0.0);

  Eigen::Index k = 0;
  for (Eigen::Index t = 0; t < std::min(m, n); ++t) {
    Eigen::Index best = t;
    double best_norm = -1.0;
    for (Eigen::Index col = t; col < n; ++col) {
      const double nrm = r.col(col).tail(m - t).norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = col;
      }
    }
    if (best_norm <= tol) break;
    if (best != t) {
      r.col(t).swap(r.col(best));
      std::swap(piv[t], piv[best]);
    }
    for (Eigen::Index row = m - 1; row > t; --row) {
      if (r(row, t) == 0.0) continue;
      GivensRotation g = givens_for(r(t, t), r(row, t), t, row);
      apply_left(g, r);
      r(row, t) = 0.0;
      rotate_t(g, c);
    }
    k = t + 1;
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  for (Eigen::Index row = k - 1; row >= 0; --row) {
    double v = c[row];
    for (Eigen::Index col = row + 1; col < k; ++col) v -= r(row, col) * z[col];
    z[row] = v / r(row, row);
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) x[piv[t]] = z[t];
  return x;
}

}  // namespace genpath
