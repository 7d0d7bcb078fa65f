#include "genpath/tf_backend.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "genpath/operators.hpp"
#include "genpath/warnings.hpp"

namespace genpath {

std::pair<double, double> band_cholesky_in_place(Eigen::Ref<Eigen::MatrixXd> band,
                                                 Eigen::Index n,
                                                 Eigen::Index bw) {
  double lo = 0.0, hi = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index dmax = std::min(bw, n - 1 - j);
    for (Eigen::Index d = 0; d <= dmax; ++d) {
      const Eigen::Index i = j + d;
      double sum = band(d, j);
      const Eigen::Index cmin = std::max<Eigen::Index>(0, i - bw);
      for (Eigen::Index c = cmin; c < j; ++c)
        sum -= band(i - c, c) * band(j - c, c);
      if (d == 0) {
        if (!(sum > 0.0))
          throw NumericalError("band Cholesky: non-positive pivot at " +
                               std::to_string(j));
        const double piv = std::sqrt(sum);
        band(0, j) = piv;
        if (j == 0) {
          lo = hi = piv;
        } else {
          lo = std::min(lo, piv);
          hi = std::max(hi, piv);
        }
      } else {
        band(d, j) = sum / band(0, j);
      }
    }
  }
  return {lo, hi};
}

void band_solve_in_place(const Eigen::Ref<const Eigen::MatrixXd>& band,
                         Eigen::Index n, Eigen::Index bw,
                         Eigen::Ref<Eigen::VectorXd> x) {
  for (Eigen::Index j = 0; j < n; ++j) {
    double v = x[j];
    const Eigen::Index dmax = std::min(bw, j);
    for (Eigen::Index d = 1; d <= dmax; ++d) v -= band(d, j - d) * x[j - d];
    x[j] = v / band(0, j);
  }
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    double v = x[j];
    const Eigen::Index dmax = std::min(bw, n - 1 - j);
    for (Eigen::Index d = 1; d <= dmax; ++d) v -= band(d, j) * x[j + d];
    x[j] = v / band(0, j);
  }
}

TrendFilterOracle::TrendFilterOracle(Eigen::Index p, int order)
    : p_(p), order_(order) {
  if (p < 1) throw InputError("need at least one coefficient");
  if (order < 0) throw InputError("difference order must be >= 0");
  m_ = std::max<Eigen::Index>(p - order - 1, 0);
  bw_ = order + 1;

  const SparseRowMat d = build_diff_operator(order, std::max<Eigen::Index>(p, order + 2));
  coef_.assign(order + 2, 0.0);
  for (SparseRowMat::InnerIterator it(d, 0); it; ++it) coef_[it.col()] = it.value();

  gram_.assign(bw_ + 1, 0.0);
  for (Eigen::Index delta = 0; delta <= bw_; ++delta)
    for (std::size_t t = 0; t + delta < coef_.size(); ++t)
      gram_[delta] += coef_[t + delta] * coef_[t];

  boundary_.assign(static_cast<std::size_t>(m_), 0);
  interior_.reserve(static_cast<std::size_t>(m_));
  band_.resize(bw_ + 1, std::max<Eigen::Index>(m_, 1));
  rhs_.resize(std::max<Eigen::Index>(m_, 1));
}

void TrendFilterOracle::boundary_add(Eigen::Index row) {
  if (row < 0 || row >= m_) throw InputError("boundary row out of range");
  if (boundary_[static_cast<std::size_t>(row)])
    throw ContractViolation("row already on the boundary");
  boundary_[static_cast<std::size_t>(row)] = 1;
  ++nb_;
  dirty_ = true;
}

void TrendFilterOracle::boundary_remove(Eigen::Index row) {
  if (row < 0 || row >= m_) throw InputError("boundary row out of range");
  if (!boundary_[static_cast<std::size_t>(row)])
    throw ContractViolation("row is not on the boundary");
  boundary_[static_cast<std::size_t>(row)] = 0;
  --nb_;
  dirty_ = true;
}

Eigen::Index TrendFilterOracle::nullity() const { return p_ - interior_size(); }

void TrendFilterOracle::refactor() {
  interior_.clear();
  for (Eigen::Index r = 0; r < m_; ++r)
    if (!boundary_[static_cast<std::size_t>(r)]) interior_.push_back(r);
  const Eigen::Index r = static_cast<Eigen::Index>(interior_.size());
  if (r == 0) {
    dirty_ = false;
    return;
  }
  for (Eigen::Index a = 0; a < r; ++a) {
    for (Eigen::Index d = 0; d <= bw_; ++d) {
      if (a + d >= r) {
        band_(d, a) = 0.0;
        continue;
      }
      const Eigen::Index delta = interior_[a + d] - interior_[a];
      band_(d, a) = delta <= bw_ ? gram_[delta] : 0.0;
    }
  }
  const auto [lo, hi] = band_cholesky_in_place(band_.leftCols(r), r, bw_);
  if (lo > 0.0 && (hi / lo) * (hi / lo) > 1e12)
    emit_warning("difference-penalty Gram is ill-conditioned (diagonal ratio " +
                 std::to_string(hi / lo) + ")");
  dirty_ = false;
}

Eigen::VectorXd TrendFilterOracle::minnorm(const Eigen::VectorXd& c) {
  if (c.size() != p_) throw InputError("minnorm: bad length");
  if (dirty_) refactor();
  const Eigen::Index r = static_cast<Eigen::Index>(interior_.size());
  Eigen::VectorXd x(r);
  if (r == 0) return x;
  for (Eigen::Index a = 0; a < r; ++a) {
    double v = 0.0;
    const Eigen::Index base = interior_[a];
    for (std::size_t t = 0; t < coef_.size(); ++t)
      v += coef_[t] * c[base + static_cast<Eigen::Index>(t)];
    x[a] = v;
  }
  band_solve_in_place(band_.leftCols(r), r, bw_, x);
  return x;
}

}  // namespace genpath
