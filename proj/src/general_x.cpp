#include "genpath/general_x.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <mutex>
#include <optional>
#include <utility>

#include "genpath/errors.hpp"
#include "genpath/graph_backend.hpp"
#include "genpath/tf_backend.hpp"

namespace genpath {

struct DesignMatrix::Cache {
  Eigen::MatrixXd x;
  std::once_flag build;
  std::optional<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr;
  std::atomic<int> factor_builds{0};
  std::atomic<long> full_solves{0};
};

DesignMatrix::DesignMatrix(Eigen::MatrixXd x) : cache_(std::make_shared<Cache>()) {
  if (x.cols() <= 0) throw InputError("design matrix must have at least one column");
  if (x.rows() < x.cols()) {
    throw InputError("design matrix has fewer rows than columns; it cannot have "
                     "full column rank (use ridge_augment)");
  }
  cache_->x = std::move(x);
}

Eigen::Index DesignMatrix::rows() const { return cache_->x.rows(); }
Eigen::Index DesignMatrix::cols() const { return cache_->x.cols(); }
const Eigen::MatrixXd& DesignMatrix::matrix() const { return cache_->x; }
int DesignMatrix::factor_builds() const { return cache_->factor_builds.load(); }
long DesignMatrix::full_solves() const { return cache_->full_solves.load(); }

DesignMatrix::Cache& DesignMatrix::factored() const {
  Cache& c = *cache_;
  std::call_once(c.build, [&c] {
    c.qr.emplace(c.x);
    c.factor_builds.fetch_add(1);
  });
  if (c.qr->rank() < c.x.cols()) {
    throw RankDeficientError(
        "design matrix is rank deficient (column rank " +
        std::to_string(c.qr->rank()) + " of " + std::to_string(c.x.cols()) +
        "); augment it with ridge_augment and rerun");
  }
  return c;
}

Eigen::VectorXd DesignMatrix::pinv_apply(const Eigen::VectorXd& v) const {
  if (v.size() != rows()) throw InputError("pinv_apply: length must match rows");
  Cache& c = factored();
  c.full_solves.fetch_add(1);
  return c.qr->solve(v);
}

Eigen::VectorXd DesignMatrix::normal_solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != cols()) throw InputError("normal_solve: length must match columns");
  Cache& c = factored();
  c.full_solves.fetch_add(1);
  const Eigen::Index p = cols();
  Eigen::VectorXd z = c.qr->colsPermutation().transpose() * rhs;
  const auto r = c.qr->matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  r.transpose().solveInPlace(z);
  r.solveInPlace(z);
  return c.qr->colsPermutation() * z;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> ridge_augment(const Eigen::VectorXd& y,
                                                          const Eigen::MatrixXd& x,
                                                          double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("ridge weight must be positive");
  if (y.size() != x.rows()) throw InputError("ridge_augment: y must match the design rows");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd xa(n + p, p);
  xa.topRows(n) = x;
  xa.bottomRows(p) = std::sqrt(2.0 * eps) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd ya = Eigen::VectorXd::Zero(n + p);
  ya.head(n) = y;
  return {std::move(ya), std::move(xa)};
}

TransformedProblem transform_generic(const Eigen::VectorXd& y, const DesignMatrix& x,
                                     const SparseRowMat& d) {
  if (y.size() != x.rows()) throw InputError("transform_generic: y must match the design rows");
  if (d.cols() != x.cols()) throw InputError("transform_generic: penalty must match the design columns");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index m = d.rows();

  TransformedProblem out;
  out.y = x.matrix() * x.pinv_apply(y);

  // D X^+ row by row: (X^+)^T D^T = Q_1 R^{-T} P^T D^T.
  const auto& qr = *x.factored().qr;
  Eigen::MatrixXd w = qr.colsPermutation().transpose() * Eigen::MatrixXd(d).transpose();
  qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>().transpose().solveInPlace(w);
  Eigen::MatrixXd dt = Eigen::MatrixXd::Zero(n, m);
  dt.topRows(p) = w;
  dt.applyOnTheLeft(qr.householderQ());
  out.d = dt.transpose();

#ifndef NDEBUG
  // X^T (D X^+)^T z = D^T z for full-column-rank X; verify instead of assume.
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  const Eigen::VectorXd lhs = x.matrix().transpose() * (out.d.transpose() * z);
  const Eigen::VectorXd rhs = d.transpose() * z;
  assert((lhs - rhs).cwiseAbs().maxCoeff() <=
         1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()));
#endif
  return out;
}

Eigen::VectorXd project_through_design(const Eigen::VectorXd& c, const DesignMatrix& x,
                                       const Eigen::MatrixXd& h) {
  if (c.size() != x.rows()) throw InputError("project_through_design: length must match rows");
  if (h.rows() != x.cols()) throw InputError("project_through_design: basis must match columns");
  Eigen::VectorXd xtc = x.matrix().transpose() * c;
  if (h.cols() == 0) return xtc;
  const Eigen::MatrixXd xh = x.matrix() * h;
  Eigen::LDLT<Eigen::MatrixXd> gram(xh.transpose() * xh);
  const Eigen::VectorXd dv = gram.vectorD();
  if (!(dv.minCoeff() > 0.0) || dv.minCoeff() <= dv.maxCoeff() * 1e-12) {
    throw ContractViolation("project_through_design: basis columns are dependent "
                            "through the design");
  }
  xtc.noalias() -= x.matrix().transpose() * (xh * gram.solve(xh.transpose() * c));
  return xtc;
}

DesignStepProvider::DesignStepProvider(const Eigen::VectorXd& y, DesignMatrix x,
                                       PenaltySpec spec, LsOracle& oracle)
    : y_(y), x_(std::move(x)), spec_(std::move(spec)), d_(spec_.matrix()), oracle_(&oracle) {
  if (y_.size() != x_.rows()) throw InputError("provider: y must match the design rows");
  if (spec_.p != x_.cols()) throw InputError("provider: penalty must match the design columns");
  xty_ = x_.matrix().transpose() * y_;
  refresh_basis();
}

void DesignStepProvider::refresh_basis() {
  h_ = null_basis(spec_, bdry_);
  if (h_.cols() == 0) {
    xh_.resize(x_.rows(), 0);
    return;
  }
  xh_.noalias() = x_.matrix() * h_;
  gram_.compute(xh_.transpose() * xh_);
  const Eigen::VectorXd dv = gram_.vectorD();
  if (!(dv.minCoeff() > 0.0) || dv.minCoeff() <= dv.maxCoeff() * 1e-12) {
    throw ContractViolation("design matrix is singular on the penalty null space");
  }
}

StepData DesignStepProvider::step(const BoundaryPartition& boundary) {
  const std::vector<Eigen::Index> interior = boundary.interior_rows();
  const std::vector<Eigen::Index> bdry = boundary.boundary_rows();
  const Eigen::Index ni = static_cast<Eigen::Index>(interior.size());
  const Eigen::Index nb = static_cast<Eigen::Index>(bdry.size());
  const Eigen::Index p = d_.cols();

  Eigen::VectorXd t = Eigen::VectorXd::Zero(p);
  for (Eigen::Index row : bdry) {
    const double s = boundary.sign(row);
    for (SparseRowMat::InnerIterator it(d_, row); it; ++it) t[it.col()] += s * it.value();
  }

  Eigen::VectorXd v = xty_;
  Eigen::VectorXd w = t;
  Eigen::VectorXd h_alpha = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd h_abar = Eigen::VectorXd::Zero(p);
  if (h_.cols() > 0) {
    const Eigen::VectorXd alpha = gram_.solve(h_.transpose() * xty_);
    const Eigen::VectorXd abar = gram_.solve(h_.transpose() * t);
    h_alpha.noalias() = h_ * alpha;
    h_abar.noalias() = h_ * abar;
    v.noalias() -= x_.matrix().transpose() * (xh_ * alpha);
    w.noalias() -= x_.matrix().transpose() * (xh_ * abar);
  }

  StepData sd;
  sd.a = oracle_->minnorm(v);
  sd.b = nb == 0 ? Eigen::VectorXd::Zero(ni) : oracle_->minnorm(w);

  // On the segment the primal is H(alpha - lambda*abar), so the boundary
  // sign margins come straight from the basis coordinates.
  sd.c.resize(nb);
  sd.d.resize(nb);
  for (Eigen::Index j = 0; j < nb; ++j) {
    const Eigen::Index row = bdry[static_cast<std::size_t>(j)];
    double cj = 0.0, dj = 0.0;
    for (SparseRowMat::InnerIterator it(d_, row); it; ++it) {
      cj += it.value() * h_alpha[it.col()];
      dj += it.value() * h_abar[it.col()];
    }
    const double s = boundary.sign(row);
    sd.c[j] = s * cj;
    sd.d[j] = s * dj;
  }
  return sd;
}

void DesignStepProvider::apply_hit(Eigen::Index row, int) {
  bdry_.insert(std::lower_bound(bdry_.begin(), bdry_.end(), row), row);
  oracle_->boundary_add(row);
  refresh_basis();
}

void DesignStepProvider::apply_leave(Eigen::Index row) {
  const auto at = std::lower_bound(bdry_.begin(), bdry_.end(), row);
  if (at == bdry_.end() || *at != row)
    throw ContractViolation("leave of a row that is not on the boundary");
  bdry_.erase(at);
  oracle_->boundary_remove(row);
  refresh_basis();
}

namespace {

// The transformed problem lives in R^n where the reduced penalty picks up
// null(X^T) wholesale; report df on the coefficient scale.
class ShiftedNullityProvider : public StepProvider {
 public:
  ShiftedNullityProvider(StepProvider& inner, Eigen::Index shift)
      : inner_(&inner), shift_(shift) {}
  Eigen::Index total_rows() const override { return inner_->total_rows(); }
  StepData step(const BoundaryPartition& boundary) override { return inner_->step(boundary); }
  void apply_hit(Eigen::Index row, int sign) override { inner_->apply_hit(row, sign); }
  void apply_leave(Eigen::Index row) override { inner_->apply_leave(row); }
  Eigen::Index nullity() const override { return inner_->nullity() - shift_; }

 private:
  StepProvider* inner_;
  Eigen::Index shift_;
};

struct PinvPrimalMap : PrimalMap {
  DesignMatrix x;
  explicit PinvPrimalMap(DesignMatrix x_) : x(std::move(x_)) {}
  Eigen::VectorXd primal(const Eigen::VectorXd& y, const SparseRowMat& d,
                         const Eigen::VectorXd& u) const override {
    return x.pinv_apply(y - d.transpose() * u);
  }
};

struct NormalPrimalMap : PrimalMap {
  DesignMatrix x;
  explicit NormalPrimalMap(DesignMatrix x_) : x(std::move(x_)) {}
  Eigen::VectorXd primal(const Eigen::VectorXd& y, const SparseRowMat& d,
                         const Eigen::VectorXd& u) const override {
    return x.normal_solve(x.matrix().transpose() * y - d.transpose() * u);
  }
};

}  // namespace

SolutionPath run_path_design_generic(const Eigen::VectorXd& y, const DesignMatrix& x,
                                     const SparseRowMat& d, const PathOptions& opt) {
  TransformedProblem tp = transform_generic(y, x, d);
  const SparseRowMat dt = tp.d.sparseView();
  GenericOracle oracle(dt);
  OracleStepProvider inner(tp.y, dt, oracle);
  ShiftedNullityProvider provider(inner, x.rows() - x.cols());
  return run_path_with_provider(provider, tp.y, dt,
                                std::make_shared<PinvPrimalMap>(x), opt);
}

SolutionPath run_path_design(const Eigen::VectorXd& y, const DesignMatrix& x,
                             const PenaltySpec& spec, const PathOptions& opt) {
  if (spec.p != x.cols()) throw InputError("penalty must match the design columns");
  switch (spec.kind) {
    case PenaltyKind::TrendFilter: {
      TrendFilterOracle oracle(spec.p, spec.order);
      DesignStepProvider provider(y, x, spec, oracle);
      return run_path_with_provider(provider, y, spec.matrix(),
                                    std::make_shared<NormalPrimalMap>(x), opt);
    }
    case PenaltyKind::FusedGraph:
    case PenaltyKind::SparseFusedGraph: {
      GraphOracle oracle(spec);
      DesignStepProvider provider(y, x, spec, oracle);
      return run_path_with_provider(provider, y, spec.matrix(),
                                    std::make_shared<NormalPrimalMap>(x), opt);
    }
    case PenaltyKind::Custom:
      break;
  }
  return run_path_design_generic(y, x, spec.matrix(), opt);
}

}  // namespace genpath
