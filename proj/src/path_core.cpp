#include "genpath/path_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "genpath/errors.hpp"
#include "genpath/graph_backend.hpp"
#include "genpath/tf_backend.hpp"

namespace genpath {

namespace {

constexpr double kTieRel = 1e-12;

// Width of the band (relative to lambda) in which an event candidate is
// treated as a boundary tangency rather than a genuine crossing. Tangency
// candidates are exact ratios of two correlated least-squares outputs, so
// their error is far above machine epsilon on ill-conditioned penalties
// (observed ~1e-11 for cubic trend filtering) but nowhere near the spacing
// of distinct events.
constexpr double kTangencyRel = 1e-8;

// When a boundary row is a linear combination of the interior rows (cycles
// in a fused graph, edge rows bracketed by interior pure-sparsity rows), its
// sign margin is identically zero along the segment: both leave quantities
// are pure solve roundoff and their ratio is meaningless. A candidate is
// dropped when numerator and denominator both sit below this floor, scaled
// to the natural size of each quantity.
constexpr double kLeaveNoiseRel = 1e-10;

std::string format_lambda(double lambda) {
  std::ostringstream os;
  os.precision(17);
  os << lambda;
  return os.str();
}

}  // namespace

const char* to_string(PathEventKind kind) {
  switch (kind) {
    case PathEventKind::Hit:
      return "hit";
    case PathEventKind::Leave:
      return "leave";
    case PathEventKind::Terminal:
      return "end";
  }
  return "?";
}

const char* to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::LambdaZero:
      return "lambda_zero";
    case TerminationReason::MaxSteps:
      return "max_steps";
    case TerminationReason::MinLambda:
      return "min_lambda";
    case TerminationReason::MaxDf:
      return "max_df";
    case TerminationReason::Aborted:
      return "aborted";
  }
  return "?";
}

SolutionPath::SolutionPath(PathData data) : data_(std::move(data)) {}

std::size_t SolutionPath::segment_index(double lambda) const {
  if (!data_.has_segments) {
    throw ContractViolation("solution path was recorded without segments");
  }
  if (std::isnan(lambda) || lambda < 0.0) {
    throw InputError("lambda must be nonnegative");
  }
  if (data_.segments.empty() || lambda < data_.lambda_min) {
    throw RangeError("path not computed below lambda = " + format_lambda(data_.lambda_min));
  }
  const auto it = std::partition_point(
      data_.segments.begin(), data_.segments.end(),
      [lambda](const DualSegment& seg) { return seg.lambda_lo > lambda; });
  if (it == data_.segments.end()) {
    throw ContractViolation("segment lookup fell off the recorded path");
  }
  return static_cast<std::size_t>(it - data_.segments.begin());
}

Eigen::VectorXd SolutionPath::dual_at(double lambda) const {
  const DualSegment& seg = data_.segments[segment_index(lambda)];
  if (std::isinf(lambda)) return seg.a;  // b is identically zero before the first knot
  return seg.a - lambda * seg.b;
}

Eigen::Index SolutionPath::df_at(double lambda) const {
  return data_.segments[segment_index(lambda)].df;
}

Eigen::VectorXd SolutionPath::primal_at(double lambda) const {
  const Eigen::VectorXd u = dual_at(lambda);
  if (data_.primal_map) return data_.primal_map->primal(data_.y, data_.d, u);
  return data_.y - data_.d.transpose() * u;
}

OracleStepProvider::OracleStepProvider(const Eigen::VectorXd& y, const SparseRowMat& d,
                                       LsOracle& oracle)
    : y_(y), d_(d), oracle_(&oracle) {
  if (y_.size() != d_.cols()) {
    throw InputError("data length must match the penalty's column count");
  }
}

StepData OracleStepProvider::step(const BoundaryPartition& boundary) {
  const std::vector<Eigen::Index> interior = boundary.interior_rows();
  const std::vector<Eigen::Index> bdry = boundary.boundary_rows();
  const Eigen::VectorXd s = boundary.boundary_signs();
  const Eigen::Index ni = static_cast<Eigen::Index>(interior.size());
  const Eigen::Index nb = static_cast<Eigen::Index>(bdry.size());

  StepData out;
  out.a = oracle_->minnorm(y_);

  Eigen::VectorXd t = Eigen::VectorXd::Zero(d_.cols());
  for (Eigen::Index j = 0; j < nb; ++j) {
    for (SparseRowMat::InnerIterator it(d_, bdry[j]); it; ++it) {
      t[it.col()] += s[j] * it.value();
    }
  }
  out.b = nb == 0 ? Eigen::VectorXd::Zero(ni) : oracle_->minnorm(t);

  Eigen::VectorXd ra = y_;
  Eigen::VectorXd rb = t;
  for (Eigen::Index k = 0; k < ni; ++k) {
    const double ak = out.a[k];
    const double bk = out.b[k];
    if (ak == 0.0 && bk == 0.0) continue;
    for (SparseRowMat::InnerIterator it(d_, interior[k]); it; ++it) {
      ra[it.col()] -= ak * it.value();
      rb[it.col()] -= bk * it.value();
    }
  }

  out.c.resize(nb);
  out.d.resize(nb);
  for (Eigen::Index j = 0; j < nb; ++j) {
    double cj = 0.0;
    double dj = 0.0;
    for (SparseRowMat::InnerIterator it(d_, bdry[j]); it; ++it) {
      cj += it.value() * ra[it.col()];
      dj += it.value() * rb[it.col()];
    }
    out.c[j] = s[j] * cj;
    out.d[j] = s[j] * dj;
  }
  return out;
}

void OracleStepProvider::apply_hit(Eigen::Index row, int) { oracle_->boundary_add(row); }

void OracleStepProvider::apply_leave(Eigen::Index row) { oracle_->boundary_remove(row); }

GenericOracle::GenericOracle(SparseRowMat d) : d_(std::move(d)), boundary_(d_.rows()) {
  if (d_.cols() <= 0) throw InputError("penalty must have at least one column");
  d_.makeCompressed();
  if (d_.rows() <= d_.cols()) {
    try {
      wide_ = QRFactor::compute(Eigen::MatrixXd(d_).transpose());
      return;
    } catch (const RankDeficientError&) {
      wide_.reset();
    }
  }
  go_tall();
}

GenericOracle::GenericOracle(const PenaltySpec& spec) : GenericOracle(spec.matrix()) {}

Eigen::VectorXd GenericOracle::dense_row(Eigen::Index row) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d_.cols());
  for (SparseRowMat::InnerIterator it(d_, row); it; ++it) w[it.col()] = it.value();
  return w;
}

Eigen::MatrixXd GenericOracle::interior_matrix() const {
  const std::vector<Eigen::Index> interior = boundary_.interior_rows();
  Eigen::MatrixXd di =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(interior.size()), d_.cols());
  for (std::size_t k = 0; k < interior.size(); ++k) {
    for (SparseRowMat::InnerIterator it(d_, interior[k]); it; ++it) {
      di(static_cast<Eigen::Index>(k), it.col()) = it.value();
    }
  }
  return di;
}

void GenericOracle::go_tall() {
  tall_ = RotatedQRFactor::compute(interior_matrix(), /*transposed=*/true);
  wide_.reset();
}

void GenericOracle::boundary_add(Eigen::Index row) {
  const Eigen::Index pos = boundary_.interior_position(row);
  boundary_.add(row, 1.0);
  if (wide_) {
    wide_->remove_col(pos);
    return;
  }
  try {
    tall_->remove_row(pos);
  } catch (const ContractViolation&) {
    tall_ = RotatedQRFactor::compute(interior_matrix(), /*transposed=*/true);
  }
}

void GenericOracle::boundary_remove(Eigen::Index row) {
  boundary_.remove(row);
  const Eigen::Index pos = boundary_.interior_position(row);
  const Eigen::VectorXd w = dense_row(row);
  if (wide_) {
    try {
      wide_->add_col(w, pos);
      return;
    } catch (const RankDeficientError&) {
      go_tall();
      return;
    }
  }
  tall_->add_row(w, pos);
}

Eigen::VectorXd GenericOracle::minnorm(const Eigen::VectorXd& c) {
  if (c.size() != d_.cols()) throw InputError("right-hand side has the wrong length");
  if (wide_) return wide_->solve_ls(c);
  return tall_->solve_minnorm(c);
}

Eigen::Index GenericOracle::nullity() const {
  if (wide_) return d_.cols() - wide_->cols();
  return d_.cols() - tall_->rank();
}

SolutionPath run_path_with_provider(StepProvider& provider, const Eigen::VectorXd& y,
                                    const SparseRowMat& d,
                                    std::shared_ptr<const PrimalMap> primal_map,
                                    const PathOptions& opt) {
  const Eigen::Index m = provider.total_rows();
  if (d.rows() != m) throw InputError("penalty row count does not match the provider");
  const StopRules& stop = opt.stop;
  if (stop.max_steps <= 0) throw InputError("max_steps must be positive");
  if (!(stop.min_lambda >= 0.0) || !std::isfinite(stop.min_lambda)) {
    throw InputError("min_lambda must be finite and nonnegative");
  }
  const Eigen::Index max_df = stop.max_df <= 0 ? d.cols() : stop.max_df;

  PathData out;
  out.y = y;
  out.d = d;
  out.d.makeCompressed();
  out.primal_map = std::move(primal_map);
  out.has_segments = opt.record_segments;

  // Scales for the leave-noise floor: c is of size row(D) * y, d of size
  // row(D) * sum of penalty rows.
  Eigen::VectorXd row_norm1 = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd col_sums = Eigen::VectorXd::Zero(d.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    for (SparseRowMat::InnerIterator it(out.d, r); it; ++it) {
      row_norm1[r] += std::abs(it.value());
      col_sums[it.col()] += std::abs(it.value());
    }
  }
  const double col_norm1 = d.cols() > 0 ? col_sums.maxCoeff() : 0.0;
  const double y_inf = y.size() > 0 ? y.cwiseAbs().maxCoeff() : 0.0;

  BoundaryPartition bp(m);
  double lambda_prev = std::numeric_limits<double>::infinity();

  // Rows that left the boundary at (numerically) the current lambda. By
  // continuity such a row's hit candidate re-computes to that same lambda
  // even though its dual coordinate moves strictly inside below it, so the
  // candidate must be ignored until the path drops out of the tangency band.
  std::vector<char> blocked(static_cast<std::size_t>(m), 0);
  bool any_blocked = false;
  double blocked_lambda = std::numeric_limits<double>::infinity();

  for (;;) {
    StepData sd;
    Eigen::Index df_now = 0;
    try {
      sd = provider.step(bp);
      df_now = provider.nullity();
    } catch (const NumericalError& err) {
      out.termination = TerminationReason::Aborted;
      out.failure = "numerical failure after " + std::to_string(out.knots.size()) +
                    " events: " + err.what();
      break;
    }
    if (out.knots.empty()) out.initial_df = df_now;

    const std::vector<Eigen::Index> interior = bp.interior_rows();
    const std::vector<Eigen::Index> bdry = bp.boundary_rows();
    const double hi_limit = std::isfinite(lambda_prev)
                                ? lambda_prev * (1.0 + kTieRel)
                                : std::numeric_limits<double>::infinity();

    // Hitting time: the largest admissible candidate; ties go to the lowest row.
    const double block_floor = any_blocked ? lambda_prev * (1.0 - kTangencyRel)
                                           : std::numeric_limits<double>::infinity();
    double hit_best = 0.0;
    for (std::size_t k = 0; k < interior.size(); ++k) {
      const bool row_blocked =
          any_blocked && blocked[static_cast<std::size_t>(interior[k])];
      for (int sign = 1; sign >= -1; sign -= 2) {
        const double denom = sd.b[static_cast<Eigen::Index>(k)] + sign;
        if (denom == 0.0) continue;
        double cand = sd.a[static_cast<Eigen::Index>(k)] / denom;
        if (!std::isfinite(cand) || cand <= 0.0 || cand > hi_limit) continue;
        if (row_blocked && cand >= block_floor) continue;
        if (cand > lambda_prev) cand = lambda_prev;
        if (cand > hit_best) hit_best = cand;
      }
    }
    double hit_time = 0.0;
    Eigen::Index hit_row = -1;
    int hit_sign = 0;
    if (hit_best > 0.0) {
      const double tol = kTieRel * (std::isfinite(lambda_prev) ? lambda_prev : hit_best);
      for (std::size_t k = 0; k < interior.size() && hit_row < 0; ++k) {
        const bool row_blocked =
            any_blocked && blocked[static_cast<std::size_t>(interior[k])];
        for (int sign = 1; sign >= -1; sign -= 2) {
          const double denom = sd.b[static_cast<Eigen::Index>(k)] + sign;
          if (denom == 0.0) continue;
          double cand = sd.a[static_cast<Eigen::Index>(k)] / denom;
          if (!std::isfinite(cand) || cand <= 0.0 || cand > hi_limit) continue;
          if (row_blocked && cand >= block_floor) continue;
          if (cand > lambda_prev) cand = lambda_prev;
          if (cand >= hit_best - tol) {
            hit_time = cand;
            hit_row = interior[k];
            hit_sign = sign;
            break;
          }
        }
      }
    }

    // Leaving time: max over boundary rows with c < 0 and d < 0. Unlike hit
    // candidates, a leave candidate above lambda_prev cannot be a stale
    // crossing (the previous segment was sign-consistent up to its top), so
    // anything within the tangency band is a touch at lambda_prev itself and
    // is clamped rather than dropped.
    const double leave_limit = std::isfinite(lambda_prev)
                                   ? lambda_prev * (1.0 + kTangencyRel)
                                   : std::numeric_limits<double>::infinity();
    double leave_time = 0.0;
    Eigen::Index leave_row = -1;
    for (std::size_t j = 0; j < bdry.size(); ++j) {
      const Eigen::Index jj = static_cast<Eigen::Index>(j);
      if (!(sd.c[jj] < 0.0 && sd.d[jj] < 0.0)) continue;
      const double scale = row_norm1[bdry[j]];
      if (-sd.c[jj] <= kLeaveNoiseRel * scale * y_inf &&
          -sd.d[jj] <= kLeaveNoiseRel * scale * col_norm1)
        continue;
      double cand = sd.c[jj] / sd.d[jj];
      if (!std::isfinite(cand) || cand > leave_limit) continue;
      if (cand > lambda_prev) cand = lambda_prev;
      if (cand > leave_time) {
        leave_time = cand;
        leave_row = bdry[j];
      }
    }

    const bool hit_wins = hit_time >= leave_time;
    const double lambda_next = hit_wins ? hit_time : leave_time;

    DualSegment seg;
    if (opt.record_segments) {
      seg.lambda_hi = lambda_prev;
      seg.lambda_lo = lambda_next;
      seg.df = df_now;
      seg.a = Eigen::VectorXd::Zero(m);
      seg.b = Eigen::VectorXd::Zero(m);
      for (std::size_t k = 0; k < interior.size(); ++k) {
        seg.a[interior[k]] = sd.a[static_cast<Eigen::Index>(k)];
        seg.b[interior[k]] = sd.b[static_cast<Eigen::Index>(k)];
      }
      for (Eigen::Index row : bdry) seg.b[row] = -bp.sign(row);
    }

    if (lambda_next <= 0.0) {
      if (opt.record_segments) out.segments.push_back(std::move(seg));
      if (out.knots.empty()) {
        // The dual starts at zero: the path is a single fully regularized fit.
        out.knots.push_back({0.0, PathEventKind::Terminal, 0, 0, df_now});
      }
      out.lambda_min = 0.0;
      out.termination = TerminationReason::LambdaZero;
      break;
    }

    PathEventKind kind = PathEventKind::Hit;
    Eigen::Index ev_row = hit_row;
    int ev_sign = hit_sign;
    Eigen::Index df_after = 0;
    try {
      if (hit_wins) {
        bp.add(ev_row, ev_sign);
        provider.apply_hit(ev_row, ev_sign);
      } else {
        kind = PathEventKind::Leave;
        ev_row = leave_row;
        ev_sign = static_cast<int>(bp.sign(ev_row));
        bp.remove(ev_row);
        provider.apply_leave(ev_row);
      }
      df_after = provider.nullity();
    } catch (const NumericalError& err) {
      out.termination = TerminationReason::Aborted;
      out.failure = "numerical failure after " + std::to_string(out.knots.size()) +
                    " events: " + err.what();
      break;
    }
    if (opt.record_segments) out.segments.push_back(std::move(seg));
    out.knots.push_back({lambda_next, kind, ev_row, ev_sign, df_after});
    out.lambda_min = lambda_next;
    lambda_prev = lambda_next;

    if (any_blocked && lambda_next < blocked_lambda * (1.0 - kTangencyRel)) {
      std::fill(blocked.begin(), blocked.end(), 0);
      any_blocked = false;
      blocked_lambda = std::numeric_limits<double>::infinity();
    }
    if (kind == PathEventKind::Leave) {
      blocked[static_cast<std::size_t>(ev_row)] = 1;
      any_blocked = true;
      blocked_lambda = lambda_next;
    }

    if (stop.min_lambda > 0.0 && lambda_next <= stop.min_lambda) {
      out.termination = TerminationReason::MinLambda;
      break;
    }
    if (df_after > max_df) {
      out.termination = TerminationReason::MaxDf;
      break;
    }
    if (static_cast<Eigen::Index>(out.knots.size()) >= stop.max_steps) {
      out.termination = TerminationReason::MaxSteps;
      break;
    }
  }
  return SolutionPath(std::move(out));
}

SolutionPath run_path_with_oracle(const Eigen::VectorXd& y, const SparseRowMat& d,
                                  LsOracle& oracle, const PathOptions& opt) {
  if (y.size() != d.cols()) {
    throw InputError("data length must match the penalty's column count");
  }
  OracleStepProvider provider(y, d, oracle);
  return run_path_with_provider(provider, y, d, nullptr, opt);
}

SolutionPath run_path(const Eigen::VectorXd& y, const PenaltySpec& spec,
                      const PathOptions& opt) {
  const SparseRowMat d = spec.matrix();
  switch (spec.kind) {
    case PenaltyKind::TrendFilter: {
      TrendFilterOracle oracle(spec.p, spec.order);
      return run_path_with_oracle(y, d, oracle, opt);
    }
    case PenaltyKind::FusedGraph:
    case PenaltyKind::SparseFusedGraph: {
      GraphOracle oracle(spec);
      return run_path_with_oracle(y, d, oracle, opt);
    }
    case PenaltyKind::Custom:
      break;
  }
  GenericOracle oracle(d);
  return run_path_with_oracle(y, d, oracle, opt);
}

SolutionPath run_path_generic(const Eigen::VectorXd& y, const SparseRowMat& d,
                              const PathOptions& opt) {
  GenericOracle oracle(d);
  return run_path_with_oracle(y, d, oracle, opt);
}

}  // namespace genpath
