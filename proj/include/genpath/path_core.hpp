#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "genpath/givens_qr.hpp"
#include "genpath/ls_oracle.hpp"
#include "genpath/operators.hpp"

namespace genpath {

enum class PathEventKind { Hit, Leave, Terminal };

const char* to_string(PathEventKind kind);

struct PathKnot {
  double lambda = 0.0;
  PathEventKind event = PathEventKind::Hit;
  Eigen::Index coord = 0;  // penalty row, 0-based
  int sign = 0;            // hit sign, or the sign the row had when it left
  Eigen::Index df = 0;     // dim null(D_I) after the event
};

// On [lambda_lo, lambda_hi] the dual is u_i(lambda) = a_i - lambda * b_i.
// Rows on the boundary carry (a, b) = (0, -s) so the same formula yields
// u_i = lambda * s_i.
struct DualSegment {
  double lambda_hi = std::numeric_limits<double>::infinity();
  double lambda_lo = 0.0;
  Eigen::Index df = 0;
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

enum class TerminationReason { LambdaZero, MaxSteps, MinLambda, MaxDf, Aborted };

const char* to_string(TerminationReason reason);

struct StopRules {
  Eigen::Index max_steps = 2000;
  double min_lambda = 0.0;  // 0 disables; otherwise stop once a knot falls at or below it
  Eigen::Index max_df = 0;  // <= 0 means p (never triggers); otherwise stop once df exceeds it
};

struct PathOptions {
  StopRules stop;
  bool record_segments = true;
};

// Hook for reconstructing coefficients when the fit lives in a design space
// (see general_x). `u` is the dual at the query lambda.
struct PrimalMap {
  virtual ~PrimalMap() = default;
  virtual Eigen::VectorXd primal(const Eigen::VectorXd& y, const SparseRowMat& d,
                                 const Eigen::VectorXd& u) const = 0;
};

struct PathData {
  Eigen::VectorXd y;
  SparseRowMat d;
  std::shared_ptr<const PrimalMap> primal_map;
  std::vector<PathKnot> knots;
  std::vector<DualSegment> segments;
  bool has_segments = true;
  Eigen::Index initial_df = 0;
  double lambda_min = std::numeric_limits<double>::infinity();
  TerminationReason termination = TerminationReason::LambdaZero;
  std::string failure;
};

class SolutionPath {
 public:
  SolutionPath() = default;
  explicit SolutionPath(PathData data);

  Eigen::Index penalty_rows() const { return data_.d.rows(); }
  Eigen::Index coefficients() const { return data_.d.cols(); }
  const Eigen::VectorXd& data_vector() const { return data_.y; }
  const SparseRowMat& penalty() const { return data_.d; }
  const std::vector<PathKnot>& knots() const { return data_.knots; }
  const std::vector<DualSegment>& segments() const { return data_.segments; }
  bool has_segments() const { return data_.has_segments; }
  Eigen::Index initial_df() const { return data_.initial_df; }
  double lambda_min() const { return data_.lambda_min; }
  TerminationReason termination() const { return data_.termination; }
  const std::string& failure() const { return data_.failure; }
  const PathData& raw() const { return data_; }

  // Index of the segment whose interval contains lambda.
  std::size_t segment_index(double lambda) const;
  Eigen::VectorXd dual_at(double lambda) const;
  Eigen::Index df_at(double lambda) const;
  Eigen::VectorXd primal_at(double lambda) const;

 private:
  PathData data_;
};

// Per-iteration quantities handed to the driver. `a`, `b` are indexed by
// interior position; `c`, `d` by boundary position. Hit candidates are
// a/(b ± 1); a boundary row leaves at c/d when both are negative.
struct StepData {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd d;
};

class StepProvider {
 public:
  virtual ~StepProvider() = default;
  virtual Eigen::Index total_rows() const = 0;
  virtual StepData step(const BoundaryPartition& boundary) = 0;
  virtual void apply_hit(Eigen::Index row, int sign) = 0;
  virtual void apply_leave(Eigen::Index row) = 0;
  virtual Eigen::Index nullity() const = 0;
};

// Standard provider: identity design, quantities from an LsOracle plus
// sparse products with D. `y` and `d` must outlive the provider.
class OracleStepProvider : public StepProvider {
 public:
  OracleStepProvider(const Eigen::VectorXd& y, const SparseRowMat& d, LsOracle& oracle);

  Eigen::Index total_rows() const override { return d_.rows(); }
  StepData step(const BoundaryPartition& boundary) override;
  void apply_hit(Eigen::Index row, int sign) override;
  void apply_leave(Eigen::Index row) override;
  Eigen::Index nullity() const override { return oracle_->nullity(); }

 private:
  const Eigen::VectorXd& y_;
  const SparseRowMat& d_;
  LsOracle* oracle_;
};

// QR-based oracle for arbitrary penalties. Starts on the wide strategy
// (full-rank QR of D_I^T, column updates) and falls back—permanently—to the
// rank-adaptive factorization of D_I when a rank deficiency surfaces.
class GenericOracle : public LsOracle {
 public:
  explicit GenericOracle(SparseRowMat d);
  explicit GenericOracle(const PenaltySpec& spec);

  Eigen::Index total_rows() const { return d_.rows(); }
  Eigen::Index interior_size() const { return boundary_.interior_size(); }
  bool using_tall() const { return tall_.has_value(); }

  void boundary_add(Eigen::Index row) override;
  void boundary_remove(Eigen::Index row) override;
  Eigen::VectorXd minnorm(const Eigen::VectorXd& c) override;
  Eigen::Index nullity() const override;

 private:
  Eigen::VectorXd dense_row(Eigen::Index row) const;
  Eigen::MatrixXd interior_matrix() const;
  void go_tall();

  SparseRowMat d_;
  BoundaryPartition boundary_;
  std::optional<QRFactor> wide_;
  std::optional<RotatedQRFactor> tall_;
};

// Core driver: runs the dual path with the given provider. `primal_map` may
// be null (identity design).
SolutionPath run_path_with_provider(StepProvider& provider, const Eigen::VectorXd& y,
                                    const SparseRowMat& d,
                                    std::shared_ptr<const PrimalMap> primal_map,
                                    const PathOptions& opt = {});

SolutionPath run_path_with_oracle(const Eigen::VectorXd& y, const SparseRowMat& d,
                                  LsOracle& oracle, const PathOptions& opt = {});

// Dispatches to the specialized backend for the spec's penalty kind.
SolutionPath run_path(const Eigen::VectorXd& y, const PenaltySpec& spec,
                      const PathOptions& opt = {});

// Forces the generic QR backend.
SolutionPath run_path_generic(const Eigen::VectorXd& y, const SparseRowMat& d,
                              const PathOptions& opt = {});

}  // namespace genpath
