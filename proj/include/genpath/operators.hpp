#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <utility>
#include <vector>

#include "genpath/errors.hpp"

namespace genpath {

using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class PenaltyKind { TrendFilter, FusedGraph, SparseFusedGraph, Custom };

// Difference operator of the given order: order 0 is the chain incidence
// (-1, 1), order k applies it k+1 times. Shape (p - order - 1) x p, with
// zero rows when p is too short to difference.
SparseRowMat build_diff_operator(int order, Eigen::Index p);

// Edge-incidence rows: -1 at the lower endpoint, +1 at the higher one.
SparseRowMat build_incidence(
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
    Eigen::Index p);

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Custom;
  Eigen::Index p = 0;
  int order = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  double alpha = 0.0;
  SparseRowMat custom;

  static PenaltySpec trend_filter(Eigen::Index p, int order);
  static PenaltySpec fused_graph(
      Eigen::Index p, std::vector<std::pair<Eigen::Index, Eigen::Index>> e);
  static PenaltySpec sparse_fused_graph(
      Eigen::Index p, std::vector<std::pair<Eigen::Index, Eigen::Index>> e,
      double alpha);
  static PenaltySpec custom_rows(SparseRowMat d);

  Eigen::Index rows() const;
  SparseRowMat matrix() const;
};

// Basis for the null space of D with the listed rows deleted; boundary_rows
// must be sorted and in range. Columns are integer-valued (polynomial pieces
// for differences, component indicators for graphs) and the product with the
// reduced operator is checked to vanish identically.
Eigen::MatrixXd null_basis(const PenaltySpec& spec,
                           const std::vector<Eigen::Index>& boundary_rows);

// Bookkeeping for the boundary set B: which rows of D sit on the box
// boundary and with what sign.
class BoundaryPartition {
 public:
  explicit BoundaryPartition(Eigen::Index m);

  Eigen::Index total_rows() const { return static_cast<Eigen::Index>(flag_.size()); }
  Eigen::Index boundary_size() const { return nb_; }
  Eigen::Index interior_size() const { return total_rows() - nb_; }
  bool is_boundary(Eigen::Index row) const;
  double sign(Eigen::Index row) const;

  void add(Eigen::Index row, double sign);
  void remove(Eigen::Index row);

  std::vector<Eigen::Index> boundary_rows() const;
  std::vector<Eigen::Index> interior_rows() const;
  Eigen::VectorXd boundary_signs() const;

  // Rank of `row` within the interior (resp. boundary) ordering.
  Eigen::Index interior_position(Eigen::Index row) const;
  Eigen::Index boundary_position(Eigen::Index row) const;

 private:
  void check_row(Eigen::Index row) const;
  std::vector<char> flag_;
  std::vector<double> sign_;
  Eigen::Index nb_ = 0;
};

}  // namespace genpath
