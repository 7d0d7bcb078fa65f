#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <utility>
#include <vector>

#include "genpath/errors.hpp"
#include "genpath/ls_oracle.hpp"
#include "genpath/operators.hpp"

namespace genpath {

enum class ReductionIndex { Highest, Lowest };

// Solve L z = b for the Laplacian of a connected graph by grounding one
// node (the dropped coordinate is pinned to zero). b must be orthogonal to
// the constant vector up to 1e-9 relative.
Eigen::VectorXd laplacian_solve(
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
    Eigen::Index p, const Eigen::VectorXd& b,
    ReductionIndex drop = ReductionIndex::Highest);

// Connected components maintained under edge activation/deactivation.
class ComponentLabeling {
 public:
  ComponentLabeling(
      Eigen::Index p,
      std::vector<std::pair<Eigen::Index, Eigen::Index>> edges);

  // Labels touched by an operation: `kept` survives, `other` is the label
  // freed by a merge or created by a split (-1 when nothing changed shape).
  struct Change {
    Eigen::Index kept = -1;
    Eigen::Index other = -1;
    bool split = false;
    bool merged = false;
  };

  Change activate(Eigen::Index edge);
  Change deactivate(Eigen::Index edge);

  bool active(Eigen::Index edge) const;
  Eigen::Index node_count() const { return p_; }
  Eigen::Index edge_count() const {
    return static_cast<Eigen::Index>(edges_.size());
  }
  Eigen::Index label(Eigen::Index node) const;
  Eigen::Index count() const { return live_; }
  const std::vector<Eigen::Index>& members(Eigen::Index label) const;
  // Active incident edges as (neighbor, edge row).
  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& neighbors(
      Eigen::Index node) const;

 private:
  Eigen::Index fresh_label();
  void drop_adjacency(Eigen::Index node, Eigen::Index edge);

  Eigen::Index p_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges_;
  std::vector<char> active_;
  std::vector<std::vector<std::pair<Eigen::Index, Eigen::Index>>> adj_;
  std::vector<Eigen::Index> label_;
  std::vector<std::vector<Eigen::Index>> members_;
  std::vector<Eigen::Index> free_labels_;
  Eigen::Index next_label_ = 0;
  Eigen::Index live_ = 0;
  std::vector<Eigen::Index> scratch_;
  std::vector<char> visited_;
};

// Least-squares engine for fused and sparse fused penalties. Solves go
// through the interior Gram, which splits into one Laplacian-like block per
// connected component; singular blocks are grounded at their highest node.
class GraphOracle : public LsOracle {
 public:
  explicit GraphOracle(const PenaltySpec& spec);

  void boundary_add(Eigen::Index row) override;
  void boundary_remove(Eigen::Index row) override;
  Eigen::VectorXd minnorm(const Eigen::VectorXd& c) override;
  Eigen::Index nullity() const override;

  Eigen::Index total_rows() const { return m_; }
  Eigen::Index interior_size() const { return m_ - nb_; }

 private:
  struct Block {
    std::vector<Eigen::Index> nodes;
    Eigen::Index pinned = -1;  // position in `nodes`, -1 when regular
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt;
  };

  bool block_is_singular(Eigen::Index lab) const;
  void refactor(Eigen::Index lab);
  void mark(const ComponentLabeling::Change& ch);

  PenaltySpec spec_;
  Eigen::Index p_;
  Eigen::Index mg_;
  Eigen::Index m_;
  std::vector<char> boundary_;
  Eigen::Index nb_ = 0;
  ComponentLabeling comp_;
  std::vector<Block> block_;
  std::vector<char> dirty_;
  std::vector<Eigen::Index> local_;  // node -> local slot scratch
};

}  // namespace genpath
