#pragma once

#include <Eigen/Dense>

namespace genpath {

// Least-squares engine over the interior rows of the penalty. The interior
// submatrix D_I is held implicitly; minnorm(c) returns the minimum-norm
// least-squares solution of D_I^T x ~= c, indexed by interior position.
struct LsOracle {
  virtual ~LsOracle() = default;
  virtual void boundary_add(Eigen::Index row) = 0;
  virtual void boundary_remove(Eigen::Index row) = 0;
  virtual Eigen::VectorXd minnorm(const Eigen::VectorXd& c) = 0;
  virtual Eigen::Index nullity() const = 0;
};

}  // namespace genpath
