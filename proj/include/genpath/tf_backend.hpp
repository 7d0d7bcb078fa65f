#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "genpath/errors.hpp"
#include "genpath/ls_oracle.hpp"

namespace genpath {

// Cholesky of a banded SPD matrix, stored by lower diagonals:
// band(d, j) = A(j + d, j) for d = 0..bw. The factor L overwrites the band
// in the same layout. Returns {min, max} of diag(L); a non-positive pivot
// throws NumericalError.
std::pair<double, double> band_cholesky_in_place(Eigen::Ref<Eigen::MatrixXd> band,
                                                 Eigen::Index n,
                                                 Eigen::Index bw);

// Solves L L^T x = b in place given the factored band.
void band_solve_in_place(const Eigen::Ref<const Eigen::MatrixXd>& band,
                         Eigen::Index n, Eigen::Index bw,
                         Eigen::Ref<Eigen::VectorXd> x);

// Difference-penalty least-squares engine. The interior Gram D_I D_I^T is
// banded with half-width order+1 and always positive definite, so each
// solve is a band Cholesky over the current interior rows.
class TrendFilterOracle : public LsOracle {
 public:
  TrendFilterOracle(Eigen::Index p, int order);

  void boundary_add(Eigen::Index row) override;
  void boundary_remove(Eigen::Index row) override;
  Eigen::VectorXd minnorm(const Eigen::VectorXd& c) override;
  Eigen::Index nullity() const override;

  Eigen::Index total_rows() const { return m_; }
  Eigen::Index interior_size() const { return m_ - nb_; }

 private:
  void refactor();

  Eigen::Index p_;
  int order_;
  Eigen::Index m_;
  Eigen::Index bw_;
  std::vector<double> coef_;
  std::vector<double> gram_;
  std::vector<char> boundary_;
  std::vector<Eigen::Index> interior_;
  Eigen::MatrixXd band_;
  Eigen::VectorXd rhs_;
  Eigen::Index nb_ = 0;
  bool dirty_ = true;
};

}  // namespace genpath
