#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "genpath/errors.hpp"
#include "genpath/operators.hpp"
#include "genpath/tf_backend.hpp"
#include "genpath/warnings.hpp"
#include "oracles.hpp"

using namespace genpath;

namespace {

double max_abs(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

// Dense interior submatrix for a difference penalty.
Eigen::MatrixXd interior_dense(Eigen::Index p, int order,
                               const std::vector<Eigen::Index>& boundary) {
  const Eigen::MatrixXd d = Eigen::MatrixXd(build_diff_operator(order, p));
  std::vector<char> onb(d.rows(), 0);
  for (Eigen::Index r : boundary) onb[static_cast<std::size_t>(r)] = 1;
  Eigen::MatrixXd out(d.rows() - static_cast<Eigen::Index>(boundary.size()),
                      p);
  Eigen::Index t = 0;
  for (Eigen::Index r = 0; r < d.rows(); ++r)
    if (!onb[static_cast<std::size_t>(r)]) out.row(t++) = d.row(r);
  return out;
}

}  // namespace

TEST_CASE("band Cholesky matches the dense factorization") {
  std::mt19937 rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index n = 12, bw = 1 + trial % 4;
    // SPD with known band: L0 lower-banded with positive diagonal.
    Eigen::MatrixXd l0 = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      l0(j, j) = 1.0 + std::abs(oracle::runif(rng));
      for (Eigen::Index d = 1; d <= bw && j + d < n; ++d)
        l0(j + d, j) = oracle::runif(rng);
    }
    const Eigen::MatrixXd a = l0 * l0.transpose();

    Eigen::MatrixXd band = Eigen::MatrixXd::Zero(bw + 1, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index d = 0; d <= bw && j + d < n; ++d)
        band(d, j) = a(j + d, j);

    const auto [lo, hi] = band_cholesky_in_place(band, n, bw);
    CHECK(lo > 0.0);
    CHECK(hi >= lo);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index d = 0; d <= bw && j + d < n; ++d)
        CHECK(band(d, j) == doctest::Approx(l0(j + d, j)).epsilon(1e-10));

    const Eigen::VectorXd b = oracle::random_vector(rng, n);
    Eigen::VectorXd x = b;
    band_solve_in_place(band, n, bw, x);
    CHECK(max_abs(a * x - b) <= 1e-10 * std::max(1.0, max_abs(b)));
  }

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(band_cholesky_in_place(zero, 3, 1), NumericalError);
}

TEST_CASE("chain oracle reproduces the documented solve") {
  TrendFilterOracle o(3, 0);
  Eigen::VectorXd y(3);
  y << 0.0, 1.0, 3.0;
  const Eigen::VectorXd u = o.minnorm(y);
  REQUIRE(u.size() == 2);
  CHECK(u[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(u[1] == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(o.nullity() == 1);
}

TEST_CASE("oracle solves agree with the pseudoinverse across boundary sets") {
  std::mt19937 rng(73);
  for (int order = 0; order <= 3; ++order) {
    const Eigen::Index p = 14;
    TrendFilterOracle o(p, order);
    const Eigen::Index m = o.total_rows();
    std::vector<char> onb(static_cast<std::size_t>(m), 0);

    auto current_boundary = [&]() {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index r = 0; r < m; ++r)
        if (onb[static_cast<std::size_t>(r)]) rows.push_back(r);
      return rows;
    };
    auto check_state = [&]() {
      const Eigen::MatrixXd di = interior_dense(p, order, current_boundary());
      for (int t = 0; t < 3; ++t) {
        const Eigen::VectorXd c = oracle::random_vector(rng, p);
        const Eigen::VectorXd got = o.minnorm(c);
        const Eigen::VectorXd want =
            oracle::minnorm_ls(di.transpose(), c);
        CHECK(max_abs(got - want) <= 1e-9);
      }
      CHECK(o.nullity() == p - di.rows());
    };

    check_state();
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    for (int op = 0; op < 12; ++op) {
      const Eigen::Index r = pick(rng);
      if (onb[static_cast<std::size_t>(r)]) {
        o.boundary_remove(r);
        onb[static_cast<std::size_t>(r)] = 0;
      } else {
        o.boundary_add(r);
        onb[static_cast<std::size_t>(r)] = 1;
      }
      check_state();
    }
  }
}

TEST_CASE("oracle handles the empty interior and short signals") {
  TrendFilterOracle o(4, 0);
  for (Eigen::Index r = 0; r < 3; ++r) o.boundary_add(r);
  const Eigen::VectorXd x = o.minnorm(Eigen::VectorXd::Ones(4));
  CHECK(x.size() == 0);
  CHECK(o.nullity() == 4);

  // Too short to difference at all.
  TrendFilterOracle tiny(3, 3);
  CHECK(tiny.total_rows() == 0);
  CHECK(tiny.nullity() == 3);
  CHECK(tiny.minnorm(Eigen::VectorXd::Zero(3)).size() == 0);
}

TEST_CASE("oracle rejects bad arguments") {
  TrendFilterOracle o(10, 1);
  CHECK_THROWS_AS(o.boundary_add(-1), InputError);
  CHECK_THROWS_AS(o.boundary_add(8), InputError);
  CHECK_THROWS_AS(o.boundary_remove(0), ContractViolation);
  o.boundary_add(0);
  CHECK_THROWS_AS(o.boundary_add(0), ContractViolation);
  CHECK_THROWS_AS(o.minnorm(Eigen::VectorXd::Zero(9)), InputError);
  CHECK_THROWS_AS(TrendFilterOracle(0, 1), InputError);
  CHECK_THROWS_AS(TrendFilterOracle(5, -1), InputError);
}

TEST_CASE("a numerically singular Gram surfaces as an error") {
  // High orders push the Gram past what double precision can factor; the
  // pivot collapse must come back as the numerical error type, not a crash
  // or a silent bad solve.
  TrendFilterOracle o(120, 11);
  CHECK_THROWS_AS(o.minnorm(Eigen::VectorXd::Zero(120)), NumericalError);
}

TEST_CASE("warning handler plumbing: swap, emit, restore") {
  std::vector<std::string> seen;
  set_warning_handler([&](const std::string& m) { seen.push_back(m); });
  emit_warning("synthetic condition report");
  set_warning_handler(nullptr);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0] == "synthetic condition report");
}
