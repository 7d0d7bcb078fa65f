#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "genpath/errors.hpp"
#include "genpath/general_x.hpp"
#include "genpath/graph_backend.hpp"
#include "oracles.hpp"

using namespace genpath;

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> chain_edges(Eigen::Index p) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  for (Eigen::Index i = 0; i + 1 < p; ++i) edges.emplace_back(i, i + 1);
  return edges;
}

Eigen::MatrixXd full_rank_matrix(std::mt19937& rng, Eigen::Index n, Eigen::Index p) {
  Eigen::MatrixXd x = oracle::random_matrix(rng, n, p);
  REQUIRE(oracle::rank(x) == p);
  return x;
}

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  REQUIRE(a.size() == b.size());
  return (a - b).cwiseAbs().maxCoeff();
}

// Structural agreement between two paths; lambdas up to a relative slack.
void check_same_knots(const SolutionPath& a, const SolutionPath& b, double tol) {
  REQUIRE(a.knots().size() == b.knots().size());
  CHECK(a.initial_df() == b.initial_df());
  CHECK(a.termination() == b.termination());
  for (std::size_t i = 0; i < a.knots().size(); ++i) {
    const PathKnot& ka = a.knots()[i];
    const PathKnot& kb = b.knots()[i];
    CHECK(std::abs(ka.lambda - kb.lambda) <= tol * std::max(1.0, std::abs(ka.lambda)));
    CHECK(ka.event == kb.event);
    CHECK(ka.coord == kb.coord);
    CHECK(ka.sign == kb.sign);
    CHECK(ka.df == kb.df);
  }
}

std::vector<double> segment_midpoints(const SolutionPath& path, std::size_t limit) {
  std::vector<double> mids;
  for (const DualSegment& seg : path.segments()) {
    if (!std::isfinite(seg.lambda_hi)) continue;
    if (seg.lambda_hi - seg.lambda_lo <= 1e-10) continue;
    mids.push_back(0.5 * (seg.lambda_hi + seg.lambda_lo));
    if (mids.size() == limit) break;
  }
  return mids;
}

}  // namespace

TEST_CASE("design matrix factors lazily and shares its cache") {
  std::mt19937 rng(2100);
  const Eigen::MatrixXd x = full_rank_matrix(rng, 8, 3);
  DesignMatrix dm(x);
  const DesignMatrix copy = dm;

  CHECK(dm.rows() == 8);
  CHECK(dm.cols() == 3);
  CHECK(dm.factor_builds() == 0);
  CHECK(dm.full_solves() == 0);

  const Eigen::VectorXd v = oracle::random_vector(rng, 8);
  CHECK(max_abs_diff(dm.pinv_apply(v), oracle::pinv(x) * v) <= 1e-10);
  CHECK(copy.factor_builds() == 1);
  CHECK(copy.full_solves() == 1);

  const Eigen::VectorXd rhs = oracle::random_vector(rng, 3);
  const Eigen::VectorXd direct =
      (x.transpose() * x).ldlt().solve(rhs);
  CHECK(max_abs_diff(dm.normal_solve(rhs), direct) <= 1e-10);
  CHECK(dm.full_solves() == 2);

  copy.pinv_apply(v);
  CHECK(dm.factor_builds() == 1);
  CHECK(dm.full_solves() == 3);

  CHECK_THROWS_AS(DesignMatrix(oracle::random_matrix(rng, 3, 5)), InputError);
  CHECK_THROWS_AS(DesignMatrix(Eigen::MatrixXd(4, 0)), InputError);
  CHECK_THROWS_AS(dm.pinv_apply(Eigen::VectorXd::Zero(3)), InputError);
  CHECK_THROWS_AS(dm.normal_solve(Eigen::VectorXd::Zero(8)), InputError);
}

TEST_CASE("rank deficiency is caught at the factor") {
  std::mt19937 rng(2150);
  const Eigen::MatrixXd x = oracle::random_low_rank(rng, 8, 4, 2);
  REQUIRE(oracle::rank(x) == 2);
  DesignMatrix dm(x);
  const Eigen::VectorXd v = oracle::random_vector(rng, 8);
  try {
    dm.pinv_apply(v);
    FAIL("expected a rank failure");
  } catch (const RankDeficientError& err) {
    CHECK(std::string(err.what()).find("ridge_augment") != std::string::npos);
  }

  const Eigen::VectorXd y = oracle::random_vector(rng, 8);
  const auto [ya, xa] = ridge_augment(y, x, 0.5);
  CHECK(ya.size() == 12);
  CHECK(ya.head(8) == y);
  CHECK(ya.tail(4).isZero(0.0));
  CHECK(xa.topRows(8) == x);
  CHECK(xa.bottomRows(4) == Eigen::MatrixXd::Identity(4, 4));
  CHECK_NOTHROW(DesignMatrix(xa).pinv_apply(ya));
}

TEST_CASE("ridge augmentation shrinks and converges") {
  std::mt19937 rng(2200);
  const Eigen::MatrixXd x = oracle::random_low_rank(rng, 10, 4, 2);
  const Eigen::VectorXd y = oracle::random_vector(rng, 10);

  CHECK_THROWS_AS(ridge_augment(y, x, 0.0), InputError);
  CHECK_THROWS_AS(ridge_augment(y, x, -1.0), InputError);
  CHECK_THROWS_AS(ridge_augment(oracle::random_vector(rng, 3), x, 0.5), InputError);

  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-2, 1.0, 10.0}) {
    const auto [ya, xa] = ridge_augment(y, x, eps);
    DesignMatrix dm(xa);
    const Eigen::VectorXd beta = dm.normal_solve(xa.transpose() * ya);
    CHECK(beta.norm() < prev);
    prev = beta.norm();
  }

  // With a well-conditioned design, a vanishing ridge leaves the path alone.
  const Eigen::MatrixXd xf = full_rank_matrix(rng, 12, 5);
  const Eigen::VectorXd yf = oracle::random_vector(rng, 12);
  const PenaltySpec spec = PenaltySpec::fused_graph(5, chain_edges(5));
  const SolutionPath plain = run_path_design(yf, DesignMatrix(xf), spec);
  const auto [yr, xr] = ridge_augment(yf, xf, 1e-8);
  const SolutionPath ridged = run_path_design(yr, DesignMatrix(xr), spec);
  REQUIRE(plain.knots().size() == ridged.knots().size());
  for (std::size_t i = 0; i < plain.knots().size(); ++i) {
    CHECK(std::abs(plain.knots()[i].lambda - ridged.knots()[i].lambda) <= 1e-4);
    CHECK(plain.knots()[i].coord == ridged.knots()[i].coord);
  }
}

TEST_CASE("transforms reduce to the identity problem") {
  std::mt19937 rng(2300);

  SUBCASE("identity design") {
    const Eigen::VectorXd y = oracle::random_vector(rng, 7);
    const SparseRowMat d = build_diff_operator(1, 7);
    const TransformedProblem tp =
        transform_generic(y, DesignMatrix(Eigen::MatrixXd::Identity(7, 7)), d);
    CHECK(max_abs_diff(tp.y, y) <= 1e-12);
    CHECK((tp.d - Eigen::MatrixXd(d)).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("orthogonal design") {
    const Eigen::MatrixXd a = oracle::random_matrix(rng, 7, 7);
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
        Eigen::MatrixXd::Identity(7, 7);
    const Eigen::VectorXd y = oracle::random_vector(rng, 7);
    const SparseRowMat d = build_diff_operator(1, 7);
    const TransformedProblem tp = transform_generic(y, DesignMatrix(q), d);
    CHECK(max_abs_diff(tp.y, y) <= 1e-10);
    CHECK((tp.d - Eigen::MatrixXd(d) * q.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("tall design against the dense pseudoinverse") {
    const Eigen::MatrixXd x = full_rank_matrix(rng, 9, 4);
    const Eigen::VectorXd y = oracle::random_vector(rng, 9);
    const SparseRowMat d = build_diff_operator(1, 4);
    const TransformedProblem tp = transform_generic(y, DesignMatrix(x), d);
    const Eigen::MatrixXd xp = oracle::pinv(x);
    CHECK(max_abs_diff(tp.y, x * (xp * y)) <= 1e-10);
    CHECK((tp.d - Eigen::MatrixXd(d) * xp).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("size mismatches") {
    const Eigen::MatrixXd x = full_rank_matrix(rng, 9, 4);
    CHECK_THROWS_AS(
        transform_generic(oracle::random_vector(rng, 4), DesignMatrix(x),
                          build_diff_operator(1, 4)),
        InputError);
    CHECK_THROWS_AS(
        transform_generic(oracle::random_vector(rng, 9), DesignMatrix(x),
                          build_diff_operator(1, 5)),
        InputError);
  }
}

TEST_CASE("projection through the design matches the dense formula") {
  std::mt19937 rng(2400);

  SUBCASE("empty basis returns the plain gradient") {
    const Eigen::MatrixXd x = full_rank_matrix(rng, 6, 3);
    const Eigen::VectorXd c = oracle::random_vector(rng, 6);
    const Eigen::MatrixXd h(3, 0);
    CHECK(max_abs_diff(project_through_design(c, DesignMatrix(x), h),
                       x.transpose() * c) == 0.0);
  }

  SUBCASE("identity design is an orthogonal projection") {
    const Eigen::VectorXd c = oracle::random_vector(rng, 5);
    const Eigen::MatrixXd h = Eigen::MatrixXd::Ones(5, 1);
    const Eigen::VectorXd got =
        project_through_design(c, DesignMatrix(Eigen::MatrixXd::Identity(5, 5)), h);
    const Eigen::VectorXd want = c - Eigen::VectorXd::Constant(5, c.mean());
    CHECK(max_abs_diff(got, want) <= 1e-12);
  }

  SUBCASE("diagonal design") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 3);
    x.diagonal() << 1.0, 2.0, 3.0;
    const Eigen::MatrixXd h = Eigen::MatrixXd::Ones(3, 1);
    const Eigen::VectorXd c = oracle::random_vector(rng, 3);
    const Eigen::VectorXd xh = x * h;
    const Eigen::VectorXd want =
        x.transpose() * (c - xh * (xh.dot(c) / xh.squaredNorm()));
    CHECK(max_abs_diff(project_through_design(c, DesignMatrix(x), h), want) <= 1e-12);
  }

  SUBCASE("dependent basis columns are rejected") {
    const Eigen::MatrixXd x = full_rank_matrix(rng, 6, 3);
    Eigen::MatrixXd h = Eigen::MatrixXd::Ones(3, 2);
    const Eigen::VectorXd c = oracle::random_vector(rng, 6);
    CHECK_THROWS_AS(project_through_design(c, DesignMatrix(x), h), ContractViolation);
  }
}

TEST_CASE("the reduced normal equations match the direct ones") {
  std::mt19937 rng(2450);
  const Eigen::MatrixXd x = full_rank_matrix(rng, 10, 6);
  DesignMatrix dm(x);
  const PenaltySpec spec = PenaltySpec::fused_graph(6, chain_edges(6));
  const Eigen::MatrixXd dense = Eigen::MatrixXd(spec.matrix());
  const Eigen::MatrixXd xp = oracle::pinv(x);

  auto check_equivalence = [&](const Eigen::MatrixXd& di,
                               const std::vector<Eigen::Index>& boundary) {
    const Eigen::VectorXd c = oracle::random_vector(rng, 10);
    const Eigen::VectorXd lhs =
        oracle::pinv((di * xp).transpose()) * c;
    const Eigen::MatrixXd h = null_basis(spec, boundary);
    const Eigen::VectorXd g = di * project_through_design(c, dm, h);
    const Eigen::VectorXd rhs = oracle::pinv(di * di.transpose()) * g;
    CHECK(max_abs_diff(lhs, rhs) <= 1e-8);
  };

  check_equivalence(dense, {});
  Eigen::MatrixXd sub(4, 6);
  sub << dense.row(0), dense.row(2), dense.row(3), dense.row(4);
  check_equivalence(sub, {1});
}

TEST_CASE("identity designs reproduce the direct solver") {
  std::mt19937 rng(2480);
  const Eigen::Index p = 12;
  const Eigen::VectorXd y = oracle::random_vector(rng, p);
  const PenaltySpec spec = PenaltySpec::trend_filter(p, 1);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);

  const SolutionPath direct = run_path(y, spec);
  const SolutionPath designed = run_path_design(y, DesignMatrix(eye), spec);
  const SolutionPath generic = run_path_design_generic(y, DesignMatrix(eye), spec.matrix());
  check_same_knots(direct, designed, 1e-9);
  check_same_knots(direct, generic, 1e-9);

  for (double lambda : segment_midpoints(direct, 6)) {
    CHECK(max_abs_diff(direct.primal_at(lambda), designed.primal_at(lambda)) <= 1e-9);
    CHECK(max_abs_diff(direct.primal_at(lambda), generic.primal_at(lambda)) <= 1e-9);
  }
}

TEST_CASE("specialized and generic routes agree under a general design") {
  std::mt19937 rng(2500);
  const Eigen::Index n = 40;
  const Eigen::Index p = 20;
  const Eigen::MatrixXd x = full_rank_matrix(rng, n, p);
  const Eigen::VectorXd y = oracle::random_vector(rng, n);

  std::vector<PenaltySpec> specs;
  specs.push_back(PenaltySpec::trend_filter(p, 1));
  specs.push_back(PenaltySpec::fused_graph(p, chain_edges(p)));
  specs.push_back(PenaltySpec::sparse_fused_graph(p, chain_edges(p), 0.5));

  for (const PenaltySpec& spec : specs) {
    CAPTURE(static_cast<int>(spec.kind));
    const SolutionPath ps = run_path_design(y, DesignMatrix(x), spec);
    const SolutionPath pg = run_path_design_generic(y, DesignMatrix(x), spec.matrix());
    REQUIRE(ps.termination() == TerminationReason::LambdaZero);
    check_same_knots(ps, pg, 1e-7);

    const Eigen::MatrixXd dense = Eigen::MatrixXd(spec.matrix());
    for (double lambda : segment_midpoints(ps, 8)) {
      const Eigen::VectorXd bs = ps.primal_at(lambda);
      const Eigen::VectorXd bg = pg.primal_at(lambda);
      CHECK(max_abs_diff(bs, bg) <= 1e-7);
      const oracle::KktReport rep =
          oracle::kkt_check(x, y, dense, lambda, bs, ps.dual_at(lambda));
      CHECK(rep.feasibility <= 1e-9 * std::max(1.0, lambda));
      CHECK(rep.stationarity <= 1e-7);
      CHECK(rep.complementarity <= 1e-7);
    }
  }

  // Degrees of freedom track the interior rank of the penalty.
  const PenaltySpec chain = PenaltySpec::fused_graph(p, chain_edges(p));
  const SolutionPath path = run_path_design(y, DesignMatrix(x), chain);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(chain.matrix());
  std::set<Eigen::Index> boundary;
  for (const PathKnot& knot : path.knots()) {
    if (knot.event == PathEventKind::Hit) boundary.insert(knot.coord);
    if (knot.event == PathEventKind::Leave) boundary.erase(knot.coord);
    Eigen::MatrixXd interior(dense.rows() - static_cast<Eigen::Index>(boundary.size()),
                             dense.cols());
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < dense.rows(); ++r)
      if (!boundary.count(r)) interior.row(at++) = dense.row(r);
    CHECK(knot.df == p - oracle::rank(interior));
  }
}

TEST_CASE("the path itself never builds the design factor") {
  std::mt19937 rng(2550);
  const Eigen::MatrixXd x = full_rank_matrix(rng, 30, 12);
  const Eigen::VectorXd y = oracle::random_vector(rng, 30);
  const PenaltySpec spec = PenaltySpec::trend_filter(12, 1);

  DesignMatrix dm(x);
  const SolutionPath path = run_path_design(y, dm, spec);
  CHECK(dm.factor_builds() == 0);
  CHECK(dm.full_solves() == 0);

  const double lambda = 0.5 * path.knots().front().lambda;
  path.primal_at(lambda);
  CHECK(dm.factor_builds() == 1);
  CHECK(dm.full_solves() == 1);
  path.primal_at(0.25 * lambda);
  CHECK(dm.factor_builds() == 1);
  CHECK(dm.full_solves() == 2);

  // The transform route needs the factor up front.
  DesignMatrix dg(x);
  run_path_design_generic(y, dg, spec.matrix());
  CHECK(dg.factor_builds() == 1);
}

TEST_CASE("custom penalties take the generic route") {
  std::mt19937 rng(2600);
  const Eigen::MatrixXd x = full_rank_matrix(rng, 12, 8);
  const Eigen::VectorXd y = oracle::random_vector(rng, 12);
  Eigen::MatrixXd rows = oracle::random_matrix(rng, 5, 8);
  rows.col(2).setZero();
  const PenaltySpec spec = PenaltySpec::custom_rows(rows.sparseView());

  const SolutionPath via_dispatch = run_path_design(y, DesignMatrix(x), spec);
  const SolutionPath via_generic =
      run_path_design_generic(y, DesignMatrix(x), spec.matrix());
  REQUIRE(via_dispatch.knots().size() == via_generic.knots().size());
  for (std::size_t i = 0; i < via_dispatch.knots().size(); ++i) {
    CHECK(via_dispatch.knots()[i].lambda == via_generic.knots()[i].lambda);
    CHECK(via_dispatch.knots()[i].coord == via_generic.knots()[i].coord);
  }

  GenericOracle oracle_for(spec.matrix());
  CHECK_THROWS_AS(DesignStepProvider(y, DesignMatrix(x), spec, oracle_for),
                  ContractViolation);
  CHECK_THROWS_AS(
      run_path_design(oracle::random_vector(rng, 10), DesignMatrix(x),
                      PenaltySpec::trend_filter(8, 1)),
      InputError);
  CHECK_THROWS_AS(
      run_path_design(y, DesignMatrix(x), PenaltySpec::trend_filter(9, 1)),
      InputError);
}

TEST_CASE("sparse fused designs start from an empty null space") {
  std::mt19937 rng(2700);
  const Eigen::MatrixXd x = full_rank_matrix(rng, 10, 6);
  const Eigen::VectorXd y = oracle::random_vector(rng, 10);
  const PenaltySpec spec = PenaltySpec::sparse_fused_graph(6, chain_edges(6), 0.5);

  const SolutionPath path = run_path_design(y, DesignMatrix(x), spec);
  CHECK(path.initial_df() == 0);
  REQUIRE(!path.knots().empty());
  const double top = path.knots().front().lambda;
  CHECK(path.primal_at(2.0 * top).cwiseAbs().maxCoeff() <= 1e-8);

  const SolutionPath generic = run_path_design_generic(y, DesignMatrix(x), spec.matrix());
  check_same_knots(path, generic, 1e-7);
}
