// End-to-end acceptance checks. Each numbered criterion prints one PASS or
// FAIL line; the process exits nonzero if any of them fail. Everything is
// checked against independent oracles (SVD pseudoinverses, fresh
// factorizations, dense formulas), never against the code under test.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "genpath/general_x.hpp"
#include "genpath/givens_qr.hpp"
#include "genpath/graph_backend.hpp"
#include "genpath/cli_io.hpp"
#include "genpath/operators.hpp"
#include "genpath/path_core.hpp"
#include "oracles.hpp"

using namespace genpath;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& line) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", line.c_str());
  if (!ok) ++failures;
}

double elapsed(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> chain_edges(Eigen::Index p) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  for (Eigen::Index i = 0; i + 1 < p; ++i) edges.emplace_back(i, i + 1);
  return edges;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> grid_edges(Eigen::Index side) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  for (Eigen::Index r = 0; r < side; ++r) {
    for (Eigen::Index c = 0; c < side; ++c) {
      const Eigen::Index v = r * side + c;
      if (c + 1 < side) edges.emplace_back(v, v + 1);
      if (r + 1 < side) edges.emplace_back(v, v + side);
    }
  }
  return edges;
}

SparseRowMat chain_diff_matrix(Eigen::Index p) {
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i + 1 < p; ++i) {
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -1.0);
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i + 1), 1.0);
  }
  SparseRowMat d(p - 1, p);
  d.setFromTriplets(trip.begin(), trip.end());
  return d;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", v);
  return buf;
}

// --- criterion 1 ------------------------------------------------------------

bool fused_chain_step_count() {
  std::mt19937 rng(101);
  double slowest = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd y = oracle::random_vector(rng, 100);
    const auto t0 = Clock::now();
    const SolutionPath path = run_path(y, PenaltySpec::trend_filter(100, 0));
    const double dt = elapsed(t0);
    slowest = std::max(slowest, dt);
    if (path.knots().size() != 99) return false;
    for (const PathKnot& k : path.knots())
      if (k.event != PathEventKind::Hit) return false;
    if (dt >= 1.0) return false;
  }
  report(true, "1. fused lasso chains take exactly 99 hit steps, no leaves "
               "(slowest instance " + sci(slowest) + " s)");
  return true;
}

// --- criterion 2 ------------------------------------------------------------

bool worked_instance() {
  const Eigen::VectorXd y = (Eigen::VectorXd(3) << 0, 1, 3).finished();
  const SolutionPath path = run_path(y, PenaltySpec::trend_filter(3, 0));
  if (path.knots().size() != 2) return false;
  double dev = std::abs(path.knots()[0].lambda - 5.0 / 3.0);
  dev = std::max(dev, std::abs(path.knots()[1].lambda - 1.0));
  if (dev > 1e-10) return false;

  const Eigen::VectorXd at1 = (Eigen::VectorXd(3) << 1, 1, 2).finished();
  dev = std::max(dev, (path.primal_at(1.0) - at1).cwiseAbs().maxCoeff());
  dev = std::max(dev, (path.primal_at(5.0 / 3.0) -
                       Eigen::VectorXd::Constant(3, 4.0 / 3.0))
                          .cwiseAbs()
                          .maxCoeff());
  dev = std::max(dev, (path.primal_at(0.0) - y).cwiseAbs().maxCoeff());
  if (dev > 1e-10) return false;
  report(true, "2. worked instance y = (0, 1, 3): knots 5/3 and 1, coefficient "
               "checks (max dev " + sci(dev) + ")");
  return true;
}

// --- criterion 3 ------------------------------------------------------------

bool kkt_certification() {
  std::mt19937 rng(303);
  struct ProblemClass {
    std::string name;
    Eigen::Index p;
    std::function<PenaltySpec(std::mt19937&)> make;
  };
  const std::vector<ProblemClass> classes = {
      {"fl1d", 60, [](std::mt19937&) { return PenaltySpec::trend_filter(60, 0); }},
      {"grid", 100,
       [](std::mt19937&) { return PenaltySpec::fused_graph(100, grid_edges(10)); }},
      {"sfl", 30,
       [](std::mt19937& r) {
         return PenaltySpec::sparse_fused_graph(
             30, oracle::random_connected_graph(r, 30, 10), 0.5);
       }},
      {"tf1", 50, [](std::mt19937&) { return PenaltySpec::trend_filter(50, 1); }},
      {"tf2", 50, [](std::mt19937&) { return PenaltySpec::trend_filter(50, 2); }},
      {"tf3", 50, [](std::mt19937&) { return PenaltySpec::trend_filter(50, 3); }},
      {"custom", 15,
       [](std::mt19937& r) {
         return PenaltySpec::custom_rows(
             oracle::random_matrix(r, 25, 15).sparseView());
       }},
  };

  double worst_stat = 0.0;
  double worst_feas = 0.0;
  for (const ProblemClass& cls : classes) {
    for (int inst = 0; inst < 10; ++inst) {
      const PenaltySpec spec = cls.make(rng);
      const Eigen::VectorXd y = oracle::random_vector(rng, cls.p);
      const SolutionPath path = run_path(y, spec);
      const Eigen::MatrixXd dense(spec.matrix());
      const double top = path.knots().empty() ? 1.0 : path.knots().front().lambda;
      for (int s = 0; s < 25; ++s) {
        const double lambda = oracle::runif(rng, 0.02, 1.05) * top;
        const Eigen::VectorXd u = path.dual_at(lambda);
        const Eigen::VectorXd beta = path.primal_at(lambda);
        const double feas = u.cwiseAbs().maxCoeff();
        if (feas > lambda * (1.0 + 1e-9)) return false;
        worst_feas = std::max(worst_feas, feas - lambda);
        const oracle::KktReport rep =
            oracle::kkt_check_identity(y, dense, lambda, beta, u);
        worst_stat = std::max(worst_stat, rep.stationarity);
        if (rep.stationarity > 1e-7) return false;
      }
    }
  }
  report(true, "3. KKT certificates on 7 problem classes x 10 instances x 25 "
               "lambdas (worst stationarity " + sci(worst_stat) + ")");
  return true;
}

// --- criterion 4 ------------------------------------------------------------

bool backend_equivalence() {
  std::mt19937 rng(404);
  double worst = 0.0;
  for (const Eigen::Index p : {10, 50, 200}) {
    const Eigen::VectorXd y = oracle::random_vector(rng, p);
    const SolutionPath generic =
        run_path(y, PenaltySpec::custom_rows(chain_diff_matrix(p)));
    const SolutionPath banded = run_path(y, PenaltySpec::trend_filter(p, 0));
    const SolutionPath graph =
        run_path(y, PenaltySpec::fused_graph(p, chain_edges(p)));
    for (const SolutionPath* other : {&banded, &graph}) {
      if (other->knots().size() != generic.knots().size()) return false;
      for (std::size_t i = 0; i < generic.knots().size(); ++i) {
        const PathKnot& a = generic.knots()[i];
        const PathKnot& b = other->knots()[i];
        const double dev =
            std::abs(a.lambda - b.lambda) / std::max(1.0, std::abs(a.lambda));
        worst = std::max(worst, dev);
        if (dev > 1e-9) return false;
        if (a.event != b.event || a.coord != b.coord || a.sign != b.sign ||
            a.df != b.df)
          return false;
      }
    }
  }
  report(true, "4. chain penalties: generic QR, banded, and graph backends give "
               "identical paths (worst knot dev " + sci(worst) + ")");
  return true;
}

// --- criterion 5 ------------------------------------------------------------

bool minnorm_against_svd() {
  std::mt19937 rng(505);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<Eigen::Index> rdist(2, 20), cdist(2, 30);
    const Eigen::Index r = rdist(rng), c = cdist(rng);
    std::uniform_int_distribution<Eigen::Index> kdist(1, std::min(r, c) - 1);
    const Eigen::MatrixXd a = oracle::random_low_rank(rng, r, c, kdist(rng));
    const Eigen::VectorXd b = oracle::random_vector(rng, r);
    const RotatedQRFactor f = RotatedQRFactor::compute(a);
    const double dev =
        (f.solve_minnorm(b) - oracle::minnorm_ls(a, b)).cwiseAbs().maxCoeff();
    worst = std::max(worst, dev);
    if (dev > 1e-9) return false;
  }
  report(true, "5. 200 rank-deficient min-norm solves match the SVD "
               "pseudoinverse (worst dev " + sci(worst) + ")");
  return true;
}

// --- criterion 6 ------------------------------------------------------------

bool update_equivalence() {
  std::mt19937 rng(606);
  double worst = 0.0;
  auto track = [&worst](double dev) {
    worst = std::max(worst, dev);
    return dev <= 1e-9;
  };

  for (int seq = 0; seq < 50; ++seq) {
    const int mode = seq % 3;
    if (mode == 0) {
      // full-rank factor, rows and columns mixed in one sequence
      Eigen::Index m = 12, n = 5;
      Eigen::MatrixXd cur = oracle::random_matrix(rng, m, n);
      QRFactor f = QRFactor::compute(cur);
      for (int op = 0; op < 30; ++op) {
        const double coin = oracle::runif(rng, 0.0, 1.0);
        if (coin < 0.35) {
          std::uniform_int_distribution<Eigen::Index> spot(0, m);
          const Eigen::Index at = spot(rng);
          const Eigen::VectorXd w = oracle::random_vector(rng, n);
          Eigen::MatrixXd next(m + 1, n);
          next.topRows(at) = cur.topRows(at);
          next.row(at) = w.transpose();
          next.bottomRows(m - at) = cur.bottomRows(m - at);
          cur = next;
          f.add_row(w, at);
          ++m;
        } else if (coin < 0.6 && m > n + 3) {
          std::uniform_int_distribution<Eigen::Index> spot(0, m - 1);
          const Eigen::Index at = spot(rng);
          Eigen::MatrixXd next(m - 1, n);
          next.topRows(at) = cur.topRows(at);
          next.bottomRows(m - 1 - at) = cur.bottomRows(m - 1 - at);
          cur = next;
          f.remove_row(at);
          --m;
        } else if (coin < 0.8 && n + 3 < m) {
          std::uniform_int_distribution<Eigen::Index> spot(0, n);
          const Eigen::Index at = spot(rng);
          const Eigen::VectorXd w = oracle::random_vector(rng, m);
          Eigen::MatrixXd next(m, n + 1);
          next.leftCols(at) = cur.leftCols(at);
          next.col(at) = w;
          next.rightCols(n - at) = cur.rightCols(n - at);
          cur = next;
          f.add_col(w, at);
          ++n;
        } else if (n > 2) {
          std::uniform_int_distribution<Eigen::Index> spot(0, n - 1);
          const Eigen::Index at = spot(rng);
          Eigen::MatrixXd next(m, n - 1);
          next.leftCols(at) = cur.leftCols(at);
          next.rightCols(n - 1 - at) = cur.rightCols(n - 1 - at);
          cur = next;
          f.remove_col(at);
          --n;
        } else {
          continue;
        }
        const Eigen::VectorXd b = oracle::random_vector(rng, m);
        if (!track((f.solve_ls(b) - QRFactor::compute(cur).solve_ls(b))
                       .cwiseAbs()
                       .maxCoeff()))
          return false;
      }
    } else {
      // rank-adaptive factor; mode 1 edits rows of A, mode 2 columns of A
      const bool transposed = mode == 2;
      const Eigen::Index width = 6;
      std::vector<Eigen::VectorXd> stored;
      for (int i = 0; i < 4; ++i)
        stored.push_back(oracle::random_vector(rng, width));
      auto assemble = [&stored, width]() {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(stored.size()), width);
        for (std::size_t i = 0; i < stored.size(); ++i)
          a.row(static_cast<Eigen::Index>(i)) = stored[i].transpose();
        return a;
      };
      RotatedQRFactor f = RotatedQRFactor::compute(assemble(), transposed);
      for (int op = 0; op < 30; ++op) {
        const double coin = oracle::runif(rng, 0.0, 1.0);
        if (stored.size() < 2 || coin < 0.6) {
          Eigen::VectorXd w;
          if (!stored.empty() && coin < 0.2) {
            std::uniform_int_distribution<std::size_t> pick(0, stored.size() - 1);
            w = 1.7 * stored[pick(rng)];  // forces a dependent row
          } else {
            w = oracle::random_vector(rng, width);
          }
          std::uniform_int_distribution<Eigen::Index> spot(
              0, static_cast<Eigen::Index>(stored.size()));
          const Eigen::Index at = spot(rng);
          stored.insert(stored.begin() + at, w);
          if (transposed)
            f.add_col_of_original(w, at);
          else
            f.add_row(w, at);
        } else {
          std::uniform_int_distribution<Eigen::Index> spot(
              0, static_cast<Eigen::Index>(stored.size()) - 1);
          const Eigen::Index at = spot(rng);
          stored.erase(stored.begin() + at);
          if (transposed)
            f.remove_col_of_original(at);
          else
            f.remove_row(at);
        }
        const Eigen::Index blen =
            transposed ? width : static_cast<Eigen::Index>(stored.size());
        const Eigen::VectorXd b = oracle::random_vector(rng, blen);
        const RotatedQRFactor fresh =
            RotatedQRFactor::compute(assemble(), transposed);
        if (!track((f.solve_minnorm(b) - fresh.solve_minnorm(b))
                       .cwiseAbs()
                       .maxCoeff()))
          return false;
      }
    }
  }
  report(true, "6. 50 update sequences x 30 ops match fresh factorizations "
               "(worst dev " + sci(worst) + ")");
  return true;
}

// --- criterion 7 ------------------------------------------------------------

bool laplacian_suite() {
  std::mt19937 rng(707);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<Eigen::Index> pdist(2, 100);
    const Eigen::Index p = pdist(rng);
    std::uniform_int_distribution<Eigen::Index> edist(0, p);
    const auto edges = oracle::random_connected_graph(rng, p, edist(rng));
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(p, p);
    for (const auto& e : edges) {
      lap(e.first, e.first) += 1.0;
      lap(e.second, e.second) += 1.0;
      lap(e.first, e.second) -= 1.0;
      lap(e.second, e.first) -= 1.0;
    }
    const Eigen::VectorXd b = lap * oracle::random_vector(rng, p);
    const Eigen::VectorXd x = laplacian_solve(edges, p, b);
    const double rel = (lap * x - b).norm() / std::max(b.norm(), 1e-300);
    worst = std::max(worst, rel);
    if (rel > 1e-10) return false;
  }
  report(true, "7. 100 grounded Laplacian solves on random connected graphs "
               "(worst relative residual " + sci(worst) + ")");
  return true;
}

// --- criterion 8 ------------------------------------------------------------

bool soft_threshold_identity() {
  std::mt19937 rng(808);
  const Eigen::Index p = 30;
  const Eigen::VectorXd y = oracle::random_vector(rng, p);
  const double alpha = 0.5;
  const SolutionPath sparse =
      run_path(y, PenaltySpec::sparse_fused_graph(p, chain_edges(p), alpha));
  const SolutionPath fused =
      run_path(y, PenaltySpec::fused_graph(p, chain_edges(p)));
  const double top =
      1.1 * std::max(sparse.knots().front().lambda, fused.knots().front().lambda);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    const double lambda = top * (s + 1) / 20.0;
    const Eigen::VectorXd direct = sparse.primal_at(lambda);
    Eigen::VectorXd thresholded = fused.primal_at(lambda);
    for (Eigen::Index i = 0; i < p; ++i)
      thresholded[i] = oracle::soft_threshold(thresholded[i], alpha * lambda);
    const double dev = (direct - thresholded).cwiseAbs().maxCoeff();
    worst = std::max(worst, dev);
    if (dev > 1e-8) return false;
  }
  report(true, "8. sparse fused lasso equals the soft-thresholded fused lasso "
               "at 20 lambdas (worst dev " + sci(worst) + ")");
  return true;
}

// --- criterion 9 ------------------------------------------------------------

bool design_route_equivalence() {
  std::mt19937 rng(909);
  const Eigen::Index n = 40, p = 20;
  Eigen::MatrixXd x = oracle::random_matrix(rng, n, p);
  while (oracle::rank(x) < p) x = oracle::random_matrix(rng, n, p);
  const Eigen::VectorXd y = oracle::random_vector(rng, n);

  double worst = 0.0;
  for (const PenaltySpec& spec :
       {PenaltySpec::trend_filter(p, 1),
        PenaltySpec::fused_graph(p, chain_edges(p))}) {
    const DesignMatrix specialized_x(x);
    const SolutionPath specialized = run_path_design(y, specialized_x, spec);
    // the specialized route must not have touched any n- or p-sized system
    if (specialized_x.factor_builds() != 0 || specialized_x.full_solves() != 0)
      return false;
    const DesignMatrix generic_x(x);
    const SolutionPath generic =
        run_path_design_generic(y, generic_x, spec.matrix());
    if (specialized.knots().size() != generic.knots().size()) return false;
    for (std::size_t i = 0; i < generic.knots().size(); ++i) {
      const PathKnot& a = specialized.knots()[i];
      const PathKnot& b = generic.knots()[i];
      const double dev =
          std::abs(a.lambda - b.lambda) / std::max(1.0, std::abs(a.lambda));
      worst = std::max(worst, dev);
      if (dev > 1e-7) return false;
      if (a.event != b.event || a.coord != b.coord || a.sign != b.sign ||
          a.df != b.df)
        return false;
    }
  }
  report(true, "9. specialized and generic design routes agree, with zero "
               "design-sized solves before the primal (worst knot dev " +
               sci(worst) + ")");
  return true;
}

// --- criterion 10 -----------------------------------------------------------

bool scaling_reproduction() {
  const std::vector<Eigen::Index> sizes{1000, 10000, 100000};
  const BenchTable fl = run_bench("fl1d", -1, sizes, 100, 1, 3);
  const BenchTable tf = run_bench("tf", 3, sizes, 100, 1, 3);
  if (fl.slope < 0.7 || fl.slope > 1.4) return false;
  if (tf.slope < 0.7 || tf.slope > 1.4) return false;

  const auto t0 = Clock::now();
  const BenchTable grid = run_bench("fl2d", -1, {2500}, 500, 1, 1);
  const double grid_time = elapsed(t0);
  if (grid.points.size() != 1 || grid.points[0].n != 2500) return false;
  if (grid_time >= 300.0) return false;

  char line[160];
  std::snprintf(line, sizeof line,
                "10. first-100-step scaling: fl1d slope %.2f, cubic tf slope "
                "%.2f; 50x50 grid did 500 steps in %.1f s",
                fl.slope, tf.slope, grid_time);
  report(true, line);
  return true;
}

using Criterion = bool (*)();

void run(int number, const char* label, Criterion fn) {
  try {
    if (!fn()) report(false, std::to_string(number) + ". " + label);
  } catch (const std::exception& err) {
    report(false, std::to_string(number) + ". " + label + " (exception: " +
                      err.what() + ")");
  }
}

}  // namespace

int main() {
  run(1, "fused lasso chain step count", fused_chain_step_count);
  run(2, "worked instance", worked_instance);
  run(3, "KKT certification", kkt_certification);
  run(4, "backend equivalence on chains", backend_equivalence);
  run(5, "min-norm solves against SVD", minnorm_against_svd);
  run(6, "update sequences against fresh factorizations", update_equivalence);
  run(7, "Laplacian solve suite", laplacian_suite);
  run(8, "soft-thresholding identity", soft_threshold_identity);
  run(9, "design route equivalence", design_route_equivalence);
  run(10, "timing scalability", scaling_reproduction);

  if (failures == 0) {
    std::printf("all 10 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
